#include "d2dpa/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace d2dpa {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

void check2d(const Tensor& t, const char* who) {
    if (t.shape.size() != 2) throw std::invalid_argument(std::string(who) + ": expected a 2-D tensor");
}

}  // namespace

Tape::Var Tape::matmul(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    check2d(A, "matmul");
    check2d(B, "matmul");
    require(A.shape[1] == B.shape[0], "matmul: inner dimensions disagree");
    const int m = A.shape[0], k = A.shape[1], n = B.shape[1];
    Tensor C = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i)
        for (int t = 0; t < k; ++t) {
            const double av = A.at(i, t);
            if (av == 0.0) continue;
            for (int j = 0; j < n; ++j) C.at(i, j) += av * B.at(t, j);
        }
    bool rg = requires_grad(a) || requires_grad(b);
    return push(std::move(C), rg, [a, b, m, k, n](Tape& tp, Var out) {
        const Tensor& g = tp.grad_buf(out);
        if (tp.requires_grad(a)) {
            Tensor& ga = tp.grad_buf(a);
            const Tensor& B2 = tp.value(b);
            for (int i = 0; i < m; ++i)
                for (int t = 0; t < k; ++t) {
                    double s = 0.0;
                    for (int j = 0; j < n; ++j) s += g.at(i, j) * B2.at(t, j);
                    ga.at(i, t) += s;
                }
        }
        if (tp.requires_grad(b)) {
            Tensor& gb = tp.grad_buf(b);
            const Tensor& A2 = tp.value(a);
            for (int t = 0; t < k; ++t)
                for (int i = 0; i < m; ++i) {
                    const double av = A2.at(i, t);
                    if (av == 0.0) continue;
                    for (int j = 0; j < n; ++j) gb.at(t, j) += av * g.at(i, j);
                }
        }
    });
}

Tape::Var Tape::matmul_nt(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    check2d(A, "matmul_nt");
    check2d(B, "matmul_nt");
    require(A.shape[1] == B.shape[1], "matmul_nt: inner dimensions disagree");
    const int m = A.shape[0], k = A.shape[1], n = B.shape[0];
    Tensor C = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int t = 0; t < k; ++t) s += A.at(i, t) * B.at(j, t);
            C.at(i, j) = s;
        }
    bool rg = requires_grad(a) || requires_grad(b);
    return push(std::move(C), rg, [a, b, m, k, n](Tape& tp, Var out) {
        const Tensor& g = tp.grad_buf(out);
        if (tp.requires_grad(a)) {
            Tensor& ga = tp.grad_buf(a);
            const Tensor& B2 = tp.value(b);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const double gv = g.at(i, j);
                    if (gv == 0.0) continue;
                    for (int t = 0; t < k; ++t) ga.at(i, t) += gv * B2.at(j, t);
                }
        }
        if (tp.requires_grad(b)) {
            Tensor& gb = tp.grad_buf(b);
            const Tensor& A2 = tp.value(a);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const double gv = g.at(i, j);
                    if (gv == 0.0) continue;
                    for (int t = 0; t < k; ++t) gb.at(j, t) += gv * A2.at(i, t);
                }
        }
    });
}

Tape::Var Tape::add(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require(A.same_shape(B), "add: shape mismatch");
    Tensor C = A;
    for (std::size_t i = 0; i < C.data.size(); ++i) C.data[i] += B.data[i];
    bool rg = requires_grad(a) || requires_grad(b);
    return push(std::move(C), rg, [a, b](Tape& tp, Var out) {
        const Tensor& g = tp.grad_buf(out);
        if (tp.requires_grad(a)) {
            Tensor& ga = tp.grad_buf(a);
            for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
        }
        if (tp.requires_grad(b)) {
            Tensor& gb = tp.grad_buf(b);
            for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i];
        }
    });
}

Tape::Var Tape::sub(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require(A.same_shape(B), "sub: shape mismatch");
    Tensor C = A;
    for (std::size_t i = 0; i < C.data.size(); ++i) C.data[i] -= B.data[i];
    bool rg = requires_grad(a) || requires_grad(b);
    return push(std::move(C), rg, [a, b](Tape& tp, Var out) {
        const Tensor& g = tp.grad_buf(out);
        if (tp.requires_grad(a)) {
            Tensor& ga = tp.grad_buf(a);
            for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
        }
        if (tp.requires_grad(b)) {
            Tensor& gb = tp.grad_buf(b);
            for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] -= g.data[i];
        }
    });
}

Tape::Var Tape::mul(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require(A.same_shape(B), "mul: shape mismatch");
    Tensor C = A;
    for (std::size_t i = 0; i < C.data.size(); ++i) C.data[i] *= B.data[i];
    bool rg = requires_grad(a) || requires_grad(b);
    return push(std::move(C), rg, [a, b](Tape& tp, Var out) {
        const Tensor& g = tp.grad_buf(out);
        if (tp.requires_grad(a)) {
            Tensor& ga = tp.grad_buf(a);
            const Tensor& B2 = tp.value(b);
            for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * B2.data[i];
        }
        if (tp.requires_grad(b)) {
            Tensor& gb = tp.grad_buf(b);
            const Tensor& A2 = tp.value(a);
            for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i] * A2.data[i];
        }
    });
}

Tape::Var Tape::add_scalar(Var a, double c) {
    Tensor C = value(a);
    for (double& v : C.data) v += c;
    return push(std::move(C), requires_grad(a), [a](Tape& tp, Var out) {
        if (!tp.requires_grad(a)) return;
        const Tensor& g = tp.grad_buf(out);
        Tensor& ga = tp.grad_buf(a);
        for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
    });
}

Tape::Var Tape::scale(Var a, double c) {
    Tensor C = value(a);
    for (double& v : C.data) v *= c;
    return push(std::move(C), requires_grad(a), [a, c](Tape& tp, Var out) {
        if (!tp.requires_grad(a)) return;
        const Tensor& g = tp.grad_buf(out);
        Tensor& ga = tp.grad_buf(a);
        for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += c * g.data[i];
    });
}

Tape::Var Tape::add_rowvec(Var m, Var v) {
    const Tensor& M = value(m);
    const Tensor& V = value(v);
    check2d(M, "add_rowvec");
    require(V.shape.size() == 1 && V.shape[0] == M.shape[1], "add_rowvec: vector length != cols");
    Tensor C = M;
    const int rows = M.shape[0], cols = M.shape[1];
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) C.at(i, j) += V.data[j];
    bool rg = requires_grad(m) || requires_grad(v);
    return push(std::move(C), rg, [m, v, rows, cols](Tape& tp, Var out) {
        const Tensor& g = tp.grad_buf(out);
        if (tp.requires_grad(m)) {
            Tensor& gm = tp.grad_buf(m);
            for (std::size_t i = 0; i < g.data.size(); ++i) gm.data[i] += g.data[i];
        }
        if (tp.requires_grad(v)) {
            Tensor& gv = tp.grad_buf(v);
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j) gv.data[j] += g.at(i, j);
        }
    });
}

Tape::Var Tape::sum_all(Var a) {
    const Tensor& A = value(a);
    double s = 0.0;
    for (double v : A.data) s += v;
    return push(Tensor::scalar(s), requires_grad(a), [a](Tape& tp, Var out) {
        if (!tp.requires_grad(a)) return;
        const double g = tp.grad_buf(out).data[0];
        Tensor& ga = tp.grad_buf(a);
        for (double& v : ga.data) v += g;
    });
}

Tape::Var Tape::sum_axis(Var a, int axis) {
    const Tensor& A = value(a);
    check2d(A, "sum_axis");
    require(axis == 0 || axis == 1, "sum_axis: axis must be 0 or 1");
    const int rows = A.shape[0], cols = A.shape[1];
    Tensor C = Tensor::zeros({axis == 0 ? cols : rows});
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) C.data[axis == 0 ? j : i] += A.at(i, j);
    return push(std::move(C), requires_grad(a), [a, axis, rows, cols](Tape& tp, Var out) {
        if (!tp.requires_grad(a)) return;
        const Tensor& g = tp.grad_buf(out);
        Tensor& ga = tp.grad_buf(a);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) ga.at(i, j) += g.data[axis == 0 ? j : i];
    });
}

Tape::Var Tape::exp_op(Var a) {
    Tensor C = value(a);
    for (double& v : C.data) v = std::exp(v);
    return push(std::move(C), requires_grad(a), [a](Tape& tp, Var out) {
        if (!tp.requires_grad(a)) return;
        const Tensor& g = tp.grad_buf(out);
        const Tensor& y = tp.value(out);
        Tensor& ga = tp.grad_buf(a);
        for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * y.data[i];
    });
}

Tape::Var Tape::log_op(Var a) {
    Tensor C = value(a);
    for (double& v : C.data) {
        if (!(v > 0.0)) throw std::domain_error("log: argument must be > 0");
        v = std::log(v);
    }
    return push(std::move(C), requires_grad(a), [a](Tape& tp, Var out) {
        if (!tp.requires_grad(a)) return;
        const Tensor& g = tp.grad_buf(out);
        const Tensor& x = tp.value(a);
        Tensor& ga = tp.grad_buf(a);
        for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] / x.data[i];
    });
}

Tape::Var Tape::leaky_relu(Var a, double slope) {
    Tensor C = value(a);
    for (double& v : C.data) v = v >= 0.0 ? v : slope * v;
    return push(std::move(C), requires_grad(a), [a, slope](Tape& tp, Var out) {
        if (!tp.requires_grad(a)) return;
        const Tensor& g = tp.grad_buf(out);
        const Tensor& x = tp.value(a);
        Tensor& ga = tp.grad_buf(a);
        // kink at 0 takes the positive-side derivative
        for (std::size_t i = 0; i < g.data.size(); ++i)
            ga.data[i] += g.data[i] * (x.data[i] >= 0.0 ? 1.0 : slope);
    });
}

Tape::Var Tape::sigmoid(Var a) {
    Tensor C = value(a);
    for (double& v : C.data) v = 1.0 / (1.0 + std::exp(-v));
    return push(std::move(C), requires_grad(a), [a](Tape& tp, Var out) {
        if (!tp.requires_grad(a)) return;
        const Tensor& g = tp.grad_buf(out);
        const Tensor& y = tp.value(out);
        Tensor& ga = tp.grad_buf(a);
        for (std::size_t i = 0; i < g.data.size(); ++i)
            ga.data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
    });
}

Tape::Var Tape::softmax_rows(Var a) {
    const Tensor& A = value(a);
    check2d(A, "softmax_rows");
    const int rows = A.shape[0], cols = A.shape[1];
    require(cols > 0, "softmax_rows: empty axis");
    Tensor C = A;
    for (int i = 0; i < rows; ++i) {
        double mx = C.at(i, 0);
        for (int j = 1; j < cols; ++j) mx = std::max(mx, C.at(i, j));
        double denom = 0.0;
        for (int j = 0; j < cols; ++j) {
            double e = std::exp(C.at(i, j) - mx);
            C.at(i, j) = e;
            denom += e;
        }
        for (int j = 0; j < cols; ++j) C.at(i, j) /= denom;
    }
    return push(std::move(C), requires_grad(a), [a, rows, cols](Tape& tp, Var out) {
        if (!tp.requires_grad(a)) return;
        const Tensor& g = tp.grad_buf(out);
        const Tensor& y = tp.value(out);
        Tensor& ga = tp.grad_buf(a);
        for (int i = 0; i < rows; ++i) {
            double dot = 0.0;
            for (int j = 0; j < cols; ++j) dot += g.at(i, j) * y.at(i, j);
            for (int j = 0; j < cols; ++j) ga.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
        }
    });
}

Tape::Var Tape::layer_norm_rows(Var x, Var gain, Var bias, double eps) {
    const Tensor& X = value(x);
    const Tensor& G = value(gain);
    const Tensor& B = value(bias);
    check2d(X, "layer_norm_rows");
    const int rows = X.shape[0], cols = X.shape[1];
    require(G.shape.size() == 1 && G.shape[0] == cols, "layer_norm_rows: gain length != cols");
    require(B.shape.size() == 1 && B.shape[0] == cols, "layer_norm_rows: bias length != cols");
    Tensor Y = Tensor::zeros({rows, cols});
    Tensor xhat = Tensor::zeros({rows, cols});
    std::vector<double> inv_std(rows);
    for (int i = 0; i < rows; ++i) {
        double mean = 0.0;
        for (int j = 0; j < cols; ++j) mean += X.at(i, j);
        mean /= cols;
        double var = 0.0;
        for (int j = 0; j < cols; ++j) {
            double d = X.at(i, j) - mean;
            var += d * d;
        }
        var /= cols;
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < cols; ++j) {
            xhat.at(i, j) = (X.at(i, j) - mean) * inv_std[i];
            Y.at(i, j) = G.data[j] * xhat.at(i, j) + B.data[j];
        }
    }
    bool rg = requires_grad(x) || requires_grad(gain) || requires_grad(bias);
    return push(std::move(Y), rg,
                [x, gain, bias, rows, cols, xhat = std::move(xhat),
                 inv_std = std::move(inv_std)](Tape& tp, Var out) {
        const Tensor& g = tp.grad_buf(out);
        const Tensor& G2 = tp.value(gain);
        if (tp.requires_grad(gain)) {
            Tensor& gg = tp.grad_buf(gain);
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j) gg.data[j] += g.at(i, j) * xhat.at(i, j);
        }
        if (tp.requires_grad(bias)) {
            Tensor& gb = tp.grad_buf(bias);
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j) gb.data[j] += g.at(i, j);
        }
        if (tp.requires_grad(x)) {
            Tensor& gx = tp.grad_buf(x);
            for (int i = 0; i < rows; ++i) {
                double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                for (int j = 0; j < cols; ++j) {
                    double dxh = g.at(i, j) * G2.data[j];
                    sum_dxhat += dxh;
                    sum_dxhat_xhat += dxh * xhat.at(i, j);
                }
                for (int j = 0; j < cols; ++j) {
                    double dxh = g.at(i, j) * G2.data[j];
                    gx.at(i, j) += inv_std[i] / cols *
                                   (cols * dxh - sum_dxhat - xhat.at(i, j) * sum_dxhat_xhat);
                }
            }
        }
    });
}

Tape::Var Tape::batch_norm_cols(Var x, Var gain, Var bias, const Tensor& running_mean,
                                const Tensor& running_var, bool training,
                                Tensor* batch_mean_out, Tensor* batch_var_out, double eps) {
    const Tensor& X = value(x);
    const Tensor& G = value(gain);
    const Tensor& B = value(bias);
    check2d(X, "batch_norm_cols");
    const int rows = X.shape[0], cols = X.shape[1];
    require(G.shape.size() == 1 && G.shape[0] == cols, "batch_norm_cols: gain length != cols");
    require(B.shape.size() == 1 && B.shape[0] == cols, "batch_norm_cols: bias length != cols");

    std::vector<double> mean(cols), var(cols);
    if (training) {
        require(rows >= 1, "batch_norm_cols: empty batch");
        for (int j = 0; j < cols; ++j) mean[j] = 0.0;
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) mean[j] += X.at(i, j);
        for (int j = 0; j < cols; ++j) mean[j] /= rows;
        for (int j = 0; j < cols; ++j) var[j] = 0.0;
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) {
                double d = X.at(i, j) - mean[j];
                var[j] += d * d;
            }
        for (int j = 0; j < cols; ++j) var[j] /= rows;
        if (batch_mean_out) *batch_mean_out = Tensor::vec(std::vector<double>(mean));
        if (batch_var_out) *batch_var_out = Tensor::vec(std::vector<double>(var));
    } else {
        require(running_mean.shape.size() == 1 && running_mean.shape[0] == cols,
                "batch_norm_cols: running mean length != cols");
        require(running_var.shape.size() == 1 && running_var.shape[0] == cols,
                "batch_norm_cols: running var length != cols");
        for (int j = 0; j < cols; ++j) {
            mean[j] = running_mean.data[j];
            var[j] = running_var.data[j];
        }
    }

    std::vector<double> inv_std(cols);
    for (int j = 0; j < cols; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + eps);

    Tensor Y = Tensor::zeros({rows, cols});
    Tensor xhat = Tensor::zeros({rows, cols});
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            xhat.at(i, j) = (X.at(i, j) - mean[j]) * inv_std[j];
            Y.at(i, j) = G.data[j] * xhat.at(i, j) + B.data[j];
        }

    bool rg = requires_grad(x) || requires_grad(gain) || requires_grad(bias);
    return push(std::move(Y), rg,
                [x, gain, bias, rows, cols, training, xhat = std::move(xhat),
                 inv_std = std::move(inv_std)](Tape& tp, Var out) {
        const Tensor& g = tp.grad_buf(out);
        const Tensor& G2 = tp.value(gain);
        if (tp.requires_grad(gain)) {
            Tensor& gg = tp.grad_buf(gain);
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j) gg.data[j] += g.at(i, j) * xhat.at(i, j);
        }
        if (tp.requires_grad(bias)) {
            Tensor& gb = tp.grad_buf(bias);
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j) gb.data[j] += g.at(i, j);
        }
        if (tp.requires_grad(x)) {
            Tensor& gx = tp.grad_buf(x);
            if (training) {
                // gradient flows through the batch statistics
                std::vector<double> sum_dxhat(cols, 0.0), sum_dxhat_xhat(cols, 0.0);
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < cols; ++j) {
                        double dxh = g.at(i, j) * G2.data[j];
                        sum_dxhat[j] += dxh;
                        sum_dxhat_xhat[j] += dxh * xhat.at(i, j);
                    }
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < cols; ++j) {
                        double dxh = g.at(i, j) * G2.data[j];
                        gx.at(i, j) += inv_std[j] / rows *
                                       (rows * dxh - sum_dxhat[j] -
                                        xhat.at(i, j) * sum_dxhat_xhat[j]);
                    }
            } else {
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < cols; ++j)
                        gx.at(i, j) += g.at(i, j) * G2.data[j] * inv_std[j];
            }
        }
    });
}

Tape::Var Tape::slice_cols(Var a, int c0, int c1) {
    const Tensor& A = value(a);
    check2d(A, "slice_cols");
    require(0 <= c0 && c0 < c1 && c1 <= A.shape[1], "slice_cols: bad column range");
    const int rows = A.shape[0], w = c1 - c0;
    Tensor C = Tensor::zeros({rows, w});
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < w; ++j) C.at(i, j) = A.at(i, c0 + j);
    return push(std::move(C), requires_grad(a), [a, c0, rows, w](Tape& tp, Var out) {
        if (!tp.requires_grad(a)) return;
        const Tensor& g = tp.grad_buf(out);
        Tensor& ga = tp.grad_buf(a);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < w; ++j) ga.at(i, c0 + j) += g.at(i, j);
    });
}

Tape::Var Tape::concat_cols(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_cols: no inputs");
    const int rows = value(parts[0]).shape[0];
    int total = 0;
    bool rg = false;
    for (Var p : parts) {
        const Tensor& T = value(p);
        check2d(T, "concat_cols");
        require(T.shape[0] == rows, "concat_cols: row count mismatch");
        total += T.shape[1];
        rg = rg || requires_grad(p);
    }
    Tensor C = Tensor::zeros({rows, total});
    int off = 0;
    for (Var p : parts) {
        const Tensor& T = value(p);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < T.shape[1]; ++j) C.at(i, off + j) = T.at(i, j);
        off += T.shape[1];
    }
    return push(std::move(C), rg, [parts, rows](Tape& tp, Var out) {
        const Tensor& g = tp.grad_buf(out);
        int off = 0;
        for (Var p : parts) {
            const int w = tp.value(p).shape[1];
            if (tp.requires_grad(p)) {
                Tensor& gp = tp.grad_buf(p);
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < w; ++j) gp.at(i, j) += g.at(i, off + j);
            }
            off += w;
        }
    });
}

Tape::Var Tape::repeat_rows_tile(Var a, int times) {
    const Tensor& A = value(a);
    check2d(A, "repeat_rows_tile");
    require(times >= 1, "repeat_rows_tile: times must be >= 1");
    const int rows = A.shape[0], cols = A.shape[1];
    Tensor C = Tensor::zeros({rows * times, cols});
    for (int t = 0; t < times; ++t)
        std::copy(A.data.begin(), A.data.end(),
                  C.data.begin() + static_cast<std::size_t>(t) * A.data.size());
    return push(std::move(C), requires_grad(a), [a, times, rows, cols](Tape& tp, Var out) {
        if (!tp.requires_grad(a)) return;
        const Tensor& g = tp.grad_buf(out);
        Tensor& ga = tp.grad_buf(a);
        for (int t = 0; t < times; ++t)
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j) ga.at(i, j) += g.at(t * rows + i, j);
    });
}

Tape::Var Tape::repeat_rows_interleave(Var a, int times) {
    const Tensor& A = value(a);
    check2d(A, "repeat_rows_interleave");
    require(times >= 1, "repeat_rows_interleave: times must be >= 1");
    const int rows = A.shape[0], cols = A.shape[1];
    Tensor C = Tensor::zeros({rows * times, cols});
    for (int i = 0; i < rows; ++i)
        for (int t = 0; t < times; ++t)
            for (int j = 0; j < cols; ++j) C.at(i * times + t, j) = A.at(i, j);
    return push(std::move(C), requires_grad(a), [a, times, rows, cols](Tape& tp, Var out) {
        if (!tp.requires_grad(a)) return;
        const Tensor& g = tp.grad_buf(out);
        Tensor& ga = tp.grad_buf(a);
        for (int i = 0; i < rows; ++i)
            for (int t = 0; t < times; ++t)
                for (int j = 0; j < cols; ++j) ga.at(i, j) += g.at(i * times + t, j);
    });
}

Tape::Var Tape::reshape(Var a, std::vector<int> shape) {
    const Tensor& A = value(a);
    require(Tensor::count(shape) == A.size(), "reshape: element count mismatch");
    Tensor C(std::move(shape), A.data);
    return push(std::move(C), requires_grad(a), [a](Tape& tp, Var out) {
        if (!tp.requires_grad(a)) return;
        const Tensor& g = tp.grad_buf(out);
        Tensor& ga = tp.grad_buf(a);
        for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
    });
}

void Tape::backward(Var loss) {
    const Node& ln = nodes_[check(loss)];
    if (ln.value.size() != 1) throw std::invalid_argument("backward: loss must be a scalar");
    if (!ln.requires_grad) throw std::logic_error("backward: loss does not require grad");
    grad_buf(loss).data[0] = 1.0;
    for (int v = loss; v >= 0; --v) {
        Node& n = nodes_[v];
        if (!n.requires_grad || n.grad.data.empty() || !n.back) continue;
        n.back(*this, v);
    }
    // NaN gradients indicate a broken graph; fail loudly.
    for (const Node& n : nodes_) {
        if (!n.requires_grad || n.back || n.grad.data.empty()) continue;
        for (double g : n.grad.data)
            if (!std::isfinite(g)) throw std::runtime_error("backward: non-finite gradient");
    }
}

}  // namespace d2dpa
