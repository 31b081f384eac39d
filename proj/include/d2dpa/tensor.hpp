#pragma once

#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace d2dpa {

// Dense row-major f64 tensor. Rank 1 or 2 is all the model needs.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<std::int64_t>(data.size()) != count(shape))
            throw std::invalid_argument("Tensor: data length does not match shape");
    }

    static std::int64_t count(const std::vector<int>& s) {
        std::int64_t n = 1;
        for (int d : s) {
            if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
            n *= d;
        }
        return n;
    }

    static Tensor zeros(std::vector<int> s) {
        auto n = count(s);
        return Tensor(std::move(s), std::vector<double>(static_cast<std::size_t>(n), 0.0));
    }
    static Tensor full(std::vector<int> s, double v) {
        auto n = count(s);
        return Tensor(std::move(s), std::vector<double>(static_cast<std::size_t>(n), v));
    }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor vec(std::vector<double> d) {
        int n = static_cast<int>(d.size());
        return Tensor({n}, std::move(d));
    }
    static Tensor mat(int r, int c, std::vector<double> d) { return Tensor({r, c}, std::move(d)); }

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    int rows() const { return shape.empty() ? 1 : shape[0]; }
    int cols() const {
        if (shape.size() == 2) return shape[1];
        if (shape.size() == 1) return 1;
        throw std::logic_error("Tensor::cols on rank != 1,2");
    }
    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

// Reverse-mode tape. Every operation appends a node whose backward rule
// scatters the output gradient to its parents with +=. backward() walks
// the nodes once, in reverse creation order, so accumulation order is fixed.
class Tape {
public:
    using Var = int;

    Var leaf(Tensor value, bool requires_grad = false) {
        return push(std::move(value), requires_grad, {});
    }

    const Tensor& value(Var v) const { return nodes_[check(v)].value; }
    const Tensor& grad(Var v) const {
        const Node& n = nodes_[check(v)];
        if (n.grad.data.empty()) throw std::logic_error("Tape::grad: no gradient recorded");
        return n.grad;
    }
    bool requires_grad(Var v) const { return nodes_[check(v)].requires_grad; }
    bool has_grad(Var v) const { return !nodes_[check(v)].grad.data.empty(); }

    std::size_t node_count() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    // --- primitives ---
    Var matmul(Var a, Var b);                 // (m,k) x (k,n)
    Var matmul_nt(Var a, Var b);              // (m,k) x (n,k)^T -> (m,n)
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);                    // elementwise
    Var add_scalar(Var a, double c);
    Var scale(Var a, double c);
    Var add_rowvec(Var m, Var v);             // broadcast v over rows of m
    Var sum_all(Var a);                       // -> scalar [1]
    Var sum_axis(Var a, int axis);            // 2-D only; 0 -> [cols], 1 -> [rows]
    Var exp_op(Var a);
    Var log_op(Var a);                        // entries must be > 0
    Var leaky_relu(Var a, double slope);
    Var sigmoid(Var a);
    Var softmax_rows(Var a);                  // stabilized, per row
    Var layer_norm_rows(Var x, Var gain, Var bias, double eps = 1e-5);
    // Training mode normalizes with batch statistics over the row axis and
    // reports them via *_out; eval mode is the affine map given by the
    // supplied running statistics.
    Var batch_norm_cols(Var x, Var gain, Var bias, const Tensor& running_mean,
                        const Tensor& running_var, bool training,
                        Tensor* batch_mean_out = nullptr, Tensor* batch_var_out = nullptr,
                        double eps = 1e-5);
    Var slice_cols(Var a, int c0, int c1);
    Var concat_cols(const std::vector<Var>& parts);
    Var repeat_rows_tile(Var a, int times);        // [A; A; ...]
    Var repeat_rows_interleave(Var a, int times);  // each row repeated `times`
    Var reshape(Var a, std::vector<int> shape);

    // Seeds d(loss)/d(loss) = 1 and propagates. Loss must be a scalar.
    void backward(Var loss);

private:
    struct Node {
        Tensor value;
        Tensor grad;  // lazily sized
        bool requires_grad = false;
        std::function<void(Tape&, Var)> back;  // may be empty (leaf)
    };

    Var push(Tensor value, bool requires_grad, std::function<void(Tape&, Var)> back) {
        nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad, std::move(back)});
        return static_cast<Var>(nodes_.size() - 1);
    }

    int check(Var v) const {
        if (v < 0 || static_cast<std::size_t>(v) >= nodes_.size())
            throw std::logic_error("Tape: invalid variable id");
        return v;
    }

    Tensor& grad_buf(Var v) {
        Node& n = nodes_[check(v)];
        if (n.grad.data.empty()) n.grad = Tensor::zeros(n.value.shape);
        return n.grad;
    }

    std::vector<Node> nodes_;

    friend struct TapeOps;
};

}  // namespace d2dpa
