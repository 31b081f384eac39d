#include <cmath>

#include "d2dpa/optim.hpp"
#include "d2dpa/rng.hpp"
#include "d2dpa/tensor.hpp"
#include "doctest.h"

using namespace d2dpa;

TEST_CASE("forward primitive values") {
    Tape t;
    auto x = t.leaf(Tensor::vec({0.0}));
    CHECK(t.value(t.sigmoid(x)).data[0] == doctest::Approx(0.5));

    auto logits = t.leaf(Tensor::mat(1, 4, {3.0, 3.0, 3.0, 3.0}));
    auto sm = t.softmax_rows(logits);
    for (double v : t.value(sm).data) CHECK(v == doctest::Approx(0.25));

    auto y = t.leaf(Tensor::vec({-1.0, 3.0}));
    auto lr = t.leaky_relu(y, 0.2);
    CHECK(t.value(lr).data[0] == doctest::Approx(-0.2));
    CHECK(t.value(lr).data[1] == doctest::Approx(3.0));
}

TEST_CASE("softmax rows sum to 1 and stay nonnegative") {
    Rng rng(7);
    Tape t;
    Tensor m = Tensor::zeros({20, 13});
    for (double& v : m.data) v = rng.uniform(-30.0, 30.0);
    auto sm = t.softmax_rows(t.leaf(std::move(m)));
    const Tensor& y = t.value(sm);
    for (int i = 0; i < 20; ++i) {
        double s = 0.0;
        for (int j = 0; j < 13; ++j) {
            CHECK(y.at(i, j) >= 0.0);
            s += y.at(i, j);
        }
        CHECK(std::fabs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("backward of sum is all ones") {
    Tape t;
    auto x = t.leaf(Tensor::vec({1.0, -2.0, 5.0}), true);
    auto loss = t.sum_all(x);
    t.backward(loss);
    for (double g : t.grad(x).data) CHECK(g == doctest::Approx(1.0));
}

TEST_CASE("sigmoid(w*x) derivative at w=0 is 0.25") {
    Tape t;
    auto w = t.leaf(Tensor::vec({0.0}), true);
    auto x = t.leaf(Tensor::vec({1.0}));
    auto loss = t.sum_all(t.sigmoid(t.mul(w, x)));
    t.backward(loss);
    CHECK(t.grad(w).data[0] == doctest::Approx(0.25));
}

TEST_CASE("backward before forward / on non-scalar fails") {
    Tape t;
    auto x = t.leaf(Tensor::vec({1.0, 2.0}), true);
    CHECK_THROWS(t.backward(x));
    auto y = t.leaf(Tensor::vec({1.0}), false);
    CHECK_THROWS(t.backward(y));  // does not require grad
}

TEST_CASE("shape mismatches are rejected") {
    Tape t;
    auto a = t.leaf(Tensor::mat(2, 3, std::vector<double>(6, 1.0)));
    auto b = t.leaf(Tensor::mat(2, 2, std::vector<double>(4, 1.0)));
    CHECK_THROWS(t.add(a, b));
    CHECK_THROWS(t.matmul(a, b));
    CHECK_THROWS(t.mul(a, b));
}

namespace {

// evaluates a small composite graph: loss = sum(softmax(LN(A@B + rowvec)) * C) etc.
double composite(const std::vector<Tensor*>& params, std::vector<Tensor>* grads) {
    Tape t;
    std::vector<Tape::Var> vars;
    for (Tensor* p : params) vars.push_back(t.leaf(*p, true));
    auto a = vars[0], b = vars[1], bias = vars[2], gain = vars[3], lnb = vars[4];
    auto m = t.add_rowvec(t.matmul(a, b), bias);             // 3x4
    auto ln = t.layer_norm_rows(m, gain, lnb);
    auto sm = t.softmax_rows(t.leaky_relu(ln, 0.2));
    auto sg = t.sigmoid(t.sum_axis(sm, 1));
    auto lg = t.log_op(t.add_scalar(t.exp_op(t.scale(sg, 0.3)), 1.0));
    auto loss = t.sum_all(t.mul(lg, lg));
    if (grads) {
        t.backward(loss);
        grads->clear();
        for (auto v : vars) grads->push_back(t.grad(v));
    }
    return t.value(loss).data[0];
}

}  // namespace

TEST_CASE("composite graph matches central finite differences") {
    Rng rng(11);
    Tensor A = Tensor::zeros({3, 5}), B = Tensor::zeros({5, 4});
    Tensor bias = Tensor::zeros({4}), gain = Tensor::full({4}, 1.0), lnb = Tensor::zeros({4});
    for (double& v : A.data) v = rng.uniform(-1.0, 1.0);
    for (double& v : B.data) v = rng.uniform(-1.0, 1.0);
    for (double& v : bias.data) v = rng.uniform(-0.5, 0.5);
    for (double& v : gain.data) v = rng.uniform(0.5, 1.5);
    std::vector<Tensor*> params = {&A, &B, &bias, &gain, &lnb};
    auto report = grad_check(composite, params, {"A", "B", "bias", "gain", "lnb"});
    CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("every primitive passes a finite-difference check") {
    Rng rng(13);
    Tensor X = Tensor::zeros({4, 6});
    for (double& v : X.data) v = rng.uniform(-1.2, 1.2);
    Tensor G = Tensor::full({6}, 1.0), Bv = Tensor::zeros({6});
    Tensor W = Tensor::zeros({6, 6});
    for (double& v : W.data) v = rng.uniform(-0.7, 0.7);
    Tensor rm = Tensor::zeros({6}), rv = Tensor::full({6}, 1.0);

    struct Case {
        const char* name;
        std::function<Tape::Var(Tape&, Tape::Var, Tape::Var, Tape::Var, Tape::Var)> f;
    };
    const Tensor rm_c = rm, rv_c = rv;
    std::vector<Case> cases = {
        {"matmul", [](Tape& t, auto x, auto w, auto, auto) { return t.matmul(x, w); }},
        {"matmul_nt", [](Tape& t, auto x, auto w, auto, auto) { return t.matmul_nt(x, w); }},
        {"add", [](Tape& t, auto x, auto, auto, auto) { return t.add(x, x); }},
        {"sub", [](Tape& t, auto x, auto, auto, auto) { return t.sub(t.exp_op(x), x); }},
        {"mul", [](Tape& t, auto x, auto, auto, auto) { return t.mul(x, x); }},
        {"exp", [](Tape& t, auto x, auto, auto, auto) { return t.exp_op(x); }},
        {"log", [](Tape& t, auto x, auto, auto, auto) { return t.log_op(t.add_scalar(t.exp_op(x), 0.5)); }},
        {"leaky_relu", [](Tape& t, auto x, auto, auto, auto) { return t.leaky_relu(x, 0.2); }},
        {"sigmoid", [](Tape& t, auto x, auto, auto, auto) { return t.sigmoid(x); }},
        {"softmax", [](Tape& t, auto x, auto, auto, auto) { return t.softmax_rows(x); }},
        {"layer_norm", [](Tape& t, auto x, auto, auto g, auto b) { return t.layer_norm_rows(x, g, b); }},
        {"batch_norm_train",
         [&rm_c, &rv_c](Tape& t, auto x, auto, auto g, auto b) {
             return t.batch_norm_cols(x, g, b, rm_c, rv_c, true);
         }},
        {"batch_norm_eval",
         [&rm_c, &rv_c](Tape& t, auto x, auto, auto g, auto b) {
             return t.batch_norm_cols(x, g, b, rm_c, rv_c, false);
         }},
        {"slice_concat",
         [](Tape& t, auto x, auto, auto, auto) {
             return t.concat_cols({t.slice_cols(x, 3, 6), t.slice_cols(x, 0, 3)});
         }},
        {"repeat_tile", [](Tape& t, auto x, auto, auto, auto) { return t.repeat_rows_tile(x, 3); }},
        {"repeat_interleave",
         [](Tape& t, auto x, auto, auto, auto) { return t.repeat_rows_interleave(x, 3); }},
        {"sum_axis0", [](Tape& t, auto x, auto, auto, auto) { return t.sum_axis(x, 0); }},
        {"reshape", [](Tape& t, auto x, auto, auto, auto) { return t.reshape(x, {6, 4}); }},
        {"add_rowvec", [](Tape& t, auto x, auto, auto, auto b) { return t.add_rowvec(x, b); }},
    };

    for (const auto& c : cases) {
        CAPTURE(c.name);
        auto closure = [&](const std::vector<Tensor*>& ps, std::vector<Tensor>* grads) {
            Tape t;
            auto x = t.leaf(*ps[0], true);
            auto w = t.leaf(*ps[1], true);
            auto g = t.leaf(*ps[2], true);
            auto b = t.leaf(*ps[3], true);
            auto y = c.f(t, x, w, g, b);
            // squared sum makes the loss sensitive to every output entry
            auto loss = t.sum_all(t.mul(y, y));
            if (grads) {
                t.backward(loss);
                grads->assign({t.grad(x), t.has_grad(w) ? t.grad(w) : Tensor::zeros(ps[1]->shape),
                               Tensor::zeros(ps[2]->shape), Tensor::zeros(ps[3]->shape)});
            }
            return t.value(loss).data[0];
        };
        // check only the x gradient (always participates)
        std::vector<Tensor*> ps = {&X, &W, &G, &Bv};
        std::vector<Tensor> analytic;
        closure(ps, &analytic);
        double base = closure(ps, nullptr);
        (void)base;
        double max_err = 0.0;
        for (std::size_t i = 0; i < X.data.size(); ++i) {
            double saved = X.data[i];
            X.data[i] = saved + 1e-5;
            double lp = closure(ps, nullptr);
            X.data[i] = saved - 1e-5;
            double lm = closure(ps, nullptr);
            X.data[i] = saved;
            double fd = (lp - lm) / 2e-5;
            double denom = std::max({std::fabs(fd), std::fabs(analytic[0].data[i]), 1e-6});
            max_err = std::max(max_err, std::fabs(fd - analytic[0].data[i]) / denom);
        }
        CHECK_MESSAGE(max_err < 1e-4, (std::string(c.name) + " err=" + std::to_string(max_err)));
    }
}

TEST_CASE("batch_norm eval mode is a per-feature affine map") {
    Rng rng(3);
    Tensor X = Tensor::zeros({8, 5});
    for (double& v : X.data) v = rng.uniform(-2.0, 2.0);
    Tensor G = Tensor::full({5}, 1.3), B = Tensor::full({5}, 0.2);
    Tensor rm = Tensor::full({5}, 0.4), rv = Tensor::full({5}, 2.0);

    Tape t;
    auto y = t.batch_norm_cols(t.leaf(X), t.leaf(G), t.leaf(B), rm, rv, false);
    // permuting the batch permutes outputs identically
    Tensor Xp = X;
    std::swap_ranges(Xp.data.begin(), Xp.data.begin() + 5, Xp.data.begin() + 15);
    auto yp = t.batch_norm_cols(t.leaf(Xp), t.leaf(G), t.leaf(B), rm, rv, false);
    for (int j = 0; j < 5; ++j) {
        CHECK(t.value(y).at(0, j) == t.value(yp).at(3, j));
        CHECK(t.value(y).at(3, j) == t.value(yp).at(0, j));
    }
}

TEST_CASE("AdamW first step and decay behavior") {
    SUBCASE("first step moves by about -lr") {
        Tensor theta = Tensor::vec({1.0});
        Tensor g = Tensor::vec({0.3});
        AdamW opt(AdamWConfig{5e-4, 0.9, 0.999, 1e-8, 0.0});
        opt.step({&theta}, {&g});
        CHECK(theta.data[0] == doctest::Approx(1.0 - 5e-4).epsilon(1e-4));
    }
    SUBCASE("zero gradient, zero decay leaves parameter unchanged") {
        Tensor theta = Tensor::vec({0.7});
        Tensor g = Tensor::vec({0.0});
        AdamW opt(AdamWConfig{5e-4, 0.9, 0.999, 1e-8, 0.0});
        opt.step({&theta}, {&g});
        CHECK(theta.data[0] == 0.7);
    }
    SUBCASE("decoupled decay shrinks by lr*wd") {
        Tensor theta = Tensor::vec({1.0});
        Tensor g = Tensor::vec({0.0});
        AdamW opt(AdamWConfig{5e-4, 0.9, 0.999, 1e-8, 0.01});
        opt.step({&theta}, {&g});
        CHECK(theta.data[0] == doctest::Approx(1.0 - 5e-4 * 0.01));
    }
}

TEST_CASE("grad_check on a linear model is near exact") {
    Tensor w = Tensor::vec({0.3, -0.7, 1.1});
    auto closure = [](const std::vector<Tensor*>& ps, std::vector<Tensor>* grads) {
        Tape t;
        auto wv = t.leaf(*ps[0], true);
        auto x = t.leaf(Tensor::vec({1.0, 2.0, -0.5}));
        auto loss = t.sum_all(t.mul(wv, x));
        if (grads) {
            t.backward(loss);
            grads->assign({t.grad(wv)});
        }
        return t.value(loss).data[0];
    };
    auto rep = grad_check(closure, {&w}, {"w"});
    CHECK(rep.max_rel_error < 1e-8);
}

TEST_CASE("identical closures evaluate bitwise equal") {
    Tensor w = Tensor::vec({0.25});
    auto closure = [](const std::vector<Tensor*>& ps, std::vector<Tensor>*) {
        Tape t;
        auto wv = t.leaf(*ps[0], true);
        return t.value(t.sum_all(t.sigmoid(wv))).data[0];
    };
    CHECK(closure({&w}, nullptr) == closure({&w}, nullptr));
}
