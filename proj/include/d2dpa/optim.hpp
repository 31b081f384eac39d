#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "d2dpa/tensor.hpp"

namespace d2dpa {

struct AdamWConfig {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// Decoupled weight decay: theta -= lr * mhat/(sqrt(vhat)+eps) + lr * wd * theta.
class AdamW {
public:
    explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

    const AdamWConfig& config() const { return cfg_; }
    std::int64_t step_count() const { return t_; }

    // params[i] and grads[i] must keep the same shapes across calls.
    void step(std::vector<Tensor*> params, const std::vector<const Tensor*>& grads) {
        if (params.size() != grads.size())
            throw std::invalid_argument("AdamW::step: params/grads size mismatch");
        if (m_.empty()) {
            for (const Tensor* p : params) {
                m_.push_back(Tensor::zeros(p->shape));
                v_.push_back(Tensor::zeros(p->shape));
            }
        }
        if (m_.size() != params.size())
            throw std::invalid_argument("AdamW::step: parameter count changed");
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t k = 0; k < params.size(); ++k) {
            Tensor& p = *params[k];
            const Tensor& g = *grads[k];
            if (!p.same_shape(g) || !p.same_shape(m_[k]))
                throw std::invalid_argument("AdamW::step: shape mismatch");
            for (std::size_t i = 0; i < p.data.size(); ++i) {
                double gi = g.data[i];
                m_[k].data[i] = cfg_.beta1 * m_[k].data[i] + (1.0 - cfg_.beta1) * gi;
                v_[k].data[i] = cfg_.beta2 * v_[k].data[i] + (1.0 - cfg_.beta2) * gi * gi;
                double mhat = m_[k].data[i] / bc1;
                double vhat = v_[k].data[i] / bc2;
                p.data[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                                        cfg_.weight_decay * p.data[i]);
            }
        }
    }

    void set_lr(double lr) { cfg_.lr = lr; }
    double lr() const { return cfg_.lr; }

private:
    AdamWConfig cfg_;
    std::int64_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

struct GradCheckEntry {
    std::string name;
    double max_rel_error = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_error = 0.0;
    bool ok(double tol) const { return max_rel_error < tol; }
};

// Compares tape gradients against central finite differences on a
// deterministic closure. Closure contract: evaluate the loss at the current
// parameter values; when `grads` is non-null, also fill per-parameter
// gradients (same order as params).
using LossClosure =
    std::function<double(const std::vector<Tensor*>& params, std::vector<Tensor>* grads)>;

GradCheckReport grad_check(const LossClosure& closure, const std::vector<Tensor*>& params,
                           const std::vector<std::string>& names, double fd_step = 1e-5);

}  // namespace d2dpa
