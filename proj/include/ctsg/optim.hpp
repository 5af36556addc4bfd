#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "ctsg/tensor.hpp"

namespace ctsg {

/// Adam with decoupled weight decay.
class AdamW {
public:
    struct Options {
        double lr = 1e-4;
        double weight_decay = 1e-6;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
    };

    AdamW() = default;
    explicit AdamW(Options opt) : opt_(opt) {}

    const Options& options() const noexcept { return opt_; }
    long steps() const noexcept { return step_; }

    /// Updates params in place. grads[i] must have the shape of params[i].
    void step(std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
        if (params.size() != grads.size()) throw DimensionError("AdamW: parameter/gradient count mismatch");
        if (m_.empty()) {
            for (const auto& p : params) {
                m_.push_back(Tensor::zeros(p.shape()));
                v_.push_back(Tensor::zeros(p.shape()));
            }
        }
        ++step_;
        // lr == 0 must leave the weights bitwise untouched, decay included.
        if (opt_.lr == 0.0) return;
        const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(step_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (grads[i].shape() != params[i].shape()) throw DimensionError("AdamW: gradient shape mismatch");
            auto p = params[i].values();
            auto g = grads[i].values();
            auto m = m_[i].values();
            auto v = v_[i].values();
            for (std::size_t k = 0; k < p.size(); ++k) {
                m[k] = opt_.beta1 * m[k] + (1.0 - opt_.beta1) * g[k];
                v[k] = opt_.beta2 * v[k] + (1.0 - opt_.beta2) * g[k] * g[k];
                const double mhat = m[k] / bc1;
                const double vhat = v[k] / bc2;
                p[k] -= opt_.lr * (mhat / (std::sqrt(vhat) + opt_.eps) + opt_.weight_decay * p[k]);
            }
        }
    }

private:
    Options opt_{};
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    long step_ = 0;
};

}  // namespace ctsg
