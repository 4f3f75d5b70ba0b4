#pragma once

#include <cstdint>

#include "dcnet/errors.hpp"
#include "dcnet/kernels.hpp"
#include "dcnet/tensor.hpp"

namespace dcnet {

// Heavy-ball SGD with a step decay schedule.
struct SgdConfig {
    double initial_lr = 1e-2;
    double momentum = 0.9;
    double decay_factor = 0.9;
    int decay_every = 3;
    int total_epochs = 9;

    void validate() const {
        if (initial_lr <= 0.0) throw ConfigError("initial_lr must be > 0");
        if (momentum < 0.0 || momentum >= 1.0)
            throw ConfigError("momentum must be in [0, 1)");
        if (decay_factor <= 0.0 || decay_factor > 1.0)
            throw ConfigError("decay_factor must be in (0, 1]");
        if (decay_every < 1) throw ConfigError("decay_every must be >= 1");
        if (total_epochs < 1) throw ConfigError("total_epochs must be >= 1");
    }
};

// lr = initial_lr * decay_factor^floor((epoch-1)/decay_every), computed by
// repeated multiplication so the value is exactly the product recurrence
// (0.01 * 0.9 is not the decimal literal 0.009 in binary floating point).
inline double scheduled_lr(const SgdConfig& cfg, int epoch) {
    cfg.validate();
    if (epoch < 1 || epoch > cfg.total_epochs)
        throw InputError("epoch " + std::to_string(epoch) + " outside [1, " +
                         std::to_string(cfg.total_epochs) + "]");
    double lr = cfg.initial_lr;
    const int steps = (epoch - 1) / cfg.decay_every;
    for (int i = 0; i < steps; ++i) lr *= cfg.decay_factor;
    return lr;
}

// v <- mu*v - lr*g; w <- w + v, applied elementwise to one parameter tensor.
template <typename T>
void sgd_step(Tensor4<T>& param, Tensor4<T>& velocity, const Tensor4<T>& grad, T lr,
              T mu) {
    if (!(param.shape() == velocity.shape()) || !(param.shape() == grad.shape()))
        throw ShapeError("sgd_step: mismatched shapes " + param.shape().str() + " / " +
                         velocity.shape().str() + " / " + grad.shape().str());
    kernels::ops<T>().sgd_update(param.data(), velocity.data(), grad.data(), lr, mu,
                                 param.size());
}

}  // namespace dcnet
