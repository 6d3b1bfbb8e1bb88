#pragma once

#include "percept/error.hpp"
#include "percept/nn.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace percept {

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double lr = 1e-3;
    double momentum = 0.9; ///< sgd only
    double weight_decay = 0.0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8; ///< adam only
    int batch_size = 64;

    static OptimizerConfig sgd(double lr, double momentum = 0.9, double weight_decay = 0.0)
    {
        OptimizerConfig c;
        c.kind = OptimizerKind::sgd;
        c.lr = lr;
        c.momentum = momentum;
        c.weight_decay = weight_decay;
        return c;
    }

    static OptimizerConfig adam(double lr = 1e-3)
    {
        OptimizerConfig c;
        c.kind = OptimizerKind::adam;
        c.lr = lr;
        return c;
    }

    void validate() const
    {
        require(lr > 0, Errc::invalid_argument, "learning rate must be positive");
        require(momentum >= 0 && momentum < 1, Errc::invalid_argument, "momentum must lie in [0, 1)");
        require(weight_decay >= 0, Errc::invalid_argument, "weight decay must be non-negative");
        require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && eps > 0, Errc::invalid_argument,
                "bad Adam constants");
        require(batch_size >= 1, Errc::invalid_argument, "batch size must be >= 1");
    }
};

/// Per-parameter optimizer memory. SGD keeps its velocity in `first`.
struct OptimizerState {
    std::vector<ParamGrad> first;
    std::vector<ParamGrad> second;
    long step = 0;
};

inline OptimizerState make_optimizer_state(const Network& net)
{
    OptimizerState s;
    s.first = zero_gradients(net).layers;
    s.second = s.first;
    return s;
}

namespace detail {

template <class F>
void for_each_param(Network& net, const Gradients& g, OptimizerState& s, F&& f)
{
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        Layer& l = net.layers[li];
        for (std::size_t k = 0; k < l.weights.size(); ++k)
            f(l.weights[k], g.layers[li].weights[k], s.first[li].weights[k], s.second[li].weights[k]);
        for (std::size_t k = 0; k < l.bias.size(); ++k)
            f(l.bias[k], g.layers[li].bias[k], s.first[li].bias[k], s.second[li].bias[k]);
    }
}

} // namespace detail

/**
 * One update.
 *   SGD:  v <- m v - lr (g + wd w);  w <- w + v
 *   Adam: bias-corrected first/second moments of (g + wd w)
 */
inline void optimizer_step(Network& net, const Gradients& grads, OptimizerState& state, const OptimizerConfig& cfg)
{
    cfg.validate();
    require(grads.layers.size() == net.layers.size(), Errc::shape_mismatch, "gradient does not match network");
    if (state.first.size() != net.layers.size())
        state = make_optimizer_state(net);
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        require(grads.layers[li].weights.size() == net.layers[li].weights.size() &&
                    grads.layers[li].bias.size() == net.layers[li].bias.size(),
                Errc::shape_mismatch, "gradient does not match layer " + std::to_string(li));
        for (double v : grads.layers[li].weights)
            if (!std::isfinite(v))
                fail(Errc::non_finite, "gradient of layer " + std::to_string(li));
        for (double v : grads.layers[li].bias)
            if (!std::isfinite(v))
                fail(Errc::non_finite, "gradient of layer " + std::to_string(li));
    }

    ++state.step;
    if (cfg.kind == OptimizerKind::sgd) {
        detail::for_each_param(net, grads, state, [&](double& w, double g, double& v, double&) {
            v = cfg.momentum * v - cfg.lr * (g + cfg.weight_decay * w);
            w += v;
        });
    } else {
        const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
        const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
        detail::for_each_param(net, grads, state, [&](double& w, double g, double& m, double& v) {
            const double gt = g + cfg.weight_decay * w;
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * gt;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * gt * gt;
            w -= cfg.lr * (m / c1) / (std::sqrt(v / c2) + cfg.eps);
        });
    }
    ++net.generation;
}

} // namespace percept
