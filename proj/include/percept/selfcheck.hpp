#pragma once

#include "percept/elvae.hpp"
#include "percept/gradcheck.hpp"
#include "percept/nn.hpp"
#include "percept/rng.hpp"

#include <functional>
#include <string>
#include <vector>

namespace percept {

/// Finite-difference suite behind `percept grad-check`.
struct GradCheckOptions {
    std::uint64_t seed = 0;
    int pairs = 10;
    std::vector<int> ssim_sizes{16, 24, 32};
    int ms_size = 176;
    int ms_scales = 3;
    int ms_pixels = 200;
    double eps = 1e-6;
    double ssim_tolerance = 1e-5;
    double ms_ssim_tolerance = 1e-4;
    double pixel_loss_tolerance = 1e-5;
    double layer_tolerance = 1e-6;
    double elvae_tolerance = 1e-5;
    std::string corrupt; ///< test hook: name of a check whose analytic gradient is perturbed by 1%

    void validate() const
    {
        require(pairs >= 1, Errc::config, "grad_check.pairs must be >= 1");
        require(!ssim_sizes.empty(), Errc::config, "grad_check.ssim_sizes is empty");
        for (int s : ssim_sizes)
            require(s >= 11, Errc::config, "grad_check.ssim_sizes entries must be >= 11");
        require(ms_scales >= 1 && max_feasible_scales(ms_size, ms_size, 11) >= ms_scales, Errc::config,
                "grad_check.ms_size too small for ms_scales");
        require(ms_pixels >= 1 && ms_pixels <= ms_size * ms_size, Errc::config, "grad_check.ms_pixels out of range");
        require(eps > 0, Errc::config, "grad_check.eps must be positive");
    }
};

struct CheckResult {
    std::string name;
    double worst = 0; ///< worst relative error over all trials
    double tolerance = 0;

    bool pass() const { return worst < tolerance; }
};

namespace detail {

// Reference image in [0,1] and a noisy partner (deliberately not clipped).
inline std::pair<Image, Image> check_pair(int h, int w, Rng& rng)
{
    Image x(h, w), y(h, w);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.uniform();
        y[i] = x[i] + 0.2 * rng.uniform(-1, 1);
    }
    return {x, y};
}

inline void maybe_corrupt(const std::string& name, const GradCheckOptions& o, std::vector<double>& g)
{
    if (o.corrupt == name)
        for (double& v : g)
            v *= 1.01;
}

// 0.5 |f(in) - target|^2 and its backprop gradient (parameters then input).
inline double layer_check(Network net, const std::vector<double>& in, Rng& rng, double eps, const std::string& name,
                          const GradCheckOptions& o)
{
    std::vector<double> target(net.output_shape().size());
    for (double& t : target)
        t = rng.uniform(-1, 1);
    auto objective = [&](const std::vector<double>& v) {
        const auto out = forward(net, v).output;
        double s = 0;
        for (std::size_t i = 0; i < out.size(); ++i)
            s += 0.5 * (out[i] - target[i]) * (out[i] - target[i]);
        return s;
    };
    const ForwardResult fr = forward(net, in);
    std::vector<double> gout(fr.output.size());
    for (std::size_t i = 0; i < gout.size(); ++i)
        gout[i] = fr.output[i] - target[i];
    const Gradients g = backward(net, fr.tape, gout);
    std::vector<double> analytic = flatten(g);
    analytic.insert(analytic.end(), g.input.begin(), g.input.end());
    maybe_corrupt(name, o, analytic);

    std::vector<double> fd;
    for (double* p : parameter_pointers(net)) {
        const double saved = *p;
        *p = saved + eps;
        const double plus = objective(in);
        *p = saved - eps;
        const double minus = objective(in);
        *p = saved;
        fd.push_back((plus - minus) / (2 * eps));
    }
    std::vector<double> probe = in;
    for (std::size_t i = 0; i < probe.size(); ++i)
        fd.push_back(central_difference(objective, probe, i, eps));
    return max_relative_error(analytic, fd);
}

inline std::vector<double> random_input(std::size_t n, Rng& rng)
{
    std::vector<double> v(n);
    for (double& x : v)
        x = rng.uniform(-1, 1);
    return v;
}

} // namespace detail

/// Every check runs `pairs` seeded trials and keeps the worst error.
inline std::vector<CheckResult> run_grad_checks(const GradCheckOptions& o,
                                                const std::function<void(const CheckResult&)>& on_result = {})
{
    o.validate();
    std::vector<CheckResult> out;
    auto record = [&](CheckResult r) {
        if (on_result)
            on_result(r);
        out.push_back(std::move(r));
    };

    for (int size : o.ssim_sizes) {
        const std::string name = "ssim-" + std::to_string(size);
        CheckResult r{name, 0, o.ssim_tolerance};
        for (int t = 0; t < o.pairs; ++t) {
            Rng rng(o.seed, name, static_cast<std::uint64_t>(t));
            const auto [x, y] = detail::check_pair(size, size, rng);
            const MetricParams p = MetricParams::ssim();
            const Image g = metric_gradient(MetricId::ssim, x, y, p);
            std::vector<double> a(g.pixels().begin(), g.pixels().end());
            detail::maybe_corrupt(name, o, a);
            const Image fd = fd_gradient(MetricId::ssim, x, y, p, o.eps);
            r.worst = std::max(r.worst, max_relative_error(a, {fd.pixels().begin(), fd.pixels().end()}));
        }
        record(r);
    }

    {
        const std::string name = "ms-ssim-" + std::to_string(o.ms_size);
        CheckResult r{name, 0, o.ms_ssim_tolerance};
        const MetricParams p = MetricParams::ms_ssim(o.ms_scales);
        for (int t = 0; t < o.pairs; ++t) {
            Rng rng(o.seed, name, static_cast<std::uint64_t>(t));
            const auto [x, y] = detail::check_pair(o.ms_size, o.ms_size, rng);
            std::vector<std::size_t> pix;
            for (int k = 0; k < o.ms_pixels; ++k)
                pix.push_back(rng.below(y.size()));
            const Image g = metric_gradient(MetricId::ms_ssim, x, y, p);
            std::vector<double> a;
            for (std::size_t q : pix)
                a.push_back(g[q]);
            detail::maybe_corrupt(name, o, a);
            r.worst = std::max(r.worst, max_relative_error(a, fd_gradient_at(MetricId::ms_ssim, x, y, p, o.eps, pix)));
        }
        record(r);
    }

    for (MetricId m : {MetricId::mse, MetricId::mae}) {
        const std::string name = m == MetricId::mse ? "mse" : "mae";
        CheckResult r{name, 0, o.pixel_loss_tolerance};
        for (int t = 0; t < o.pairs; ++t) {
            Rng rng(o.seed, name, static_cast<std::uint64_t>(t));
            const auto [x, y] = detail::check_pair(12, 12, rng);
            const MetricParams p = MetricParams::ssim();
            const Image g = metric_gradient(m, x, y, p);
            std::vector<double> a(g.pixels().begin(), g.pixels().end());
            detail::maybe_corrupt(name, o, a);
            const Image fd = fd_gradient(m, x, y, p, o.eps);
            r.worst = std::max(r.worst, max_relative_error(a, {fd.pixels().begin(), fd.pixels().end()}));
        }
        record(r);
    }

    struct LayerCase {
        std::string name;
        Shape input;
        std::vector<LayerSpec> layers;
    };
    const std::vector<LayerCase> cases{
        {"layer-dense", Shape{6, 1, 1}, {LayerSpec::dense(5)}},
        {"layer-conv2d", Shape{2, 7, 7}, {LayerSpec::conv2d(3, 3, 2)}},
        {"layer-upsample2", Shape{2, 3, 3}, {LayerSpec::upsample2()}},
        {"layer-relu", Shape{1, 4, 4}, {LayerSpec::relu()}},
        {"layer-tanh", Shape{1, 4, 4}, {LayerSpec::tanh()}},
        {"network-encoder-decoder",
         Shape{1, 8, 8},
         {LayerSpec::conv2d(3, 3, 2), LayerSpec::relu(), LayerSpec::dense(6), LayerSpec::tanh(), LayerSpec::dense(16),
          LayerSpec::reshape(Shape{1, 4, 4}), LayerSpec::upsample2(), LayerSpec::conv2d(1, 3), LayerSpec::tanh()}},
    };
    for (const auto& c : cases) {
        CheckResult r{c.name, 0, o.layer_tolerance};
        for (int t = 0; t < o.pairs; ++t) {
            Rng rng(o.seed, c.name, static_cast<std::uint64_t>(t));
            const Network net = init_network(c.input, c.layers, rng.next());
            const auto in = detail::random_input(c.input.size(), rng);
            r.worst = std::max(r.worst, detail::layer_check(net, in, rng, o.eps, c.name, o));
        }
        record(r);
    }

    {
        // straight-through: the backward map of binarize must be the identity
        const std::string name = "layer-binarize";
        CheckResult r{name, 0, o.layer_tolerance};
        const Network net = init_network(Shape{1, 4, 4}, {LayerSpec::binarize_ste()}, 1);
        for (int t = 0; t < o.pairs; ++t) {
            Rng rng(o.seed, name, static_cast<std::uint64_t>(t));
            const auto in = detail::random_input(16, rng);
            const ForwardResult fr = forward(net, in, Mode::train);
            const auto gout = detail::random_input(16, rng);
            std::vector<double> a = backward(net, fr.tape, gout).input;
            detail::maybe_corrupt(name, o, a);
            r.worst = std::max(r.worst, max_relative_error(a, gout));
        }
        record(r);
    }

    {
        const std::string name = "elvae-objective";
        CheckResult r{name, 0, o.elvae_tolerance};
        for (int t = 0; t < o.pairs; ++t) {
            Rng rng(o.seed, name, static_cast<std::uint64_t>(t));
            ElVaeConfig cfg;
            cfg.latent_dim = 2;
            cfg.C = 10;
            cfg.loss = LossFunction::make(LossKind::mse, 2.0);
            Network enc = init_network(Shape{1, 4, 4}, {LayerSpec::dense(6), LayerSpec::tanh(), LayerSpec::dense(4)},
                                       rng.next());
            Network dec = init_network(Shape{2, 1, 1}, {LayerSpec::dense(16), LayerSpec::tanh()}, rng.next());
            Image x(4, 4, Range::signed_);
            for (double& v : x.pixels())
                v = rng.uniform(-1, 1);
            const auto eps = draw_eps(rng, 2, 2);
            const ElVaeLoss l = elvae_loss(x, enc, dec, cfg, eps);
            std::vector<double> a = flatten(l.encoder);
            const auto d = flatten(l.decoder);
            a.insert(a.end(), d.begin(), d.end());
            detail::maybe_corrupt(name, o, a);
            std::vector<double> fd;
            for (Network* net : {&enc, &dec})
                for (double* p : parameter_pointers(*net)) {
                    const double saved = *p;
                    *p = saved + o.eps;
                    const double plus = elvae_loss(x, enc, dec, cfg, eps, false).value;
                    *p = saved - o.eps;
                    const double minus = elvae_loss(x, enc, dec, cfg, eps, false).value;
                    *p = saved;
                    fd.push_back((plus - minus) / (2 * o.eps));
                }
            r.worst = std::max(r.worst, max_relative_error(a, fd));
        }
        record(r);
    }
    return out;
}

/// Names accepted by GradCheckOptions::corrupt.
inline std::vector<std::string> grad_check_names(const GradCheckOptions& o)
{
    std::vector<std::string> n;
    for (int s : o.ssim_sizes)
        n.push_back("ssim-" + std::to_string(s));
    n.push_back("ms-ssim-" + std::to_string(o.ms_size));
    for (const char* s : {"mse", "mae", "layer-dense", "layer-conv2d", "layer-upsample2", "layer-relu", "layer-tanh",
                          "network-encoder-decoder", "layer-binarize", "elvae-objective"})
        n.emplace_back(s);
    return n;
}

} // namespace percept
