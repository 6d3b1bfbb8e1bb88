#pragma once

#include "percept/error.hpp"
#include "percept/image.hpp"
#include "percept/metrics.hpp"
#include "percept/rng.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace percept {

enum class LossKind { mse, mae, neg_ssim, neg_ms_ssim };

/// Stable identifiers used in config files and CLI flags.
inline std::string_view loss_name(LossKind k)
{
    switch (k) {
    case LossKind::mse: return "mse";
    case LossKind::mae: return "mae";
    case LossKind::neg_ssim: return "ssim";
    case LossKind::neg_ms_ssim: return "ms-ssim";
    }
    return "?";
}

inline LossKind parse_loss_kind(std::string_view s)
{
    if (s == "mse")
        return LossKind::mse;
    if (s == "mae")
        return LossKind::mae;
    if (s == "ssim")
        return LossKind::neg_ssim;
    if (s == "ms-ssim")
        return LossKind::neg_ms_ssim;
    fail(Errc::invalid_argument, "unknown loss '" + std::string(s) + "' (expected mse, mae, ssim, ms-ssim)");
}

/// A training loss; `scale` is the normalization divisor.
struct LossFunction {
    LossKind kind = LossKind::mse;
    MetricParams params = MetricParams::ssim();
    double scale = 1.0;

    static LossFunction make(LossKind k, double dynamic_range = 1.0)
    {
        LossFunction f;
        f.kind = k;
        f.params = k == LossKind::neg_ms_ssim ? MetricParams::ms_ssim(5, dynamic_range)
                                              : MetricParams::ssim(dynamic_range);
        return f;
    }
};

struct LossValue {
    double value = 0;
    Image gradient; ///< d value / d y
};

/// Mean squared error; gradient 2(y - x)/N.
inline LossValue mse(const Image& x, const Image& y)
{
    detail::check_pair(x, y);
    const double n = static_cast<double>(x.size());
    Image g(y.height(), y.width(), y.range());
    detail::CompensatedSum s;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = y[i] - x[i];
        s.add(d * d);
        g[i] = 2.0 * d / n;
    }
    return {s.value() / n, std::move(g)};
}

/// Mean absolute error; subgradient sign(y - x)/N with sign(0) = 0.
inline LossValue mae(const Image& x, const Image& y)
{
    detail::check_pair(x, y);
    const double n = static_cast<double>(x.size());
    Image g(y.height(), y.width(), y.range());
    detail::CompensatedSum s;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = y[i] - x[i];
        s.add(std::abs(d));
        g[i] = (d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0) / n;
    }
    return {s.value() / n, std::move(g)};
}

/// 10 log10(L^2 / mse). Identical images give +infinity.
inline double psnr(const Image& x, const Image& y, double dynamic_range = 1.0)
{
    require(dynamic_range > 0, Errc::invalid_argument, "dynamic range must be positive");
    detail::check_pair(x, y);
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        s += (y[i] - x[i]) * (y[i] - x[i]);
    if (s == 0.0)
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(dynamic_range * dynamic_range / (s / static_cast<double>(x.size())));
}

/// Unnormalized loss of one pair (scale ignored), with gradient when requested.
inline LossValue raw_loss(const LossFunction& f, const Image& x, const Image& y, bool want_grad = true)
{
    switch (f.kind) {
    case LossKind::mse: return mse(x, y);
    case LossKind::mae: return mae(x, y);
    case LossKind::neg_ssim:
    case LossKind::neg_ms_ssim: {
        // SSIM assumes non-negative intensities: signed images are measured
        // from the bottom of their range. The shift leaves the gradient as is.
        const double lo = range_lo(x.range());
        Image xs = x, ys = y;
        if (lo != 0.0) {
            for (double& v : xs.pixels())
                v -= lo;
            for (double& v : ys.pixels())
                v -= lo;
        }
        MetricResult r;
        if (f.kind == LossKind::neg_ssim)
            r = want_grad ? ssim_grad(xs, ys, f.params) : ssim(xs, ys, f.params);
        else
            r = want_grad ? ms_ssim_grad(xs, ys, f.params) : ms_ssim(xs, ys, f.params);
        LossValue out;
        out.value = -r.value;
        if (want_grad) {
            out.gradient = std::move(*r.gradient);
            for (double& v : out.gradient.pixels())
                v = -v;
        }
        return out;
    }
    }
    fail(Errc::invalid_argument, "unknown loss kind");
}

/// Loss of one pair divided by the function's scale.
inline LossValue eval_loss(const LossFunction& f, const Image& x, const Image& y, bool want_grad = true)
{
    require(f.scale > 0, Errc::invalid_argument, "loss scale must be positive");
    LossValue v = raw_loss(f, x, y, want_grad);
    v.value /= f.scale;
    if (want_grad)
        for (double& g : v.gradient.pixels())
            g /= f.scale;
    return v;
}

struct BatchLoss {
    double value = 0;
    std::vector<Image> gradients;
};

/// Sum of per-pair losses divided by scale (for the SSIM kinds this is
/// -sum SSIM(X_i, Y_i) / scale).
inline BatchLoss batch_loss(const LossFunction& f, const std::vector<Image>& X, const std::vector<Image>& Y)
{
    require(X.size() == Y.size(), Errc::dimension_mismatch,
            "batch sizes differ: " + std::to_string(X.size()) + " vs " + std::to_string(Y.size()));
    BatchLoss out;
    out.gradients.reserve(X.size());
    for (std::size_t i = 0; i < X.size(); ++i) {
        LossValue v = eval_loss(f, X[i], Y[i]);
        out.value += v.value;
        out.gradients.push_back(std::move(v.gradient));
    }
    return out;
}

/// Expected loss over `n_pairs` pairs drawn with replacement. The SSIM kinds
/// report the magnitude so the scale stays positive.
inline double estimate_loss_scale(const LossFunction& f, const std::vector<Image>& dataset, int n_pairs = 10000,
                                  std::uint64_t seed = 0)
{
    require(!dataset.empty(), Errc::invalid_argument, "dataset is empty");
    require(n_pairs >= 1, Errc::invalid_argument, "n_pairs must be positive");
    for (const auto& img : dataset)
        require(img.same_shape(dataset.front()), Errc::dimension_mismatch, "dataset images differ in size");
    Rng rng(seed, "loss-scale");
    detail::CompensatedSum s;
    const auto n = static_cast<std::uint64_t>(dataset.size());
    for (int k = 0; k < n_pairs; ++k) {
        const auto i = rng.below(n), j = rng.below(n);
        s.add(raw_loss(f, dataset[i], dataset[j], false).value);
    }
    const double m = std::abs(s.value() / n_pairs);
    if (!(m > 0.0) || !std::isfinite(m))
        fail(Errc::degenerate, "expected " + std::string(loss_name(f.kind)) + " over random pairs is zero");
    return m;
}

} // namespace percept
