#pragma once

#include "percept/image.hpp"
#include "percept/losses.hpp"
#include "percept/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string_view>
#include <vector>

namespace percept {

enum class MetricId { ssim, ms_ssim, mse, mae };

inline MetricId parse_metric_id(std::string_view s)
{
    if (s == "ssim")
        return MetricId::ssim;
    if (s == "ms-ssim")
        return MetricId::ms_ssim;
    if (s == "mse")
        return MetricId::mse;
    if (s == "mae")
        return MetricId::mae;
    fail(Errc::invalid_argument, "unknown metric '" + std::string(s) + "'");
}

inline double metric_value(MetricId m, const Image& x, const Image& y, const MetricParams& p)
{
    switch (m) {
    case MetricId::ssim: return ssim(x, y, p).value;
    case MetricId::ms_ssim: return ms_ssim(x, y, p).value;
    case MetricId::mse: return mse(x, y).value;
    case MetricId::mae: return mae(x, y).value;
    }
    return 0.0;
}

inline Image metric_gradient(MetricId m, const Image& x, const Image& y, const MetricParams& p)
{
    switch (m) {
    case MetricId::ssim: return *ssim_grad(x, y, p).gradient;
    case MetricId::ms_ssim: return *ms_ssim_grad(x, y, p).gradient;
    case MetricId::mse: return mse(x, y).gradient;
    case MetricId::mae: return mae(x, y).gradient;
    }
    return {};
}

/// Central difference (f(v + eps) - f(v - eps)) / 2eps in coordinate i of v.
template <class F, class Vec>
double central_difference(F&& f, Vec& v, std::size_t i, double eps)
{
    const double saved = v[i];
    v[i] = saved + eps;
    const double plus = f(v);
    v[i] = saved - eps;
    const double minus = f(v);
    v[i] = saved;
    return (plus - minus) / (2.0 * eps);
}

/// Finite-difference gradient of a metric with respect to y at the given
/// flat pixel indices.
inline std::vector<double> fd_gradient_at(MetricId m, const Image& x, const Image& y, const MetricParams& p,
                                          double eps, const std::vector<std::size_t>& pixels)
{
    Image probe = y;
    std::vector<double> out;
    out.reserve(pixels.size());
    auto f = [&](const Image& yy) { return metric_value(m, x, yy, p); };
    for (std::size_t q : pixels)
        out.push_back(central_difference(f, probe, q, eps));
    return out;
}

/// Finite-difference gradient image over every pixel.
inline Image fd_gradient(MetricId m, const Image& x, const Image& y, const MetricParams& p, double eps)
{
    std::vector<std::size_t> all(y.size());
    for (std::size_t i = 0; i < all.size(); ++i)
        all[i] = i;
    return Image(y.height(), y.width(), fd_gradient_at(m, x, y, p, eps, all), y.range());
}

/// max |a - b| / max |b|: error relative to the reference gradient's scale.
inline double max_relative_error(const std::vector<double>& analytic, const std::vector<double>& reference)
{
    double num = 0, den = 0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        num = std::max(num, std::abs(analytic[i] - reference[i]));
        den = std::max(den, std::abs(reference[i]));
    }
    if (den == 0.0)
        return num;
    return num / den;
}

} // namespace percept
