#pragma once

#include "percept/error.hpp"
#include "percept/image.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace percept {

/**
 * Constants and shape of the SSIM family.
 *
 * C1 = (K1 L)^2, C2 = (K2 L)^2, C3 = C2 / 2. `alpha` weights the luminance
 * term, which only enters at the coarsest scale; `beta[j]` and `gamma[j]`
 * weight contrast and structure at scale j (0-based, finest first).
 */
struct MetricParams {
    int window_size = 11;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
    int scales = 1;
    double alpha = 1.0;
    std::vector<double> beta{1.0};
    std::vector<double> gamma{1.0};

    static MetricParams ssim(double dynamic_range = 1.0)
    {
        MetricParams p;
        p.dynamic_range = dynamic_range;
        return p;
    }

    static MetricParams ms_ssim(int scales = 5, double dynamic_range = 1.0)
    {
        MetricParams p;
        p.dynamic_range = dynamic_range;
        return p.with_scales(scales);
    }

    /// Set the scale count and reset all per-scale exponents to 1.
    MetricParams& with_scales(int m)
    {
        scales = m;
        beta.assign(static_cast<std::size_t>(std::max(m, 0)), 1.0);
        gamma.assign(static_cast<std::size_t>(std::max(m, 0)), 1.0);
        return *this;
    }

    MetricParams& with_window(int w)
    {
        window_size = w;
        return *this;
    }

    double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
    double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
    double c3() const { return c2() / 2.0; }

    void validate() const
    {
        require(window_size >= 3 && window_size % 2 == 1, Errc::invalid_argument,
                "window_size must be odd and >= 3, got " + std::to_string(window_size));
        require(scales >= 1, Errc::invalid_argument, "scales must be >= 1");
        require(k1 > 0 && k2 > 0 && dynamic_range > 0, Errc::invalid_argument, "K1, K2 and L must be positive");
        require(beta.size() == static_cast<std::size_t>(scales) && gamma.size() == static_cast<std::size_t>(scales),
                Errc::invalid_argument, "exponent arrays must have one entry per scale");
    }
};

/// Window statistics. sigma_xy is the biased window covariance.
struct LocalStats {
    double mu_x = 0, mu_y = 0;
    double sigma_x = 0, sigma_y = 0;
    double sigma_xy = 0;
};

struct SsimComponents {
    double luminance = 1, contrast = 1, structure = 1;
};

struct MetricResult {
    double value = 0;
    std::optional<Image> gradient; ///< d value / d y, same shape as the inputs
};

namespace detail {

/// Neumaier compensated summation.
class CompensatedSum {
public:
    void add(double v)
    {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0, comp_ = 0;
};

inline void check_pair(const Image& x, const Image& y)
{
    require(x.same_shape(y), Errc::dimension_mismatch,
            std::to_string(x.height()) + "x" + std::to_string(x.width()) + " vs " + std::to_string(y.height()) + "x" +
                std::to_string(y.width()));
}

/// base^e, refusing negative bases with non-integer exponents.
inline double checked_pow(double base, double e)
{
    if (e == 1.0)
        return base;
    if (e == 0.0)
        return 1.0;
    if (base < 0.0 && e != std::floor(e))
        fail(Errc::negative_base, "base " + std::to_string(base) + " with exponent " + std::to_string(e));
    return std::pow(base, e);
}

// Valid-region window means of a map (rows-w+1 by cols-w+1 result).
inline std::vector<double> box_mean(const std::vector<double>& src, int h, int w, int win)
{
    const int oh = h - win + 1, ow = w - win + 1;
    std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
    for (int r = 0; r < h; ++r) {
        const double* row = &src[static_cast<std::size_t>(r) * w];
        for (int c = 0; c < ow; ++c) {
            double s = 0;
            for (int t = 0; t < win; ++t)
                s += row[c + t];
            tmp[static_cast<std::size_t>(r) * ow + c] = s;
        }
    }
    const double inv = 1.0 / (static_cast<double>(win) * win);
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int r = 0; r < oh; ++r)
        for (int c = 0; c < ow; ++c) {
            double s = 0;
            for (int t = 0; t < win; ++t)
                s += tmp[static_cast<std::size_t>(r + t) * ow + c];
            out[static_cast<std::size_t>(r) * ow + c] = s * inv;
        }
    return out;
}

// Adjoint of the (unnormalized) valid box sum: every pixel collects the
// map values of all windows that contain it.
inline std::vector<double> box_adjoint(const std::vector<double>& map, int h, int w, int win)
{
    const int oh = h - win + 1, ow = w - win + 1;
    std::vector<double> tmp(static_cast<std::size_t>(oh) * w, 0.0);
    for (int r = 0; r < oh; ++r)
        for (int c = 0; c < w; ++c) {
            double s = 0;
            for (int j = std::max(0, c - win + 1); j <= std::min(c, ow - 1); ++j)
                s += map[static_cast<std::size_t>(r) * ow + j];
            tmp[static_cast<std::size_t>(r) * w + c] = s;
        }
    std::vector<double> out(static_cast<std::size_t>(h) * w, 0.0);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double s = 0;
            for (int i = std::max(0, r - win + 1); i <= std::min(r, oh - 1); ++i)
                s += tmp[static_cast<std::size_t>(i) * w + c];
            out[static_cast<std::size_t>(r) * w + c] = s;
        }
    return out;
}

struct StatMaps {
    int rows = 0, cols = 0;
    std::vector<double> mu_x, mu_y, var_x, var_y, cov;
};

inline StatMaps stat_maps(const Image& x, const Image& y, int win)
{
    const int h = x.height(), w = x.width();
    const std::size_t n = x.size();
    std::vector<double> xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    StatMaps m;
    m.rows = h - win + 1;
    m.cols = w - win + 1;
    m.mu_x = box_mean(x.data(), h, w, win);
    m.mu_y = box_mean(y.data(), h, w, win);
    m.var_x = box_mean(xx, h, w, win);
    m.var_y = box_mean(yy, h, w, win);
    m.cov = box_mean(xy, h, w, win);
    for (std::size_t i = 0; i < m.mu_x.size(); ++i) {
        m.var_x[i] -= m.mu_x[i] * m.mu_x[i];
        m.var_y[i] -= m.mu_y[i] * m.mu_y[i];
        m.cov[i] -= m.mu_x[i] * m.mu_y[i];
    }
    return m;
}

struct Exponents {
    bool luminance = true;
    double alpha = 1, beta = 1, gamma = 1;
};

// One window's contribution and its partials with respect to the y-side
// statistics (mu_y, var_y, cov). Since C3 = C2/2 the contrast-structure
// product collapses to (2 cov + C2) / (var_x + var_y + C2), which stays
// smooth when a window has zero variance.
struct WindowTerm {
    double value, d_mu, d_var, d_cov;
};

inline WindowTerm window_term(double mx, double my, double vx, double vy, double cxy, const MetricParams& p,
                              const Exponents& ex)
{
    const double c1 = p.c1(), c2 = p.c2(), c3 = p.c3();

    const double cs_den = vx + vy + c2;
    const double cs = (2.0 * cxy + c2) / cs_den;
    const double dcs_dvar = -cs / cs_den;
    const double dcs_dcov = 2.0 / cs_den;

    double P, dP_dvar, dP_dcov;
    if (ex.beta == ex.gamma) {
        P = checked_pow(cs, ex.beta);
        const double dP = ex.beta * checked_pow(cs, ex.beta - 1.0);
        dP_dvar = dP * dcs_dvar;
        dP_dcov = dP * dcs_dcov;
    } else {
        // C^b S^g = (CS)^b S^(g-b)
        const double sx = std::sqrt(std::max(vx, 0.0)), sy = std::sqrt(std::max(vy, 0.0));
        const double s_den = sx * sy + c3;
        const double s = (cxy + c3) / s_den;
        const double dsy_dvar = sy > 0.0 ? 0.5 / sy : 0.0;
        const double ds_dvar = -s / s_den * sx * dsy_dvar;
        const double ds_dcov = 1.0 / s_den;
        const double e = ex.gamma - ex.beta;
        const double A = checked_pow(cs, ex.beta), dA = ex.beta * checked_pow(cs, ex.beta - 1.0);
        const double B = checked_pow(s, e), dB = e * checked_pow(s, e - 1.0);
        P = A * B;
        dP_dvar = dA * dcs_dvar * B + A * dB * ds_dvar;
        dP_dcov = dA * dcs_dcov * B + A * dB * ds_dcov;
    }

    if (!ex.luminance)
        return {P, 0.0, dP_dvar, dP_dcov};

    const double l_den = mx * mx + my * my + c1;
    const double l = (2.0 * mx * my + c1) / l_den;
    const double dl_dmu = 2.0 * (mx - l * my) / l_den;
    const double L = checked_pow(l, ex.alpha);
    const double dL = ex.alpha * checked_pow(l, ex.alpha - 1.0);
    return {L * P, dL * dl_dmu * P, L * dP_dvar, L * dP_dcov};
}

struct ScaleEval {
    double factor = 0;
    std::vector<double> grad; // d factor / d y, empty unless requested
};

// Mean of the per-window map over the valid region of one scale.
inline ScaleEval eval_scale(const Image& x, const Image& y, const MetricParams& p, const Exponents& ex,
                            bool want_grad)
{
    const int win = p.window_size;
    const StatMaps m = stat_maps(x, y, win);
    const std::size_t n = m.mu_x.size();
    const double inv_n = 1.0 / static_cast<double>(n);

    CompensatedSum total;
    std::vector<double> a, b, c;
    if (want_grad) {
        a.resize(n);
        b.resize(n);
        c.resize(n);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const WindowTerm t = window_term(m.mu_x[i], m.mu_y[i], m.var_x[i], m.var_y[i], m.cov[i], p, ex);
        total.add(t.value);
        if (want_grad) {
            // d/dy_q of the window stats: mu 1/N, var 2(y_q - mu_y)/N, cov (x_q - mu_x)/N
            a[i] = (t.d_mu - 2.0 * t.d_var * m.mu_y[i] - t.d_cov * m.mu_x[i]) * inv_n;
            b[i] = 2.0 * t.d_var * inv_n;
            c[i] = t.d_cov * inv_n;
        }
    }

    ScaleEval out;
    out.factor = total.value() * inv_n;
    if (want_grad) {
        const int h = x.height(), w = x.width();
        const auto A = box_adjoint(a, h, w, win);
        const auto B = box_adjoint(b, h, w, win);
        const auto C = box_adjoint(c, h, w, win);
        const double inv_win = 1.0 / (static_cast<double>(win) * win);
        out.grad.resize(x.size());
        for (std::size_t q = 0; q < x.size(); ++q)
            out.grad[q] = (A[q] + y[q] * B[q] + x[q] * C[q]) * inv_win;
    }
    return out;
}

} // namespace detail

/// Largest scale count M such that the (M-1)-times downsampled image still
/// holds one full window. Zero if even the full-resolution image is too small.
inline int max_feasible_scales(int height, int width, int window)
{
    int m = 0;
    while (height >= window && width >= window) {
        ++m;
        if (height < 2 || width < 2)
            break;
        height /= 2;
        width /= 2;
    }
    return m;
}

/// Statistics of the window centered at (row, col).
inline LocalStats local_stats(const Image& x, const Image& y, int row, int col, const MetricParams& p)
{
    detail::check_pair(x, y);
    p.validate();
    const int half = p.window_size / 2;
    require(row - half >= 0 && col - half >= 0 && row + half < x.height() && col + half < x.width(),
            Errc::out_of_range, "window at (" + std::to_string(row) + "," + std::to_string(col) + ") leaves the image");
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (int r = row - half; r <= row + half; ++r)
        for (int c = col - half; c <= col + half; ++c) {
            const double a = x(r, c), b = y(r, c);
            sx += a;
            sy += b;
            sxx += a * a;
            syy += b * b;
            sxy += a * b;
        }
    const double n = static_cast<double>(p.window_size) * p.window_size;
    LocalStats s;
    s.mu_x = sx / n;
    s.mu_y = sy / n;
    s.sigma_x = std::sqrt(std::max(sxx / n - s.mu_x * s.mu_x, 0.0));
    s.sigma_y = std::sqrt(std::max(syy / n - s.mu_y * s.mu_y, 0.0));
    s.sigma_xy = sxy / n - s.mu_x * s.mu_y;
    return s;
}

/// Luminance, contrast and structure comparisons of one window.
inline SsimComponents ssim_components(const LocalStats& s, const MetricParams& p)
{
    const double c1 = p.c1(), c2 = p.c2(), c3 = p.c3();
    SsimComponents out;
    out.luminance = (2 * s.mu_x * s.mu_y + c1) / (s.mu_x * s.mu_x + s.mu_y * s.mu_y + c1);
    out.contrast = (2 * s.sigma_x * s.sigma_y + c2) / (s.sigma_x * s.sigma_x + s.sigma_y * s.sigma_y + c2);
    out.structure = (s.sigma_xy + c3) / (s.sigma_x * s.sigma_y + c3);
    return out;
}

namespace detail {

inline MetricResult ssim_impl(const Image& x, const Image& y, const MetricParams& p, bool want_grad)
{
    check_pair(x, y);
    p.validate();
    require(std::min(x.height(), x.width()) >= p.window_size, Errc::too_small,
            "image " + std::to_string(x.height()) + "x" + std::to_string(x.width()) + " smaller than window " +
                std::to_string(p.window_size));
    const Exponents ex{true, p.alpha, p.beta.front(), p.gamma.front()};
    ScaleEval e = eval_scale(x, y, p, ex, want_grad);
    MetricResult r{e.factor, std::nullopt};
    if (want_grad)
        r.gradient = Image(x.height(), x.width(), std::move(e.grad), y.range());
    return r;
}

inline MetricResult ms_ssim_impl(const Image& x, const Image& y, const MetricParams& p, bool want_grad,
                                 std::vector<double>* factors_out = nullptr)
{
    check_pair(x, y);
    p.validate();
    const int feasible = max_feasible_scales(x.height(), x.width(), p.window_size);
    require(feasible >= p.scales, Errc::too_small,
            "image " + std::to_string(x.height()) + "x" + std::to_string(x.width()) + " supports at most M=" +
                std::to_string(feasible) + " with window " + std::to_string(p.window_size) + ", requested M=" +
                std::to_string(p.scales));

    const int m = p.scales;
    std::vector<Image> xs{x}, ys{y};
    for (int j = 1; j < m; ++j) {
        xs.push_back(downsample2(xs.back()));
        ys.push_back(downsample2(ys.back()));
    }

    std::vector<ScaleEval> evals;
    evals.reserve(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        const Exponents ex{j == m - 1, p.alpha, p.beta[uj], p.gamma[uj]};
        evals.push_back(eval_scale(xs[uj], ys[uj], p, ex, want_grad));
    }

    double value = 1.0;
    for (const auto& e : evals)
        value *= e.factor;
    if (factors_out) {
        factors_out->clear();
        for (const auto& e : evals)
            factors_out->push_back(e.factor);
    }
    MetricResult r{value, std::nullopt};
    if (!want_grad)
        return r;

    // d value / d F_j is the product of the other factors.
    std::vector<double> prefix(static_cast<std::size_t>(m) + 1, 1.0), suffix(static_cast<std::size_t>(m) + 1, 1.0);
    for (int j = 0; j < m; ++j)
        prefix[j + 1] = prefix[j] * evals[j].factor;
    for (int j = m - 1; j >= 0; --j)
        suffix[j] = suffix[j + 1] * evals[j].factor;

    Image acc;
    for (int j = m - 1; j >= 0; --j) {
        const auto uj = static_cast<std::size_t>(j);
        const double others = prefix[uj] * suffix[uj + 1];
        std::vector<double> g = std::move(evals[uj].grad);
        for (double& v : g)
            v *= others;
        if (!acc.empty()) {
            const Image up = downsample2_adjoint(acc, xs[uj].height(), xs[uj].width());
            for (std::size_t q = 0; q < g.size(); ++q)
                g[q] += up[q];
        }
        acc = Image(xs[uj].height(), xs[uj].width(), std::move(g), y.range());
    }
    r.gradient = std::move(acc);
    return r;
}

} // namespace detail

/// Mean over valid window centers of I^alpha C^beta S^gamma.
inline MetricResult ssim(const Image& x, const Image& y, const MetricParams& p = MetricParams::ssim())
{
    return detail::ssim_impl(x, y, p, false);
}

inline MetricResult ssim_grad(const Image& x, const Image& y, const MetricParams& p = MetricParams::ssim())
{
    return detail::ssim_impl(x, y, p, true);
}

/**
 * Multi-scale SSIM over p.scales pyramid levels.
 *
 * Scale j < M contributes the mean of C^beta_j S^gamma_j; the coarsest scale
 * contributes the mean of I^alpha C^beta_M S^gamma_M. The value is the
 * product of the per-scale means, so M = 1 is exactly ssim().
 */
inline MetricResult ms_ssim(const Image& x, const Image& y, const MetricParams& p = MetricParams::ms_ssim())
{
    return detail::ms_ssim_impl(x, y, p, false);
}

inline MetricResult ms_ssim_grad(const Image& x, const Image& y, const MetricParams& p = MetricParams::ms_ssim())
{
    return detail::ms_ssim_impl(x, y, p, true);
}

/// Per-scale factors of ms_ssim, finest first.
inline std::vector<double> ms_ssim_factors(const Image& x, const Image& y, const MetricParams& p)
{
    std::vector<double> f;
    detail::ms_ssim_impl(x, y, p, false, &f);
    return f;
}

} // namespace percept
