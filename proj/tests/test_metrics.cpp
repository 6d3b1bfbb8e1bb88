#include "oracles.hpp"

#include <percept/gradcheck.hpp>
#include <percept/metrics.hpp>

#include <gtest/gtest.h>

using namespace percept;

namespace {

std::vector<std::size_t> sample_pixels(std::size_t n, std::size_t count, std::uint64_t seed)
{
    Rng rng(seed, "fd-pixels");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(rng.below(n));
    return out;
}

Image flip_pixel(Image y, int r, int c, double d)
{
    y(r, c) = std::min(1.0, y(r, c) + d);
    return y;
}

} // namespace

TEST(LocalStats, ConstantWindow)
{
    const Image x(11, 11, Range::unit, 0.3);
    const LocalStats s = local_stats(x, x, 5, 5, MetricParams::ssim());
    EXPECT_NEAR(s.mu_x, 0.3, 1e-15);
    EXPECT_NEAR(s.mu_y, 0.3, 1e-15);
    EXPECT_NEAR(s.sigma_x, 0.0, 1e-7);
    EXPECT_NEAR(s.sigma_y, 0.0, 1e-7);
    EXPECT_NEAR(s.sigma_xy, 0.0, 1e-15);
}

TEST(LocalStats, AffineIdentity)
{
    const Image x = oracle::random_image(15, 15, 2);
    Image y = x;
    for (double& v : y.pixels())
        v = 1.0 - v;
    const LocalStats s = local_stats(x, y, 7, 7, MetricParams::ssim());
    EXPECT_NEAR(s.mu_y, 1.0 - s.mu_x, 1e-12);
    EXPECT_NEAR(s.sigma_xy, -s.sigma_x * s.sigma_x, 1e-12);
    EXPECT_LE(std::abs(s.sigma_xy), s.sigma_x * s.sigma_y + 1e-9);
}

TEST(LocalStats, MatchesTwoPassOracle)
{
    const auto [x, y] = oracle::random_pair(20, 20, 4);
    const LocalStats s = local_stats(x, y, 9, 12, MetricParams::ssim());
    const auto o = oracle::window_stats(x, y, 4, 7, 11);
    EXPECT_NEAR(s.mu_x, o.mx, 1e-12);
    EXPECT_NEAR(s.mu_y, o.my, 1e-12);
    EXPECT_NEAR(s.sigma_x, std::sqrt(o.vx), 1e-12);
    EXPECT_NEAR(s.sigma_y, std::sqrt(o.vy), 1e-12);
    EXPECT_NEAR(s.sigma_xy, o.cxy, 1e-12);
}

TEST(LocalStats, Errors)
{
    const Image x(12, 12);
    EXPECT_THROW(local_stats(x, x, 4, 6, MetricParams::ssim()), Error);
    EXPECT_THROW(local_stats(x, Image(12, 11), 6, 6, MetricParams::ssim()), Error);
}

TEST(SsimComponents, IdenticalStats)
{
    const LocalStats s{0.4, 0.4, 0.1, 0.1, 0.01};
    const auto c = ssim_components(s, MetricParams::ssim());
    EXPECT_DOUBLE_EQ(c.luminance, 1.0);
    EXPECT_DOUBLE_EQ(c.contrast, 1.0);
    EXPECT_DOUBLE_EQ(c.structure, 1.0);
}

TEST(SsimComponents, OppositeMeans)
{
    const MetricParams p = MetricParams::ssim();
    const auto c = ssim_components(LocalStats{0.5, -0.5, 0, 0, 0}, p);
    const double c1 = 1e-4;
    EXPECT_NEAR(c.luminance, (-0.5 + c1) / (0.5 + c1), 1e-15);
    EXPECT_LT(c.luminance, -0.999);
}

TEST(SsimComponents, DoubleSigma)
{
    const auto c = ssim_components(LocalStats{0.5, 0.5, 1e3, 2e3, 0}, MetricParams::ssim());
    EXPECT_NEAR(c.contrast, 0.8, 1e-9);
}

TEST(Ssim, Identity)
{
    const Image x = oracle::random_image(32, 32, 1);
    EXPECT_NEAR(ssim(x, x).value, 1.0, 1e-12);
}

TEST(Ssim, StrictMaximum)
{
    const Image x = oracle::random_image(32, 32, 1);
    EXPECT_LT(ssim(x, flip_pixel(x, 10, 10, 0.2)).value, 1.0);
}

TEST(Ssim, MatchesWindowedOracle)
{
    const Image x = oracle::random_image(32, 32, 5);
    Image y = x;
    for (double& v : y.pixels())
        v = 1.0 - v;
    EXPECT_NEAR(ssim(x, y).value, oracle::ssim(x, y), 1e-12);
    const auto [a, b] = oracle::random_pair(24, 29, 6);
    EXPECT_NEAR(ssim(a, b).value, oracle::ssim(a, b), 1e-12);
    MetricParams p = MetricParams::ssim(2.0).with_window(7);
    EXPECT_NEAR(ssim(a, b, p).value, oracle::ssim(a, b, 7, 2.0), 1e-12);
}

TEST(Ssim, SymmetryAndBound)
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto [x, y] = oracle::random_pair(20, 20, seed, 0.5);
        const double a = ssim(x, y).value, b = ssim(y, x).value;
        EXPECT_NEAR(a, b, 1e-12);
        EXPECT_LE(a, 1.0);
    }
}

TEST(Ssim, ShiftOnlyChangesLuminance)
{
    const auto [x, y] = oracle::random_pair(16, 16, 9, 0.1);
    Image xs = x, ys = y;
    for (double& v : xs.pixels())
        v += 0.3;
    for (double& v : ys.pixels())
        v += 0.3;
    const MetricParams p = MetricParams::ssim();
    const auto a = ssim_components(local_stats(x, y, 8, 8, p), p);
    const auto b = ssim_components(local_stats(xs, ys, 8, 8, p), p);
    EXPECT_NEAR(a.contrast, b.contrast, 1e-9);
    EXPECT_NEAR(a.structure, b.structure, 1e-9);
    const auto o = oracle::window_stats(xs, ys, 3, 3, 11);
    const double c1 = p.c1();
    EXPECT_NEAR(b.luminance, (2 * o.mx * o.my + c1) / (o.mx * o.mx + o.my * o.my + c1), 1e-12);
}

TEST(Ssim, Errors)
{
    EXPECT_THROW(ssim(Image(10, 20), Image(10, 20)), Error);
    EXPECT_THROW(ssim(Image(20, 20), Image(20, 21)), Error);
    MetricParams even = MetricParams::ssim();
    even.window_size = 4;
    EXPECT_THROW(ssim(Image(20, 20), Image(20, 20), even), Error);
}

TEST(MsSsim, IdentityAndReduction)
{
    const auto [x, y] = oracle::random_pair(48, 48, 3);
    EXPECT_NEAR(ms_ssim(x, x, MetricParams::ms_ssim(2)).value, 1.0, 1e-12);
    EXPECT_NEAR(ms_ssim(x, y, MetricParams::ms_ssim(1)).value, ssim(x, y).value, 1e-12);
    EXPECT_NEAR(ms_ssim(x, y, MetricParams::ms_ssim(2)).value, ms_ssim(y, x, MetricParams::ms_ssim(2)).value, 1e-12);
}

TEST(MsSsim, MatchesStraightLineOracle)
{
    const auto [x, y] = oracle::random_pair(176, 176, 11, 0.3);
    EXPECT_NEAR(ms_ssim(x, y, MetricParams::ms_ssim(5)).value, oracle::ms_ssim(x, y, 5), 1e-10);
}

TEST(MsSsim, FactorsWithinUnitInterval)
{
    const auto [x, y] = oracle::random_pair(100, 90, 12, 0.6);
    for (double f : ms_ssim_factors(x, y, MetricParams::ms_ssim(3))) {
        EXPECT_LE(f, 1.0 + 1e-9);
        EXPECT_GE(f, -1.0 - 1e-9);
    }
}

TEST(MsSsim, TooSmallReportsFeasibleScales)
{
    const Image x(96, 96);
    try {
        ms_ssim(x, x, MetricParams::ms_ssim(5));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::too_small);
        EXPECT_NE(std::string(e.what()).find("M=4"), std::string::npos) << e.what();
    }
    EXPECT_EQ(max_feasible_scales(96, 96, 11), 4);
    EXPECT_EQ(max_feasible_scales(176, 176, 11), 5);
    EXPECT_EQ(max_feasible_scales(10, 40, 11), 0);
}

TEST(MsSsim, NegativeBaseWithFractionalExponent)
{
    Image x(16, 16), y(16, 16);
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c) {
            x(r, c) = (r + c) % 2;
            y(r, c) = 1 - x(r, c);
        }
    MetricParams p = MetricParams::ssim();
    p.beta = {0.5};
    p.gamma = {0.5};
    try {
        ssim(x, y, p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::negative_base);
    }
}

TEST(SsimGrad, ZeroAtIdentity)
{
    const Image x = oracle::random_image(24, 24, 2);
    const auto g = ssim_grad(x, x);
    for (double v : g.gradient->pixels())
        EXPECT_NEAR(v, 0.0, 1e-9);
    const auto gm = ms_ssim_grad(x, x, MetricParams::ms_ssim(2));
    for (double v : gm.gradient->pixels())
        EXPECT_NEAR(v, 0.0, 1e-9);
}

TEST(SsimGrad, MatchesFiniteDifferences)
{
    for (int n : {16, 24, 32}) {
        const auto [x, y] = oracle::random_pair(n, n, static_cast<std::uint64_t>(n));
        const auto g = ssim_grad(x, y);
        const Image fd = fd_gradient(MetricId::ssim, x, y, MetricParams::ssim(), 1e-6);
        EXPECT_LT(max_relative_error(g.gradient->data(), fd.data()), 1e-5) << n;
        EXPECT_DOUBLE_EQ(g.value, ssim(x, y).value);
    }
}

TEST(SsimGrad, NonUnitExponents)
{
    const auto [x, y] = oracle::random_pair(16, 16, 21, 0.1);
    MetricParams p = MetricParams::ssim();
    p.alpha = 2.0;
    p.beta = {1.0};
    p.gamma = {3.0};
    const auto g = ssim_grad(x, y, p);
    const Image fd = fd_gradient(MetricId::ssim, x, y, p, 1e-6);
    EXPECT_LT(max_relative_error(g.gradient->data(), fd.data()), 1e-5);
}

TEST(SsimGrad, TranslationSymmetryForConstants)
{
    const Image x(31, 31, Range::unit, 0.2), y(31, 31, Range::unit, 0.7);
    const Image g = *ssim_grad(x, y).gradient;
    // rows and columns in the fully covered interior see the same number of windows
    EXPECT_NEAR(g(15, 15), g(12, 18), 1e-15);
    EXPECT_NEAR(g(10, 10), g(20, 20), 1e-15);
    EXPECT_NEAR(g(0, 0), g(30, 30), 1e-15);
    EXPECT_NEAR(g(0, 0), g(0, 30), 1e-15);
}

TEST(MsSsimGrad, MatchesFiniteDifferencesOnSampledPixels)
{
    const auto [x, y] = oracle::random_pair(176, 176, 7, 0.3);
    const MetricParams p = MetricParams::ms_ssim(3);
    const auto g = ms_ssim_grad(x, y, p);
    const auto pix = sample_pixels(x.size(), 200, 7);
    const auto fd = fd_gradient_at(MetricId::ms_ssim, x, y, p, 1e-6, pix);
    std::vector<double> a;
    for (std::size_t q : pix)
        a.push_back((*g.gradient)[q]);
    EXPECT_LT(max_relative_error(a, fd), 1e-4);
}

TEST(MsSsimGrad, FullFdOnSmallImages)
{
    const auto [x, y] = oracle::random_pair(30, 26, 8, 0.3);
    MetricParams p = MetricParams::ms_ssim(2).with_window(7);
    const auto g = ms_ssim_grad(x, y, p);
    const Image fd = fd_gradient(MetricId::ms_ssim, x, y, p, 1e-6);
    EXPECT_LT(max_relative_error(g.gradient->data(), fd.data()), 1e-5);
}

TEST(MsSsimGrad, ReducesToSsimGrad)
{
    const auto [x, y] = oracle::random_pair(20, 20, 10);
    const Image a = *ms_ssim_grad(x, y, MetricParams::ms_ssim(1)).gradient;
    const Image b = *ssim_grad(x, y).gradient;
    for (std::size_t i = 0; i < a.size(); ++i)
        EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(FdGradient, MseIsExact)
{
    const auto [x, y] = oracle::random_pair(9, 9, 3);
    const Image fd = fd_gradient(MetricId::mse, x, y, MetricParams::ssim(), 1e-6);
    for (std::size_t i = 0; i < x.size(); ++i)
        EXPECT_NEAR(fd[i], 2 * (y[i] - x[i]) / x.size(), 1e-7);
}

TEST(FdGradient, NearZeroAtSsimMaximum)
{
    const Image x = oracle::random_image(16, 16, 4);
    const Image fd = fd_gradient(MetricId::ssim, x, x, MetricParams::ssim(), 1e-6);
    for (double v : fd.pixels())
        EXPECT_NEAR(v, 0.0, 1e-6);
}
