#include "oracles.hpp"

#include <percept/elvae.hpp>
#include <percept/gradcheck.hpp>
#include <percept/synthetic.hpp>

#include <gtest/gtest.h>

#include <numbers>

using namespace percept;

namespace {

// Closed-form-free estimate: mean over z ~ q of log q(z) - log p(z).
double monte_carlo_kl(const GaussianPosterior& q, int draws, std::uint64_t seed)
{
    Rng rng(seed, "mc-kl");
    double total = 0;
    for (int i = 0; i < draws; ++i) {
        std::vector<double> eps(q.dim());
        for (double& e : eps)
            e = rng.normal();
        const auto z = reparameterize(q, eps);
        for (std::size_t k = 0; k < q.dim(); ++k) {
            const double var = std::exp(q.log_var[k]);
            const double log_q = -0.5 * (std::log(2 * std::numbers::pi * var) + (z[k] - q.mu[k]) * (z[k] - q.mu[k]) / var);
            const double log_p = -0.5 * (std::log(2 * std::numbers::pi) + z[k] * z[k]);
            total += log_q - log_p;
        }
    }
    return total / draws;
}

struct Toy {
    Network encoder, decoder;
    ElVaeConfig cfg;
    Image x;
};

Toy toy(LossKind kind = LossKind::mse)
{
    Toy t;
    t.cfg.latent_dim = 2;
    t.cfg.C = 10;
    t.cfg.mc_samples = 2;
    t.cfg.loss = LossFunction::make(kind, 2.0);
    t.encoder = init_network(Shape{1, 4, 4}, {LayerSpec::dense(6), LayerSpec::tanh(), LayerSpec::dense(4)}, 1);
    t.decoder = init_network(Shape{2, 1, 1}, {LayerSpec::dense(16), LayerSpec::tanh()}, 2);
    t.x = rescale_range(oracle::random_image(4, 4, 3), Range::signed_);
    return t;
}

std::vector<double> elvae_fd(Toy t, const std::vector<std::vector<double>>& eps, double h = 1e-6)
{
    std::vector<double> out;
    for (Network* net : {&t.encoder, &t.decoder})
        for (double* p : parameter_pointers(*net)) {
            const double saved = *p;
            *p = saved + h;
            const double plus = elvae_loss(t.x, t.encoder, t.decoder, t.cfg, eps, false).value;
            *p = saved - h;
            const double minus = elvae_loss(t.x, t.encoder, t.decoder, t.cfg, eps, false).value;
            *p = saved;
            out.push_back((plus - minus) / (2 * h));
        }
    return out;
}

std::vector<Image> signed_toy(int n, std::uint64_t seed)
{
    std::vector<Image> out;
    for (const auto& img : toy_dataset(n, 16, 16, seed))
        out.push_back(rescale_range(img, Range::signed_));
    return out;
}

Architecture encoder_arch(int d)
{
    return {Shape{1, 16, 16}, {LayerSpec::dense(32), LayerSpec::tanh(), LayerSpec::dense(2 * d)}, {}, false};
}

Architecture decoder_arch(int d)
{
    return {Shape{d, 1, 1},
            {LayerSpec::dense(32), LayerSpec::tanh(), LayerSpec::dense(256), LayerSpec::tanh(),
             LayerSpec::reshape(Shape{1, 16, 16})},
            {},
            false};
}

} // namespace

TEST(Kl, ClosedForm)
{
    EXPECT_EQ(kl_standard_normal({{0, 0}, {0, 0}}).value, 0.0);
    EXPECT_DOUBLE_EQ(kl_standard_normal({{1}, {0}}).value, 0.5);
    EXPECT_THROW(kl_standard_normal({{std::nan("")}, {0}}), Error);
}

TEST(Kl, NonNegativeAndGradients)
{
    Rng rng(1, "kl");
    for (int t = 0; t < 20; ++t) {
        GaussianPosterior q{{rng.normal(), rng.normal(), rng.normal()}, {rng.normal(), rng.normal(), rng.normal()}};
        const KlResult r = kl_standard_normal(q);
        EXPECT_GE(r.value, 0.0);
        for (std::size_t k = 0; k < 3; ++k) {
            auto fm = [&](std::vector<double>& m) { return kl_standard_normal({m, q.log_var}).value; };
            auto fl = [&](std::vector<double>& l) { return kl_standard_normal({q.mu, l}).value; };
            std::vector<double> m = q.mu, l = q.log_var;
            EXPECT_NEAR(r.grad_mu[k], central_difference(fm, m, k, 1e-6), 1e-8);
            EXPECT_NEAR(r.grad_log_var[k], central_difference(fl, l, k, 1e-6), 1e-8);
        }
    }
}

TEST(Kl, MatchesMonteCarlo)
{
    const GaussianPosterior q{{0.5, -1.0, 0.2, 0.0}, {-0.5, 0.3, -1.2, 0.1}};
    const double exact = kl_standard_normal(q).value;
    EXPECT_NEAR(monte_carlo_kl(q, 100000, 4), exact, 0.02 * exact);
}

TEST(Reparameterize, Cases)
{
    const GaussianPosterior q{{0.3, -0.7}, {0.0, 0.0}};
    EXPECT_EQ(reparameterize(q, {0, 0}), q.mu);
    const auto z = reparameterize(q, {0.5, -2.0});
    EXPECT_DOUBLE_EQ(z[0], 0.8);
    EXPECT_DOUBLE_EQ(z[1], -2.7);
    EXPECT_THROW(reparameterize(q, {1.0}), Error);
}

TEST(Reparameterize, MomentsOfDraws)
{
    const GaussianPosterior q{{1.5}, {std::log(0.25)}};
    Rng rng(2, "draws");
    const int n = 100000;
    double s = 0, ss = 0;
    for (int i = 0; i < n; ++i) {
        const double z = reparameterize(q, {rng.normal()})[0];
        s += z;
        ss += z * z;
    }
    const double m = s / n, v = ss / n - m * m;
    const double se_mean = std::sqrt(0.25 / n), se_var = 0.25 * std::sqrt(2.0 / (n - 1));
    EXPECT_NEAR(m, 1.5, 3 * se_mean);
    EXPECT_NEAR(v, 0.25, 3 * se_var);
}

TEST(ElVaeLoss, ZeroTradeoffIsKl)
{
    Toy t = toy();
    t.cfg.C = 0;
    const auto l = elvae_loss(t.x, t.encoder, t.decoder, t.cfg, std::uint64_t{5});
    const auto q = posterior(t.encoder, t.x, 2);
    EXPECT_EQ(l.reconstruction, 0.0);
    EXPECT_DOUBLE_EQ(l.value, kl_standard_normal(q).value);
    EXPECT_THROW(t.cfg.validate(), Error);
}

TEST(ElVaeLoss, ZeroNoiseReconstructsFromMode)
{
    Toy t = toy();
    t.cfg.mc_samples = 1;
    t.cfg.loss.scale = 0.5;
    const auto l = elvae_loss(t.x, t.encoder, t.decoder, t.cfg, {{0.0, 0.0}});
    const auto q = posterior(t.encoder, t.x, 2);
    const Image rec = output_image(forward(t.decoder, q.mu).output, t.x);
    EXPECT_NEAR(l.reconstruction, t.cfg.C * mse(t.x, rec).value / 0.5, 1e-12);
}

TEST(ElVaeLoss, LinearInTradeoff)
{
    Toy t = toy();
    const std::vector<std::vector<double>> eps{{0.3, -1.0}, {1.2, 0.4}};
    t.cfg.C = 3;
    const auto a = elvae_loss(t.x, t.encoder, t.decoder, t.cfg, eps, false);
    t.cfg.C = 7;
    const auto b = elvae_loss(t.x, t.encoder, t.decoder, t.cfg, eps, false);
    t.cfg.C = 10;
    const auto c = elvae_loss(t.x, t.encoder, t.decoder, t.cfg, eps, false);
    EXPECT_NEAR(c.reconstruction, a.reconstruction + b.reconstruction, 1e-12);
    EXPECT_EQ(a.kl, c.kl);
}

TEST(ElVaeLoss, GradientMatchesFd)
{
    for (auto kind : {LossKind::mse, LossKind::mae}) {
        Toy t = toy(kind);
        const std::vector<std::vector<double>> eps{{0.3, -1.0}, {1.2, 0.4}};
        const auto l = elvae_loss(t.x, t.encoder, t.decoder, t.cfg, eps);
        std::vector<double> analytic = flatten(l.encoder);
        const auto d = flatten(l.decoder);
        analytic.insert(analytic.end(), d.begin(), d.end());
        EXPECT_LT(max_relative_error(analytic, elvae_fd(t, eps)), 1e-5) << loss_name(kind);
    }
}

TEST(ElVaeLoss, GradientMatchesFdUnderSsim)
{
    Toy t;
    t.cfg.latent_dim = 2;
    t.cfg.C = 5;
    t.cfg.loss = LossFunction::make(LossKind::neg_ssim, 2.0);
    t.cfg.loss.params.window_size = 3;
    t.encoder = init_network(Shape{1, 6, 6}, {LayerSpec::dense(4)}, 1);
    t.decoder = init_network(Shape{2, 1, 1}, {LayerSpec::dense(36), LayerSpec::tanh()}, 2);
    t.x = rescale_range(oracle::random_image(6, 6, 3), Range::signed_);
    const std::vector<std::vector<double>> eps{{0.3, -1.0}};
    const auto l = elvae_loss(t.x, t.encoder, t.decoder, t.cfg, eps);
    std::vector<double> analytic = flatten(l.encoder);
    const auto d = flatten(l.decoder);
    analytic.insert(analytic.end(), d.begin(), d.end());
    EXPECT_LT(max_relative_error(analytic, elvae_fd(t, eps)), 1e-5);
}

TEST(ElVaeLoss, SeededNoiseIsDeterministic)
{
    const Toy t = toy();
    const auto a = elvae_loss(t.x, t.encoder, t.decoder, t.cfg, std::uint64_t{8});
    const auto b = elvae_loss(t.x, t.encoder, t.decoder, t.cfg, std::uint64_t{8});
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(flatten(a.encoder), flatten(b.encoder));
}

TEST(TrainElVae, ObjectiveDecreasesAndIsDeterministic)
{
    const auto data = signed_toy(64, 5);
    const std::vector<Image> train(data.begin(), data.begin() + 48), valid(data.begin() + 48, data.end());
    ElVaeConfig cfg;
    cfg.latent_dim = 4;
    cfg.C = 1000;
    cfg.loss = LossFunction::make(LossKind::mse, 2.0);
    cfg.scale_pairs = 2000;
    OptimizerConfig opt = OptimizerConfig::adam(1e-3);
    opt.batch_size = 16;
    auto run = [&] { return train_elvae(encoder_arch(4), decoder_arch(4), cfg, train, valid, opt, {2, 6}, 3); };
    const auto a = run();
    ASSERT_FALSE(a.report.train_loss.empty());
    EXPECT_LT(a.report.train_loss.back(), a.report.initial_train_loss);
    EXPECT_GT(a.loss_scale, 0.0);
    const auto b = run();
    EXPECT_TRUE(a.report == b.report);
    EXPECT_EQ(a.kl, b.kl);
}

TEST(TrainElVae, LargerTradeoffGivesLargerKl)
{
    const auto data = signed_toy(64, 6);
    const std::vector<Image> train(data.begin(), data.begin() + 48), valid(data.begin() + 48, data.end());
    ElVaeConfig cfg;
    cfg.latent_dim = 4;
    cfg.loss = LossFunction::make(LossKind::mse, 2.0);
    cfg.scale_pairs = 2000;
    OptimizerConfig opt = OptimizerConfig::adam(2e-3);
    opt.batch_size = 16;
    double kl[2];
    int i = 0;
    for (double C : {1.0, 1000.0}) {
        cfg.C = C;
        const auto r = train_elvae(encoder_arch(4), decoder_arch(4), cfg, train, valid, opt, {100, 10}, 4);
        kl[i++] = r.kl[static_cast<std::size_t>(r.report.best_epoch > 0 ? r.report.best_epoch - 1 : 0)];
    }
    EXPECT_GE(kl[1], kl[0]);
}

TEST(ReconstructMode, IdentityDecoderWiring)
{
    const int d = 4;
    const Network enc = init_network(Shape{1, 2, 2}, {LayerSpec::dense(2 * d)}, 1);
    Network dec = init_network(Shape{d, 1, 1}, {LayerSpec::dense(d), LayerSpec::reshape(Shape{1, 2, 2})}, 2);
    auto& w = dec.layers[0].weights;
    std::fill(w.begin(), w.end(), 0.0);
    for (int k = 0; k < d; ++k)
        w[static_cast<std::size_t>(k * d + k)] = 1.0;
    const Image x(2, 2, {0.1, -0.4, 0.9, -0.2}, Range::signed_);
    const Image r = reconstruct_mode(enc, dec, x, d);
    const auto q = posterior(enc, x, d);
    for (int k = 0; k < d; ++k)
        EXPECT_DOUBLE_EQ(r[static_cast<std::size_t>(k)], std::clamp(q.mu[static_cast<std::size_t>(k)], -1.0, 1.0));
    EXPECT_EQ(reconstruct_mode(enc, dec, x, d), r);
    EXPECT_TRUE(r.in_range());
}

TEST(SamplePrior, SeededAndBounded)
{
    const Network dec = decoder_arch(3).build(9);
    const auto a = sample_prior(dec, 4, 7, 16, 16), b = sample_prior(dec, 4, 7, 16, 16);
    ASSERT_EQ(a.size(), 4u);
    EXPECT_EQ(a, b);
    for (const auto& img : a)
        EXPECT_TRUE(img.in_range());
    EXPECT_TRUE(sample_prior(dec, 0, 7, 16, 16).empty());
    EXPECT_NE(sample_prior(dec, 1, 8, 16, 16).front(), a.front());
}
