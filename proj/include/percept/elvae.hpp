#pragma once

#include "percept/error.hpp"
#include "percept/image.hpp"
#include "percept/losses.hpp"
#include "percept/nn.hpp"
#include "percept/optim.hpp"
#include "percept/rng.hpp"
#include "percept/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace percept {

/// Diagonal Gaussian q(z|x), parameterized by mean and log-variance.
struct GaussianPosterior {
    std::vector<double> mu;
    std::vector<double> log_var;

    std::size_t dim() const { return mu.size(); }
};

struct KlResult {
    double value = 0;
    std::vector<double> grad_mu;
    std::vector<double> grad_log_var;
};

/// KL(q || N(0, I)) = 0.5 sum(mu^2 + exp(lv) - 1 - lv), with exact gradients.
inline KlResult kl_standard_normal(const GaussianPosterior& q)
{
    require(q.mu.size() == q.log_var.size(), Errc::dimension_mismatch, "mu and log_var differ in length");
    KlResult r;
    r.grad_mu.resize(q.dim());
    r.grad_log_var.resize(q.dim());
    for (std::size_t k = 0; k < q.dim(); ++k) {
        const double m = q.mu[k], lv = q.log_var[k];
        if (!std::isfinite(m) || !std::isfinite(lv))
            fail(Errc::non_finite, "posterior parameter " + std::to_string(k));
        const double var = std::exp(lv);
        r.value += 0.5 * (m * m + var - 1.0 - lv);
        r.grad_mu[k] = m;
        r.grad_log_var[k] = 0.5 * (var - 1.0);
    }
    return r;
}

/// z = mu + exp(log_var / 2) * eps.
inline std::vector<double> reparameterize(const GaussianPosterior& q, const std::vector<double>& eps)
{
    require(eps.size() == q.dim(), Errc::dimension_mismatch, "eps dimension differs from posterior");
    std::vector<double> z(q.dim());
    for (std::size_t k = 0; k < z.size(); ++k)
        z[k] = q.mu[k] + std::exp(0.5 * q.log_var[k]) * eps[k];
    return z;
}

struct ElVaeConfig {
    double C = 1000.0;
    int latent_dim = 8;
    int mc_samples = 1;
    LossFunction loss;
    bool normalize = true; ///< estimate loss.scale on the training set before optimizing
    int scale_pairs = 10000;

    void validate() const
    {
        require(C > 0, Errc::invalid_argument, "trade-off C must be positive");
        require(latent_dim >= 1, Errc::invalid_argument, "latent_dim must be >= 1");
        require(mc_samples >= 1, Errc::invalid_argument, "mc_samples must be >= 1");
        require(scale_pairs >= 1, Errc::invalid_argument, "scale_pairs must be >= 1");
    }
};

struct ElVaeModel {
    Network encoder; ///< image -> [mu, log_var] (2 * latent_dim outputs)
    Network decoder; ///< latent -> image
    int latent_dim = 0;
};

inline GaussianPosterior split_posterior(const std::vector<double>& head, int latent_dim)
{
    const auto d = static_cast<std::size_t>(latent_dim);
    require(head.size() == 2 * d, Errc::shape_mismatch,
            "encoder emits " + std::to_string(head.size()) + " values, expected 2 x " + std::to_string(latent_dim));
    return {std::vector<double>(head.begin(), head.begin() + static_cast<std::ptrdiff_t>(d)),
            std::vector<double>(head.begin() + static_cast<std::ptrdiff_t>(d), head.end())};
}

inline GaussianPosterior posterior(const Network& encoder, const Image& x, int latent_dim)
{
    return split_posterior(forward(encoder, x.pixels(), Mode::eval).output, latent_dim);
}

struct ElVaeLoss {
    double value = 0;
    double reconstruction = 0; ///< C * mean_s loss / scale
    double kl = 0;
    Gradients encoder;
    Gradients decoder;
};

/// Standard-normal draws for one image: mc_samples vectors of latent_dim.
inline std::vector<std::vector<double>> draw_eps(Rng& rng, int samples, int latent_dim)
{
    std::vector<std::vector<double>> eps(static_cast<std::size_t>(samples),
                                         std::vector<double>(static_cast<std::size_t>(latent_dim)));
    for (auto& e : eps)
        for (double& v : e)
            v = rng.normal();
    return eps;
}

/**
 * Expected-loss objective for one image with explicit noise:
 *   C * (1/S) sum_s loss(x, decode(mu + sigma * eps_s)) / scale + KL(q || p).
 * Gradients flow through the reparameterized samples and the KL term.
 */
inline ElVaeLoss elvae_loss(const Image& x, const Network& encoder, const Network& decoder, const ElVaeConfig& cfg,
                            const std::vector<std::vector<double>>& eps, bool want_grad = true)
{
    require(cfg.C >= 0, Errc::invalid_argument, "C must be non-negative");
    require(!eps.empty(), Errc::invalid_argument, "need at least one noise sample");
    const int d = cfg.latent_dim;
    ForwardResult enc = forward(encoder, x.pixels(), Mode::train);
    const GaussianPosterior q = split_posterior(enc.output, d);
    const KlResult kl = kl_standard_normal(q);

    ElVaeLoss out;
    out.kl = kl.value;
    std::vector<double> head_grad(2 * static_cast<std::size_t>(d), 0.0);
    if (want_grad)
        out.decoder = zero_gradients(decoder);

    const double weight = cfg.C / static_cast<double>(eps.size());
    for (const auto& e : eps) {
        const std::vector<double> z = reparameterize(q, e);
        ForwardResult dec = forward(decoder, z, Mode::train);
        const LossValue lv = eval_loss(cfg.loss, x, output_image(dec.output, x), want_grad);
        out.reconstruction += weight * lv.value;
        if (!want_grad)
            continue;
        std::vector<double> g(lv.gradient.pixels().begin(), lv.gradient.pixels().end());
        for (double& v : g)
            v *= weight;
        Gradients dg = backward(decoder, dec.tape, g);
        accumulate(out.decoder, dg);
        for (std::size_t k = 0; k < static_cast<std::size_t>(d); ++k) {
            head_grad[k] += dg.input[k]; // dz/dmu = 1
            head_grad[d + k] += dg.input[k] * 0.5 * (z[k] - q.mu[k]); // dz/dlv = (z - mu)/2
        }
    }
    out.value = out.reconstruction + out.kl;
    if (want_grad) {
        for (std::size_t k = 0; k < static_cast<std::size_t>(d); ++k) {
            head_grad[k] += kl.grad_mu[k];
            head_grad[d + k] += kl.grad_log_var[k];
        }
        out.encoder = backward(encoder, enc.tape, head_grad);
    }
    return out;
}

/// Same objective with noise drawn from a seeded stream.
inline ElVaeLoss elvae_loss(const Image& x, const Network& encoder, const Network& decoder, const ElVaeConfig& cfg,
                            std::uint64_t seed, bool want_grad = true)
{
    Rng rng(seed, "elvae-eps");
    return elvae_loss(x, encoder, decoder, cfg, draw_eps(rng, cfg.mc_samples, cfg.latent_dim), want_grad);
}

struct ElVaeTrainResult {
    ElVaeModel model;
    OptimizerState encoder_state, decoder_state;
    TrainReport report;             ///< train_loss / valid_metric hold the objective
    std::vector<double> kl;         ///< mean KL on the training set after each epoch
    std::vector<double> reconstruction;
    double initial_kl = 0;
    double loss_scale = 1.0;
};

namespace detail {

struct ObjectiveSummary {
    double objective = 0, kl = 0, reconstruction = 0;
};

// Mean objective with noise fixed per image index, so repeated evaluations
// of the same parameters agree exactly.
inline ObjectiveSummary mean_objective(const ElVaeModel& m, const ElVaeConfig& cfg, const std::vector<Image>& data,
                                       std::uint64_t seed, std::string_view stream)
{
    CompensatedSum obj, kl, rec;
    for (std::size_t i = 0; i < data.size(); ++i) {
        Rng rng(seed, stream, i);
        const ElVaeLoss l =
            elvae_loss(data[i], m.encoder, m.decoder, cfg, draw_eps(rng, cfg.mc_samples, cfg.latent_dim), false);
        obj.add(l.value);
        kl.add(l.kl);
        rec.add(l.reconstruction);
    }
    const double n = static_cast<double>(data.size());
    return {obj.value() / n, kl.value() / n, rec.value() / n};
}

} // namespace detail

/// Mini-batch optimization of the expected-loss objective. Returns the
/// snapshot with the best validation objective.
inline ElVaeTrainResult train_elvae(const Architecture& encoder_arch, const Architecture& decoder_arch,
                                    ElVaeConfig cfg, const std::vector<Image>& train, const std::vector<Image>& valid,
                                    const OptimizerConfig& opt, const EarlyStop& stop, std::uint64_t seed,
                                    const std::function<void(int, const ElVaeModel&)>& hook = {})
{
    cfg.validate();
    opt.validate();
    require(!train.empty() && !valid.empty(), Errc::invalid_argument, "train and validation sets must be nonempty");
    require(stop.patience >= 0 && stop.max_epochs >= 1, Errc::invalid_argument, "bad early-stop policy");
    const auto t0 = std::chrono::steady_clock::now();

    ElVaeModel model{encoder_arch.build(stream_seed(seed, "encoder")), decoder_arch.build(stream_seed(seed, "decoder")),
                     cfg.latent_dim};
    const std::size_t pixels = train.front().size();
    require(model.encoder.input_shape.size() == pixels, Errc::shape_mismatch, "encoder input must match image size");
    require(model.encoder.output_shape().size() == 2 * static_cast<std::size_t>(cfg.latent_dim), Errc::shape_mismatch,
            "encoder must emit 2 x latent_dim values");
    require(model.decoder.input_shape.size() == static_cast<std::size_t>(cfg.latent_dim), Errc::shape_mismatch,
            "decoder input must equal latent_dim");
    require(model.decoder.output_shape().size() == pixels, Errc::shape_mismatch, "decoder output must match image size");

    if (cfg.normalize)
        cfg.loss.scale = estimate_loss_scale(cfg.loss, train, cfg.scale_pairs, stream_seed(seed, "loss-scale"));

    ElVaeTrainResult best;
    best.loss_scale = cfg.loss.scale;
    OptimizerState enc_state = make_optimizer_state(model.encoder);
    OptimizerState dec_state = make_optimizer_state(model.decoder);

    const auto init_train = detail::mean_objective(model, cfg, train, seed, "eval-train");
    const auto init_valid = detail::mean_objective(model, cfg, valid, seed, "eval-valid");
    best.model = model;
    best.encoder_state = enc_state;
    best.decoder_state = dec_state;
    best.initial_kl = init_train.kl;
    TrainReport& rep = best.report;
    rep.initial_train_loss = init_train.objective;
    rep.initial_valid_metric = init_valid.objective;
    double best_valid = init_valid.objective;

    Rng order_rng(seed, "shuffle");
    Rng eps_rng(seed, "train-eps");
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    int bad_epochs = 0;

    for (int epoch = 1; epoch <= stop.max_epochs; ++epoch) {
        order_rng.shuffle(order.begin(), order.end());
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opt.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(opt.batch_size));
            Gradients enc_acc = zero_gradients(model.encoder), dec_acc = zero_gradients(model.decoder);
            for (std::size_t b = start; b < end; ++b) {
                const ElVaeLoss l = elvae_loss(train[order[b]], model.encoder, model.decoder, cfg,
                                               draw_eps(eps_rng, cfg.mc_samples, cfg.latent_dim));
                if (!std::isfinite(l.value))
                    fail(Errc::divergence, "non-finite objective in epoch " + std::to_string(epoch));
                accumulate(enc_acc, l.encoder);
                accumulate(dec_acc, l.decoder);
            }
            const double inv = 1.0 / static_cast<double>(end - start);
            scale(enc_acc, inv);
            scale(dec_acc, inv);
            optimizer_step(model.encoder, enc_acc, enc_state, opt);
            optimizer_step(model.decoder, dec_acc, dec_state, opt);
        }

        const auto tr = detail::mean_objective(model, cfg, train, seed, "eval-train");
        const auto va = detail::mean_objective(model, cfg, valid, seed, "eval-valid");
        if (!std::isfinite(tr.objective) || !std::isfinite(va.objective))
            fail(Errc::divergence, "non-finite objective after epoch " + std::to_string(epoch));
        rep.train_loss.push_back(tr.objective);
        rep.valid_metric.push_back(va.objective);
        best.kl.push_back(tr.kl);
        best.reconstruction.push_back(tr.reconstruction);
        rep.stop_epoch = epoch;
        if (hook)
            hook(epoch, model);

        if (va.objective < best_valid) {
            best_valid = va.objective;
            best.model = model;
            best.encoder_state = enc_state;
            best.decoder_state = dec_state;
            rep.best_epoch = epoch;
            bad_epochs = 0;
        } else {
            ++bad_epochs;
        }
        if (bad_epochs >= stop.patience)
            break;
    }
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return best;
}

/// Decode the posterior mode, clipped to the input's range.
inline Image reconstruct_mode(const Network& encoder, const Network& decoder, const Image& x, int latent_dim)
{
    const GaussianPosterior q = posterior(encoder, x, latent_dim);
    return clip_to_range(output_image(forward(decoder, q.mu, Mode::eval).output, x));
}

/// n decoded draws z ~ N(0, I), shaped height x width, clipped to `range`.
inline std::vector<Image> sample_prior(const Network& decoder, int n, std::uint64_t seed, int height, int width,
                                       Range range = Range::signed_)
{
    require(n >= 0, Errc::invalid_argument, "sample count must be non-negative");
    const Image like(height, width, range);
    Rng rng(seed, "prior");
    std::vector<Image> out;
    out.reserve(static_cast<std::size_t>(n));
    const auto d = decoder.input_shape.size();
    for (int i = 0; i < n; ++i) {
        std::vector<double> z(d);
        for (double& v : z)
            v = rng.normal();
        out.push_back(clip_to_range(output_image(forward(decoder, z, Mode::eval).output, like)));
    }
    return out;
}

} // namespace percept
