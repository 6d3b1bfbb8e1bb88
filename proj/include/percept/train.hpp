#pragma once

#include "percept/error.hpp"
#include "percept/image.hpp"
#include "percept/losses.hpp"
#include "percept/nn.hpp"
#include "percept/optim.hpp"
#include "percept/rng.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

namespace percept {

/// Layer list plus everything needed to instantiate it.
struct Architecture {
    Shape input;
    std::vector<LayerSpec> layers;
    InitOptions init;
    bool residual = false;

    Network build(std::uint64_t seed) const
    {
        Network net = init_network(input, layers, seed, init);
        net.residual = residual;
        return net;
    }
};

/// Stop once the validation metric has failed to improve for `patience`
/// consecutive epochs, or after `max_epochs`.
struct EarlyStop {
    int patience = 1;
    int max_epochs = 100;
};

struct TrainReport {
    double initial_train_loss = 0;
    double initial_valid_metric = 0;
    std::vector<double> train_loss;   ///< mean training loss after each epoch
    std::vector<double> valid_metric; ///< mean validation loss after each epoch
    int stop_epoch = 0;
    int best_epoch = 0; ///< 0 means the initial parameters were never beaten
    double wall_seconds = 0;

    /// Equality over the deterministic fields (wall-clock time excluded).
    friend bool operator==(const TrainReport& a, const TrainReport& b)
    {
        return a.initial_train_loss == b.initial_train_loss && a.initial_valid_metric == b.initial_valid_metric &&
               a.train_loss == b.train_loss && a.valid_metric == b.valid_metric && a.stop_epoch == b.stop_epoch &&
               a.best_epoch == b.best_epoch;
    }
};

struct TrainResult {
    Network net;
    OptimizerState optimizer;
    TrainReport report;
};

/// Called after every epoch with the current (not necessarily best) network.
using EpochHook = std::function<void(int epoch, const Network&)>;

inline Image output_image(const std::vector<double>& out, const Image& like)
{
    require(out.size() == like.size(), Errc::shape_mismatch,
            "network output has " + std::to_string(out.size()) + " values, image has " + std::to_string(like.size()));
    return Image(like.height(), like.width(), out, like.range());
}

/// Network output for one image, shaped and ranged like the input.
inline Image reconstruct(const Network& net, const Image& x)
{
    return output_image(forward(net, x.pixels(), Mode::eval).output, x);
}

/// Mean scaled loss of reconstructions over a dataset.
inline double dataset_loss(const Network& net, const LossFunction& loss, const std::vector<Image>& data)
{
    require(!data.empty(), Errc::invalid_argument, "dataset is empty");
    detail::CompensatedSum s;
    for (const auto& x : data)
        s.add(eval_loss(loss, x, reconstruct(net, x), false).value);
    return s.value() / static_cast<double>(data.size());
}

/**
 * Mini-batch training of a deterministic autoencoder.
 *
 * The output gradient injected into backward() is the loss gradient from the
 * losses module; parameter gradients are averaged over the batch. Returns the
 * snapshot with the best validation metric.
 */
inline TrainResult train_autoencoder(const Architecture& arch, const LossFunction& loss,
                                     const std::vector<Image>& train, const std::vector<Image>& valid,
                                     const OptimizerConfig& opt, const EarlyStop& stop, std::uint64_t seed,
                                     const EpochHook& hook = {})
{
    require(!train.empty() && !valid.empty(), Errc::invalid_argument, "train and validation sets must be nonempty");
    require(stop.patience >= 0 && stop.max_epochs >= 1, Errc::invalid_argument, "bad early-stop policy");
    opt.validate();
    const auto t0 = std::chrono::steady_clock::now();

    Network net = arch.build(seed);
    require(net.output_shape().size() == train.front().size() && net.input_shape.size() == train.front().size(),
            Errc::shape_mismatch, "autoencoder input/output must match image size");
    OptimizerState state = make_optimizer_state(net);

    TrainResult best{net, state, {}};
    TrainReport& rep = best.report;
    rep.initial_train_loss = dataset_loss(net, loss, train);
    rep.initial_valid_metric = dataset_loss(net, loss, valid);
    double best_valid = rep.initial_valid_metric;

    Rng order_rng(seed, "shuffle");
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    int bad_epochs = 0;

    for (int epoch = 1; epoch <= stop.max_epochs; ++epoch) {
        order_rng.shuffle(order.begin(), order.end());
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opt.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(opt.batch_size));
            Gradients acc = zero_gradients(net);
            for (std::size_t b = start; b < end; ++b) {
                const Image& x = train[order[b]];
                ForwardResult fr = forward(net, x.pixels(), Mode::train);
                const LossValue lv = eval_loss(loss, x, output_image(fr.output, x));
                if (!std::isfinite(lv.value))
                    fail(Errc::divergence, "non-finite loss in epoch " + std::to_string(epoch));
                accumulate(acc, backward(net, fr.tape, lv.gradient.pixels()));
            }
            scale(acc, 1.0 / static_cast<double>(end - start));
            optimizer_step(net, acc, state, opt);
        }

        const double tl = dataset_loss(net, loss, train);
        const double vl = dataset_loss(net, loss, valid);
        if (!std::isfinite(tl) || !std::isfinite(vl))
            fail(Errc::divergence, "non-finite loss after epoch " + std::to_string(epoch));
        rep.train_loss.push_back(tl);
        rep.valid_metric.push_back(vl);
        rep.stop_epoch = epoch;
        if (hook)
            hook(epoch, net);

        if (vl < best_valid) {
            best_valid = vl;
            best.net = net;
            best.optimizer = state;
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

/// Activations at the output of layer `layer` (0-based) for each image.
inline std::vector<std::vector<double>> encode(const Network& net, const std::vector<Image>& images, int layer)
{
    require(layer >= 0 && static_cast<std::size_t>(layer) < net.layers.size(), Errc::out_of_range,
            "layer index " + std::to_string(layer) + " outside [0, " + std::to_string(net.layers.size()) + ")");
    std::vector<std::vector<double>> out;
    out.reserve(images.size());
    for (const auto& img : images) {
        ForwardResult fr = forward(net, img.pixels(), Mode::eval);
        out.push_back(std::move(fr.tape.acts[static_cast<std::size_t>(layer) + 1]));
    }
    return out;
}

/// CSV with a `name` column followed by f0..f{width-1}.
inline void write_feature_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                              const std::vector<std::vector<double>>& rows, std::size_t width)
{
    require(names.size() == rows.size(), Errc::invalid_argument, "one name per feature row required");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(Errc::io_error, "cannot write " + path.string());
    out << "name";
    for (std::size_t k = 0; k < width; ++k)
        out << ",f" << k;
    out << "\n";
    char buf[32];
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i].size() == width, Errc::shape_mismatch, "feature row width mismatch");
        out << names[i];
        for (double v : rows[i]) {
            std::snprintf(buf, sizeof buf, "%.6g", v);
            out << ',' << buf;
        }
        out << "\n";
    }
    if (!out)
        fail(Errc::io_error, "write failed for " + path.string());
}

} // namespace percept
