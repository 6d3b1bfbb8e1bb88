#pragma once

#include "percept/elvae.hpp"
#include "percept/error.hpp"
#include "percept/image.hpp"
#include "percept/nn.hpp"
#include "percept/optim.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace percept {

using Json = nlohmann::json;

inline constexpr int checkpoint_version = 1;

enum class CheckpointKind { autoencoder, elvae, sr };

inline std::string_view checkpoint_kind_name(CheckpointKind k)
{
    switch (k) {
    case CheckpointKind::autoencoder: return "autoencoder";
    case CheckpointKind::elvae: return "elvae";
    case CheckpointKind::sr: return "sr";
    }
    return "autoencoder";
}

/// Trained model plus what is needed to resume or reuse it.
struct Checkpoint {
    CheckpointKind kind = CheckpointKind::autoencoder;
    std::uint64_t seed = 0;
    int image_height = 0, image_width = 0;
    Range range = Range::unit;
    std::string loss;        ///< loss identifier used in training
    double loss_scale = 1.0;
    Network model;           ///< autoencoder or sr
    OptimizerState optimizer;
    ElVaeModel vae;          ///< elvae
    OptimizerState encoder_optimizer, decoder_optimizer;
};

namespace detail {

inline void check_keys(const Json& j, std::initializer_list<std::string_view> allowed, const std::string& where)
{
    require(j.is_object(), Errc::config, where + " must be an object");
    for (const auto& [k, v] : j.items()) {
        bool ok = false;
        for (auto a : allowed)
            ok = ok || k == a;
        require(ok, Errc::config, where + ": unknown key '" + k + "'");
    }
}

template <class T>
T get_field(const Json& j, const char* key, const std::string& where)
{
    require(j.contains(key), Errc::config, where + ": missing '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        fail(Errc::config, where + ": '" + key + "' has the wrong type");
    }
}

template <class T>
T get_field(const Json& j, const char* key, const std::string& where, T fallback)
{
    return j.contains(key) ? get_field<T>(j, key, where) : fallback;
}

} // namespace detail

inline std::string_view range_name(Range r) { return r == Range::unit ? "unit" : "signed"; }

inline Range parse_range(std::string_view s)
{
    if (s == "unit")
        return Range::unit;
    if (s == "signed")
        return Range::signed_;
    fail(Errc::config, "range must be 'unit' or 'signed', got '" + std::string(s) + "'");
}

inline Json shape_to_json(const Shape& s) { return Json::array({s.channels, s.height, s.width}); }

inline Shape shape_from_json(const Json& j, const std::string& where)
{
    require(j.is_array() && j.size() == 3, Errc::config, where + ": shape must be [channels, height, width]");
    Shape s;
    try {
        s = Shape{j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
    } catch (const nlohmann::json::exception&) {
        fail(Errc::config, where + ": shape entries must be integers");
    }
    require(s.channels >= 1 && s.height >= 1 && s.width >= 1, Errc::config, where + ": shape entries must be positive");
    return s;
}

/// Layer spec in config syntax, e.g. {"type": "conv2d", "filters": 8, "kernel": 5, "stride": 2}.
inline Json layer_spec_to_json(const LayerSpec& s)
{
    switch (s.kind) {
    case LayerKind::dense: {
        Json j{{"type", "dense"}, {"units", s.out_dim}};
        if (s.in_dim > 0)
            j["inputs"] = s.in_dim;
        return j;
    }
    case LayerKind::conv2d:
        return Json{{"type", "conv2d"},
                    {"filters", s.filters},
                    {"kernel", s.kernel},
                    {"stride", s.stride},
                    {"padding", s.padding == Padding::same ? "same" : "valid"}};
    case LayerKind::upsample2: return Json{{"type", "upsample2"}};
    case LayerKind::activation: return Json{{"type", s.activation == Activation::relu ? "relu" : "tanh"}};
    case LayerKind::binarize_ste: return Json{{"type", "binarize"}};
    case LayerKind::reshape: return Json{{"type", "reshape"}, {"shape", shape_to_json(s.target)}};
    }
    return {};
}

inline LayerSpec layer_spec_from_json(const Json& j, const std::string& where)
{
    require(j.is_object(), Errc::config, where + " must be an object");
    const auto type = detail::get_field<std::string>(j, "type", where);
    if (type == "dense") {
        detail::check_keys(j, {"type", "units", "inputs"}, where);
        const int units = detail::get_field<int>(j, "units", where);
        const int inputs = detail::get_field<int>(j, "inputs", where, 0);
        require(units >= 1 && inputs >= 0, Errc::config, where + ": dense sizes must be positive");
        return LayerSpec::dense(inputs, units);
    }
    if (type == "conv2d") {
        detail::check_keys(j, {"type", "filters", "kernel", "stride", "padding"}, where);
        const auto pad = detail::get_field<std::string>(j, "padding", where, "same");
        require(pad == "same" || pad == "valid", Errc::config, where + ": padding must be 'same' or 'valid'");
        const int filters = detail::get_field<int>(j, "filters", where);
        const int kernel = detail::get_field<int>(j, "kernel", where);
        const int stride = detail::get_field<int>(j, "stride", where, 1);
        require(filters >= 1 && kernel >= 1 && kernel % 2 == 1 && stride >= 1, Errc::config,
                where + ": conv2d needs filters >= 1, odd kernel, stride >= 1");
        return LayerSpec::conv2d(filters, kernel, stride, pad == "same" ? Padding::same : Padding::valid);
    }
    if (type == "reshape") {
        detail::check_keys(j, {"type", "shape"}, where);
        return LayerSpec::reshape(shape_from_json(j.at("shape"), where));
    }
    detail::check_keys(j, {"type"}, where);
    if (type == "upsample2")
        return LayerSpec::upsample2();
    if (type == "relu")
        return LayerSpec::relu();
    if (type == "tanh")
        return LayerSpec::tanh();
    if (type == "binarize")
        return LayerSpec::binarize_ste();
    fail(Errc::config, where + ": unknown layer type '" + type + "'");
}

inline Json network_to_json(const Network& net)
{
    Json layers = Json::array();
    for (const auto& l : net.layers) {
        Json j{{"spec", layer_spec_to_json(l.spec)}};
        if (!l.weights.empty()) {
            j["weights"] = l.weights;
            j["bias"] = l.bias;
        }
        layers.push_back(std::move(j));
    }
    return Json{{"input", shape_to_json(net.input_shape)},
                {"residual", net.residual},
                {"seed", net.seed},
                {"generation", net.generation},
                {"layers", std::move(layers)}};
}

inline Network network_from_json(const Json& j, const std::string& where)
{
    detail::check_keys(j, {"input", "residual", "seed", "generation", "layers"}, where);
    Network net;
    net.input_shape = shape_from_json(j.at("input"), where + ".input");
    net.residual = detail::get_field<bool>(j, "residual", where, false);
    net.seed = detail::get_field<std::uint64_t>(j, "seed", where, 0);
    net.generation = detail::get_field<std::uint64_t>(j, "generation", where, 0);
    const Json& layers = j.at("layers");
    require(layers.is_array(), Errc::corrupt_data, where + ".layers must be an array");
    Shape cur = net.input_shape;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string lw = where + ".layers[" + std::to_string(i) + "]";
        detail::check_keys(layers[i], {"spec", "weights", "bias"}, lw);
        Layer l = make_layer(layer_spec_from_json(layers[i].at("spec"), lw + ".spec"), cur, i);
        if (!l.weights.empty()) {
            auto w = detail::get_field<std::vector<double>>(layers[i], "weights", lw);
            auto b = detail::get_field<std::vector<double>>(layers[i], "bias", lw);
            require(w.size() == l.weights.size() && b.size() == l.bias.size(), Errc::corrupt_data,
                    lw + ": parameter count does not match the layer");
            l.weights = std::move(w);
            l.bias = std::move(b);
        }
        cur = l.out;
        net.layers.push_back(std::move(l));
    }
    return net;
}

inline Json optimizer_state_to_json(const OptimizerState& s)
{
    auto grads = [](const std::vector<ParamGrad>& v) {
        Json a = Json::array();
        for (const auto& g : v)
            a.push_back(Json{{"weights", g.weights}, {"bias", g.bias}});
        return a;
    };
    return Json{{"step", s.step}, {"first", grads(s.first)}, {"second", grads(s.second)}};
}

inline OptimizerState optimizer_state_from_json(const Json& j, const Network& net, const std::string& where)
{
    detail::check_keys(j, {"step", "first", "second"}, where);
    OptimizerState s = make_optimizer_state(net);
    s.step = detail::get_field<long>(j, "step", where);
    auto load = [&](const char* key, std::vector<ParamGrad>& into) {
        const Json& a = j.at(key);
        require(a.is_array() && a.size() == into.size(), Errc::corrupt_data, where + "." + key + " layer count mismatch");
        for (std::size_t i = 0; i < into.size(); ++i) {
            auto w = a[i].at("weights").get<std::vector<double>>();
            auto b = a[i].at("bias").get<std::vector<double>>();
            require(w.size() == into[i].weights.size() && b.size() == into[i].bias.size(), Errc::corrupt_data,
                    where + "." + key + " size mismatch");
            into[i].weights = std::move(w);
            into[i].bias = std::move(b);
        }
    };
    load("first", s.first);
    load("second", s.second);
    return s;
}

inline Json checkpoint_to_json(const Checkpoint& c)
{
    Json j{{"format", "percept-checkpoint"},
           {"version", checkpoint_version},
           {"kind", checkpoint_kind_name(c.kind)},
           {"seed", c.seed},
           {"image", Json{{"height", c.image_height}, {"width", c.image_width}, {"range", range_name(c.range)}}},
           {"loss", c.loss},
           {"loss_scale", c.loss_scale}};
    if (c.kind != CheckpointKind::elvae) {
        j["model"] = network_to_json(c.model);
        j["optimizer"] = optimizer_state_to_json(c.optimizer);
    } else {
        j["latent_dim"] = c.vae.latent_dim;
        j["encoder"] = network_to_json(c.vae.encoder);
        j["decoder"] = network_to_json(c.vae.decoder);
        j["encoder_optimizer"] = optimizer_state_to_json(c.encoder_optimizer);
        j["decoder_optimizer"] = optimizer_state_to_json(c.decoder_optimizer);
    }
    return j;
}

inline Checkpoint checkpoint_from_json(const Json& j)
{
    const std::string where = "checkpoint";
    require(j.is_object() && j.value("format", "") == "percept-checkpoint", Errc::corrupt_data,
            "not a checkpoint file");
    const int version = detail::get_field<int>(j, "version", where);
    require(version == checkpoint_version, Errc::corrupt_data,
            "unsupported checkpoint version " + std::to_string(version));
    Checkpoint c;
    const auto kind = detail::get_field<std::string>(j, "kind", where);
    if (kind == "autoencoder")
        c.kind = CheckpointKind::autoencoder;
    else if (kind == "elvae")
        c.kind = CheckpointKind::elvae;
    else if (kind == "sr")
        c.kind = CheckpointKind::sr;
    else
        fail(Errc::corrupt_data, "unknown checkpoint kind '" + kind + "'");
    c.seed = detail::get_field<std::uint64_t>(j, "seed", where);
    const Json& img = j.at("image");
    c.image_height = detail::get_field<int>(img, "height", where + ".image");
    c.image_width = detail::get_field<int>(img, "width", where + ".image");
    c.range = parse_range(detail::get_field<std::string>(img, "range", where + ".image"));
    c.loss = detail::get_field<std::string>(j, "loss", where);
    c.loss_scale = detail::get_field<double>(j, "loss_scale", where);
    if (c.kind != CheckpointKind::elvae) {
        c.model = network_from_json(j.at("model"), "model");
        c.optimizer = optimizer_state_from_json(j.at("optimizer"), c.model, "optimizer");
    } else {
        c.vae.latent_dim = detail::get_field<int>(j, "latent_dim", where);
        c.vae.encoder = network_from_json(j.at("encoder"), "encoder");
        c.vae.decoder = network_from_json(j.at("decoder"), "decoder");
        c.encoder_optimizer = optimizer_state_from_json(j.at("encoder_optimizer"), c.vae.encoder, "encoder_optimizer");
        c.decoder_optimizer = optimizer_state_from_json(j.at("decoder_optimizer"), c.vae.decoder, "decoder_optimizer");
    }
    return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(Errc::io_error, "cannot write " + path.string());
    out << checkpoint_to_json(c).dump(1) << "\n";
    if (!out)
        fail(Errc::io_error, "write failed for " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(Errc::file_not_found, "cannot open checkpoint " + path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::corrupt_data, path.string() + ": " + e.what());
    }
    try {
        return checkpoint_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::corrupt_data, path.string() + ": " + e.what());
    }
}

} // namespace percept
