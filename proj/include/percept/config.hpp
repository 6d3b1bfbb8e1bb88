#pragma once

#include "percept/checkpoint.hpp"
#include "percept/elvae.hpp"
#include "percept/losses.hpp"
#include "percept/mmd.hpp"
#include "percept/optim.hpp"
#include "percept/selfcheck.hpp"
#include "percept/train.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace percept {

/// Run configuration shared by the CLI subcommands. Every section is
/// optional in the file; each command checks the sections it needs.
struct RunConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "out";

    struct Data {
        std::string train, valid;
        Range range = Range::signed_;
        int grid = 8; ///< validation images shown in per-epoch reconstruction grids
    };
    struct Model {
        CheckpointKind kind = CheckpointKind::autoencoder;
        std::vector<LayerSpec> layers;  ///< autoencoder / sr
        std::vector<LayerSpec> encoder; ///< elvae
        std::vector<LayerSpec> decoder; ///< elvae
        InitOptions init;
        bool residual = false;
    };
    struct Loss {
        LossFunction fn;
        bool normalize = false;
        int scale_pairs = 10000;
        bool explicit_range = false; ///< dynamic_range given in the file
    };
    struct Train {
        EarlyStop stop;
        int steps = 200;          ///< sr only: optimizer steps
        int patch = 32;           ///< sr only: HR patch side
        int patches_per_image = 16;
    };
    struct Sr {
        std::string hr_dir;
        int scale = 4;
        int border = -1; ///< -1: same as scale
        std::vector<std::string> methods{"bicubic"};
        std::map<std::string, std::string> models; ///< method name -> sr checkpoint
    };
    struct Candidate {
        double C = 0;
        std::string samples;    ///< directory of images, or
        std::string checkpoint; ///< elvae checkpoint sampled with `count` draws
    };
    struct Select {
        std::string reference;
        std::vector<Candidate> candidates;
        BandwidthPolicy bandwidth;
        int count = 64;
    };

    Data data;
    std::optional<Model> model;
    Loss loss;
    OptimizerConfig optimizer;
    Train train;
    ElVaeConfig elvae;
    Sr sr;
    Select select;
    GradCheckOptions grad_check;
    std::vector<std::string> sections; ///< top-level keys present in the file

    bool has(std::string_view s) const { return std::find(sections.begin(), sections.end(), s) != sections.end(); }
};

namespace detail {

inline std::vector<LayerSpec> layers_from_json(const Json& j, const std::string& where)
{
    require(j.is_array() && !j.empty(), Errc::config, where + " must be a nonempty array of layers");
    std::vector<LayerSpec> out;
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(layer_spec_from_json(j[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

template <class T>
void read_opt(const Json& j, const char* key, const std::string& where, T& into)
{
    if (j.contains(key))
        into = get_field<T>(j, key, where);
}

inline RunConfig::Model model_from_json(const Json& j)
{
    const std::string w = "model";
    check_keys(j, {"kind", "layers", "encoder", "decoder", "init", "residual"}, w);
    RunConfig::Model m;
    const auto kind = get_field<std::string>(j, "kind", w, "autoencoder");
    if (kind == "autoencoder")
        m.kind = CheckpointKind::autoencoder;
    else if (kind == "elvae")
        m.kind = CheckpointKind::elvae;
    else if (kind == "sr")
        m.kind = CheckpointKind::sr;
    else
        fail(Errc::config, "model.kind must be autoencoder, elvae or sr, got '" + kind + "'");
    if (m.kind == CheckpointKind::elvae) {
        require(!j.contains("layers"), Errc::config, "model.layers is not used by elvae; give encoder and decoder");
        m.encoder = layers_from_json(j.contains("encoder") ? j.at("encoder") : Json(), "model.encoder");
        m.decoder = layers_from_json(j.contains("decoder") ? j.at("decoder") : Json(), "model.decoder");
    } else {
        require(!j.contains("encoder") && !j.contains("decoder"), Errc::config,
                "model.encoder/decoder are only used by elvae");
        m.layers = layers_from_json(j.contains("layers") ? j.at("layers") : Json(), "model.layers");
    }
    if (j.contains("init")) {
        const Json& i = j.at("init");
        check_keys(i, {"scheme", "stddev"}, "model.init");
        const auto scheme = get_field<std::string>(i, "scheme", "model.init");
        if (scheme == "fan_in")
            m.init.scheme = InitOptions::Scheme::fan_in;
        else if (scheme == "gaussian")
            m.init = InitOptions::gaussian(get_field<double>(i, "stddev", "model.init", 0.001));
        else
            fail(Errc::config, "model.init.scheme must be fan_in or gaussian");
        require(m.init.stddev >= 0, Errc::config, "model.init.stddev must be non-negative");
    }
    read_opt(j, "residual", w, m.residual);
    return m;
}

inline RunConfig::Loss loss_from_json(const Json& j)
{
    const std::string w = "loss";
    check_keys(j, {"name", "window", "k1", "k2", "scales", "alpha", "beta", "gamma", "dynamic_range", "normalize",
                   "scale_pairs", "scale"},
               w);
    RunConfig::Loss l;
    l.fn = LossFunction::make(parse_loss_kind(get_field<std::string>(j, "name", w)));
    MetricParams& p = l.fn.params;
    read_opt(j, "window", w, p.window_size);
    read_opt(j, "k1", w, p.k1);
    read_opt(j, "k2", w, p.k2);
    if (j.contains("scales"))
        p.with_scales(get_field<int>(j, "scales", w));
    read_opt(j, "alpha", w, p.alpha);
    read_opt(j, "beta", w, p.beta);
    read_opt(j, "gamma", w, p.gamma);
    if (j.contains("dynamic_range")) {
        p.dynamic_range = get_field<double>(j, "dynamic_range", w);
        l.explicit_range = true;
    }
    read_opt(j, "normalize", w, l.normalize);
    read_opt(j, "scale_pairs", w, l.scale_pairs);
    read_opt(j, "scale", w, l.fn.scale);
    require(p.window_size >= 3 && p.window_size % 2 == 1, Errc::config, "loss.window must be odd and >= 3");
    require(p.scales >= 1 && p.beta.size() == static_cast<std::size_t>(p.scales) &&
                p.gamma.size() == static_cast<std::size_t>(p.scales),
            Errc::config, "loss.beta and loss.gamma need one entry per scale");
    require(p.k1 > 0 && p.k2 > 0 && p.dynamic_range > 0, Errc::config, "loss constants must be positive");
    require(l.scale_pairs >= 1 && l.fn.scale > 0, Errc::config, "loss.scale_pairs and loss.scale must be positive");
    require(!(l.normalize && j.contains("scale")), Errc::config, "loss.scale and loss.normalize are exclusive");
    return l;
}

inline OptimizerConfig optimizer_from_json(const Json& j)
{
    const std::string w = "optimizer";
    const auto kind = get_field<std::string>(j, "kind", w);
    OptimizerConfig o;
    if (kind == "sgd") {
        check_keys(j, {"kind", "lr", "momentum", "weight_decay", "batch_size"}, w);
        o = OptimizerConfig::sgd(get_field<double>(j, "lr", w));
    } else if (kind == "adam") {
        check_keys(j, {"kind", "lr", "beta1", "beta2", "eps", "weight_decay", "batch_size"}, w);
        o = OptimizerConfig::adam(get_field<double>(j, "lr", w));
    } else {
        fail(Errc::config, "optimizer.kind must be sgd or adam");
    }
    read_opt(j, "momentum", w, o.momentum);
    read_opt(j, "weight_decay", w, o.weight_decay);
    read_opt(j, "beta1", w, o.beta1);
    read_opt(j, "beta2", w, o.beta2);
    read_opt(j, "eps", w, o.eps);
    read_opt(j, "batch_size", w, o.batch_size);
    try {
        o.validate();
    } catch (const Error& e) {
        fail(Errc::config, std::string("optimizer: ") + e.what());
    }
    return o;
}

inline GradCheckOptions grad_check_from_json(const Json& j)
{
    const std::string w = "grad_check";
    check_keys(j, {"pairs", "ssim_sizes", "ms_size", "ms_scales", "ms_pixels", "eps", "corrupt"}, w);
    GradCheckOptions g;
    read_opt(j, "pairs", w, g.pairs);
    read_opt(j, "ssim_sizes", w, g.ssim_sizes);
    read_opt(j, "ms_size", w, g.ms_size);
    read_opt(j, "ms_scales", w, g.ms_scales);
    read_opt(j, "ms_pixels", w, g.ms_pixels);
    read_opt(j, "eps", w, g.eps);
    read_opt(j, "corrupt", w, g.corrupt);
    g.validate();
    if (!g.corrupt.empty()) {
        const auto names = grad_check_names(g);
        require(std::find(names.begin(), names.end(), g.corrupt) != names.end(), Errc::config,
                "grad_check.corrupt names no check: '" + g.corrupt + "'");
    }
    return g;
}

} // namespace detail

/// Parse and schema-check a run configuration. Unknown keys are rejected at
/// every level. Paths are checked by the commands that use them.
inline RunConfig parse_run_config(const Json& j)
{
    detail::check_keys(j, {"seed", "out_dir", "data", "model", "loss", "optimizer", "train", "elvae", "sr", "select",
                           "grad_check"},
                       "config");
    RunConfig c;
    for (const auto& [k, v] : j.items())
        c.sections.push_back(k);
    detail::read_opt(j, "seed", "config", c.seed);
    detail::read_opt(j, "out_dir", "config", c.out_dir);
    require(!c.out_dir.empty(), Errc::config, "out_dir is empty");

    if (j.contains("data")) {
        const Json& d = j.at("data");
        detail::check_keys(d, {"train", "valid", "range", "grid"}, "data");
        detail::read_opt(d, "train", "data", c.data.train);
        detail::read_opt(d, "valid", "data", c.data.valid);
        if (d.contains("range"))
            c.data.range = parse_range(detail::get_field<std::string>(d, "range", "data"));
        detail::read_opt(d, "grid", "data", c.data.grid);
        require(c.data.grid >= 0, Errc::config, "data.grid must be non-negative");
    }
    if (j.contains("model"))
        c.model = detail::model_from_json(j.at("model"));
    if (j.contains("loss"))
        c.loss = detail::loss_from_json(j.at("loss"));
    if (!c.loss.explicit_range)
        c.loss.fn.params.dynamic_range = range_width(c.data.range);
    if (j.contains("optimizer"))
        c.optimizer = detail::optimizer_from_json(j.at("optimizer"));
    if (j.contains("train")) {
        const Json& t = j.at("train");
        detail::check_keys(t, {"patience", "max_epochs", "steps", "patch", "patches_per_image"}, "train");
        detail::read_opt(t, "patience", "train", c.train.stop.patience);
        detail::read_opt(t, "max_epochs", "train", c.train.stop.max_epochs);
        detail::read_opt(t, "steps", "train", c.train.steps);
        detail::read_opt(t, "patch", "train", c.train.patch);
        detail::read_opt(t, "patches_per_image", "train", c.train.patches_per_image);
        require(c.train.stop.patience >= 0 && c.train.stop.max_epochs >= 1 && c.train.steps >= 0 &&
                    c.train.patch >= 1 && c.train.patches_per_image >= 1,
                Errc::config, "train: values out of range");
    }
    if (j.contains("elvae")) {
        const Json& e = j.at("elvae");
        detail::check_keys(e, {"C", "latent_dim", "mc_samples"}, "elvae");
        detail::read_opt(e, "C", "elvae", c.elvae.C);
        detail::read_opt(e, "latent_dim", "elvae", c.elvae.latent_dim);
        detail::read_opt(e, "mc_samples", "elvae", c.elvae.mc_samples);
        try {
            c.elvae.validate();
        } catch (const Error& err) {
            fail(Errc::config, std::string("elvae: ") + err.what());
        }
    }
    if (j.contains("sr")) {
        const Json& s = j.at("sr");
        detail::check_keys(s, {"hr_dir", "scale", "border", "methods", "models"}, "sr");
        detail::read_opt(s, "hr_dir", "sr", c.sr.hr_dir);
        detail::read_opt(s, "scale", "sr", c.sr.scale);
        detail::read_opt(s, "border", "sr", c.sr.border);
        detail::read_opt(s, "methods", "sr", c.sr.methods);
        detail::read_opt(s, "models", "sr", c.sr.models);
        require(c.sr.scale >= 1 && c.sr.border >= -1, Errc::config, "sr.scale must be >= 1 and sr.border >= 0");
        for (const auto& m : c.sr.methods)
            require(m == "bicubic" || m == "nearest", Errc::config,
                    "sr.methods entries must be bicubic or nearest (models go in sr.models), got '" + m + "'");
        for (const auto& [name, path] : c.sr.models)
            require(!name.empty() && name != "bicubic" && name != "nearest" && name.find(',') == std::string::npos,
                    Errc::config, "bad sr.models name '" + name + "'");
    }
    if (j.contains("select")) {
        const Json& s = j.at("select");
        detail::check_keys(s, {"reference", "candidates", "bandwidth", "max_pairs", "count"}, "select");
        detail::read_opt(s, "reference", "select", c.select.reference);
        detail::read_opt(s, "count", "select", c.select.count);
        detail::read_opt(s, "max_pairs", "select", c.select.bandwidth.max_pairs);
        if (s.contains("bandwidth")) {
            const Json& b = s.at("bandwidth");
            if (b.is_string()) {
                require(b.get<std::string>() == "median", Errc::config, "select.bandwidth must be 'median' or a number");
            } else {
                require(b.is_number() && b.get<double>() > 0, Errc::config,
                        "select.bandwidth must be 'median' or a positive number");
                c.select.bandwidth.median = false;
                c.select.bandwidth.fixed = b.get<double>();
            }
        }
        if (s.contains("candidates")) {
            const Json& cs = s.at("candidates");
            require(cs.is_array(), Errc::config, "select.candidates must be an array");
            for (std::size_t i = 0; i < cs.size(); ++i) {
                const std::string w = "select.candidates[" + std::to_string(i) + "]";
                detail::check_keys(cs[i], {"C", "samples", "checkpoint"}, w);
                RunConfig::Candidate cand;
                cand.C = detail::get_field<double>(cs[i], "C", w);
                detail::read_opt(cs[i], "samples", w, cand.samples);
                detail::read_opt(cs[i], "checkpoint", w, cand.checkpoint);
                require(cand.samples.empty() != cand.checkpoint.empty(), Errc::config,
                        w + ": give exactly one of samples or checkpoint");
                for (const auto& prev : c.select.candidates)
                    require(prev.C != cand.C, Errc::config, w + ": duplicate C");
                c.select.candidates.push_back(std::move(cand));
            }
        }
        require(c.select.count >= 2, Errc::config, "select.count must be >= 2");
    }
    if (j.contains("grad_check"))
        c.grad_check = detail::grad_check_from_json(j.at("grad_check"));
    c.grad_check.seed = c.seed;
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), Errc::config, "cannot open config " + path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::config, path.string() + ": " + e.what());
    }
    try {
        return parse_run_config(j);
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::config, path.string() + ": " + e.what());
    }
}

} // namespace percept
