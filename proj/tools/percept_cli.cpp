// percept: command-line entry point.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

#include <percept.hpp>
#include <percept/config.hpp>
#include <percept/selfcheck.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace percept;

namespace {

// Raised for anything the user must fix in the invocation or config.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <class F>
auto setup(F&& f)
{
    try {
        return f();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
}

std::string num(double v) { return format_number(v); }

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
};

RunConfig load_config(const std::string& path, const Overrides& ov)
{
    return setup([&] {
        RunConfig c = path.empty() ? parse_run_config(Json::object()) : load_run_config(path);
        if (ov.seed)
            c.seed = *ov.seed;
        if (ov.out_dir)
            c.out_dir = *ov.out_dir;
        c.grad_check.seed = c.seed;
        return c;
    });
}

void require_dir(const std::string& path, const std::string& key)
{
    require(!path.empty(), Errc::config, key + " is not set");
    require(fs::is_directory(path), Errc::config, key + ": directory not found: " + path);
}

void require_file(const std::string& path, const std::string& key)
{
    require(!path.empty(), Errc::config, key + " is not set");
    require(fs::is_regular_file(path), Errc::config, key + ": file not found: " + path);
}

struct Dataset {
    std::vector<std::string> names;
    std::vector<Image> images;
};

// Every image in `dir` (sorted by name) as gray, mapped to `range`.
Dataset load_dataset(const fs::path& dir, Range range, bool same_size = true)
{
    Dataset d;
    for (const auto& f : list_images(dir)) {
        Image img = load_gray(f);
        if (range != Range::unit)
            img = rescale_range(img, range);
        if (same_size && !d.images.empty())
            require(img.height() == d.images.front().height() && img.width() == d.images.front().width(),
                    Errc::shape_mismatch, f.string() + " differs in size from " + d.names.front());
        d.names.push_back(f.filename().string());
        d.images.push_back(std::move(img));
    }
    return d;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(Errc::io_error, "cannot write " + path.string());
    out << text;
    if (!out)
        fail(Errc::io_error, "write failed for " + path.string());
}

std::string epoch_name(int epoch)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "epoch_%03d.pgm", epoch);
    return buf;
}

// Top row: originals. Bottom row: reconstructions.
void save_grid(const fs::path& path, const std::vector<Image>& originals, const std::vector<Image>& recon)
{
    if (originals.empty())
        return;
    std::vector<Image> cells = originals;
    cells.insert(cells.end(), recon.begin(), recon.end());
    save_image(tile_grid(cells, static_cast<int>(originals.size())), path);
}

// ---- compare ---------------------------------------------------------------

int cmd_compare(const std::string& ref_path, const std::string& test_path, const std::string& metrics, int window,
                int scales)
{
    std::vector<std::string> wanted;
    setup([&] {
        std::stringstream ss(metrics);
        std::string m;
        while (std::getline(ss, m, ','))
            if (!m.empty()) {
                require(m == "psnr" || m == "ssim" || m == "ms-ssim" || m == "mse" || m == "mae", Errc::config,
                        "unknown metric '" + m + "'");
                wanted.push_back(m);
            }
        require(!wanted.empty(), Errc::config, "no metrics requested");
        require(window >= 3 && window % 2 == 1, Errc::config, "window must be odd and >= 3");
        require(scales >= 1, Errc::config, "scales must be >= 1");
        return 0;
    });
    const Image x = load_gray(ref_path), y = load_gray(test_path);
    if (x.height() != y.height() || x.width() != y.width())
        throw UsageError("dimension mismatch: " + std::to_string(x.height()) + "x" + std::to_string(x.width()) +
                         " vs " + std::to_string(y.height()) + "x" + std::to_string(y.width()));
    MetricParams p = MetricParams::ssim().with_window(window);
    MetricParams ms = p;
    ms.with_scales(scales);
    std::cout << "metric,value\n";
    for (const auto& m : wanted) {
        if (m == "psnr")
            std::cout << "psnr_db," << num(psnr(x, y, 1.0)) << "\n";
        else if (m == "ssim")
            std::cout << "ssim," << num(ssim(x, y, p).value) << "\n";
        else if (m == "ms-ssim") {
            if (max_feasible_scales(x.height(), x.width(), window) >= scales)
                std::cout << "ms_ssim," << num(ms_ssim(x, y, ms).value) << "\n";
            else
                std::cout << "ms_ssim,n/a\n";
        } else if (m == "mse")
            std::cout << "mse," << num(mse(x, y).value) << "\n";
        else
            std::cout << "mae," << num(mae(x, y).value) << "\n";
    }
    return 0;
}

// ---- grad-check ------------------------------------------------------------

int cmd_grad_check(const RunConfig& cfg)
{
    int failed = 0;
    run_grad_checks(cfg.grad_check, [&](const CheckResult& r) {
        std::cout << (r.pass() ? "PASS " : "FAIL ") << r.name << " worst " << num(r.worst) << " tol "
                  << num(r.tolerance) << std::endl;
        failed += r.pass() ? 0 : 1;
    });
    if (failed) {
        std::cout << failed << " check(s) failed\n";
        return 1;
    }
    std::cout << "all checks passed\n";
    return 0;
}

// ---- train -----------------------------------------------------------------

Checkpoint base_checkpoint(const RunConfig& cfg, const Image& like, double loss_scale)
{
    Checkpoint c;
    c.seed = cfg.seed;
    c.image_height = like.height();
    c.image_width = like.width();
    c.range = cfg.data.range;
    c.loss = std::string(loss_name(cfg.loss.fn.kind));
    c.loss_scale = loss_scale;
    return c;
}

int train_autoencoder_cmd(const RunConfig& cfg, const Dataset& train, const Dataset& valid, const fs::path& out)
{
    const RunConfig::Model& m = *cfg.model;
    const Image& like = train.images.front();
    Architecture arch{Shape{1, like.height(), like.width()}, m.layers, m.init, m.residual};
    setup([&] {
        const Network probe = arch.build(cfg.seed);
        require(probe.output_shape().size() == like.size(), Errc::config,
                "model output has " + std::to_string(probe.output_shape().size()) + " values, images have " +
                    std::to_string(like.size()));
        return 0;
    });

    LossFunction loss = cfg.loss.fn;
    if (cfg.loss.normalize)
        loss.scale = estimate_loss_scale(loss, train.images, cfg.loss.scale_pairs, stream_seed(cfg.seed, "loss-scale"));

    fs::create_directories(out / "grids");
    const std::vector<Image> shown(valid.images.begin(),
                                   valid.images.begin() + std::min<std::ptrdiff_t>(cfg.data.grid, valid.images.size()));
    auto grid = [&](int epoch, const Network& net) {
        std::vector<Image> rec;
        for (const auto& x : shown)
            rec.push_back(clip_to_range(reconstruct(net, x)));
        save_grid(out / "grids" / epoch_name(epoch), shown, rec);
    };
    grid(0, arch.build(cfg.seed));
    std::cout << "loss " << loss_name(loss.kind) << " scale " << num(loss.scale) << "\n";
    const TrainResult r = train_autoencoder(arch, loss, train.images, valid.images, cfg.optimizer, cfg.train.stop,
                                            cfg.seed, [&](int epoch, const Network& net) {
                                                grid(epoch, net);
                                            });

    std::ostringstream csv;
    csv << "epoch,train_loss,valid_loss\n0," << num(r.report.initial_train_loss) << ','
        << num(r.report.initial_valid_metric) << "\n";
    for (std::size_t e = 0; e < r.report.train_loss.size(); ++e) {
        csv << e + 1 << ',' << num(r.report.train_loss[e]) << ',' << num(r.report.valid_metric[e]) << "\n";
        std::cout << "epoch " << e + 1 << " train " << num(r.report.train_loss[e]) << " valid "
                  << num(r.report.valid_metric[e]) << "\n";
    }
    write_text(out / "report.csv", csv.str());
    Checkpoint c = base_checkpoint(cfg, like, loss.scale);
    c.model = r.net;
    c.optimizer = r.optimizer;
    save_checkpoint(c, out / "checkpoint.json");
    std::cout << "initial train " << num(r.report.initial_train_loss) << " final train "
              << num(r.report.train_loss.empty() ? r.report.initial_train_loss : r.report.train_loss.back()) << "\n"
              << "stop_epoch " << r.report.stop_epoch << " best_epoch " << r.report.best_epoch << "\n";
    std::cerr << "wall_seconds " << num(r.report.wall_seconds) << "\n";
    return 0;
}

int train_elvae_cmd(const RunConfig& cfg, const Dataset& train, const Dataset& valid, const fs::path& out)
{
    const RunConfig::Model& m = *cfg.model;
    const Image& like = train.images.front();
    const int d = cfg.elvae.latent_dim;
    Architecture enc{Shape{1, like.height(), like.width()}, m.encoder, m.init, false};
    Architecture dec{Shape{d, 1, 1}, m.decoder, m.init, false};
    setup([&] {
        require(enc.build(0).output_shape().size() == 2 * static_cast<std::size_t>(d), Errc::config,
                "model.encoder must emit 2 x latent_dim values");
        require(dec.build(0).output_shape().size() == like.size(), Errc::config,
                "model.decoder output must match the image size");
        return 0;
    });
    ElVaeConfig ecfg = cfg.elvae;
    ecfg.loss = cfg.loss.fn;
    ecfg.normalize = cfg.loss.normalize;
    ecfg.scale_pairs = cfg.loss.scale_pairs;

    fs::create_directories(out / "grids");
    const std::vector<Image> shown(valid.images.begin(),
                                   valid.images.begin() + std::min<std::ptrdiff_t>(cfg.data.grid, valid.images.size()));
    const ElVaeTrainResult r =
        train_elvae(enc, dec, ecfg, train.images, valid.images, cfg.optimizer, cfg.train.stop, cfg.seed,
                    [&](int epoch, const ElVaeModel& model) {
                        std::vector<Image> rec;
                        for (const auto& x : shown)
                            rec.push_back(reconstruct_mode(model.encoder, model.decoder, x, d));
                        save_grid(out / "grids" / epoch_name(epoch), shown, rec);
                    });

    std::ostringstream csv;
    csv << "epoch,train_objective,valid_objective,train_kl,train_reconstruction\n0,"
        << num(r.report.initial_train_loss) << ',' << num(r.report.initial_valid_metric) << ',' << num(r.initial_kl)
        << ',' << num(r.report.initial_train_loss - r.initial_kl) << "\n";
    for (std::size_t e = 0; e < r.report.train_loss.size(); ++e) {
        csv << e + 1 << ',' << num(r.report.train_loss[e]) << ',' << num(r.report.valid_metric[e]) << ','
            << num(r.kl[e]) << ',' << num(r.reconstruction[e]) << "\n";
        std::cout << "epoch " << e + 1 << " objective " << num(r.report.train_loss[e]) << " kl " << num(r.kl[e])
                  << " valid " << num(r.report.valid_metric[e]) << "\n";
    }
    write_text(out / "report.csv", csv.str());
    Checkpoint c = base_checkpoint(cfg, like, r.loss_scale);
    c.kind = CheckpointKind::elvae;
    c.vae = r.model;
    c.encoder_optimizer = r.encoder_state;
    c.decoder_optimizer = r.decoder_state;
    save_checkpoint(c, out / "checkpoint.json");

    const auto samples = sample_prior(r.model.decoder, cfg.data.grid > 0 ? cfg.data.grid : 8,
                                      stream_seed(cfg.seed, "train-samples"), like.height(), like.width(),
                                      cfg.data.range);
    save_image(tile_grid(samples, static_cast<int>(samples.size())), out / "grids" / "prior_samples.pgm");
    std::cout << "loss_scale " << num(r.loss_scale) << "\nstop_epoch " << r.report.stop_epoch << " best_epoch "
              << r.report.best_epoch << "\n";
    std::cerr << "wall_seconds " << num(r.report.wall_seconds) << "\n";
    return 0;
}

int train_sr_cmd(const RunConfig& cfg, const fs::path& out)
{
    const RunConfig::Model& m = *cfg.model;
    const int p = cfg.train.patch, s = cfg.sr.scale;
    Architecture arch{Shape{1, p, p}, m.layers, m.init, m.residual};
    setup([&] {
        require(p % s == 0, Errc::config, "train.patch must be a multiple of sr.scale");
        require(arch.build(0).output_shape().size() == static_cast<std::size_t>(p * p), Errc::config,
                "sr model must map a patch to a same-size output");
        return 0;
    });
    const Dataset hr = load_dataset(cfg.data.train, Range::unit, false);
    require(!hr.images.empty(), Errc::invalid_argument, "no training images in " + cfg.data.train);
    std::vector<Image> patches;
    for (std::size_t i = 0; i < hr.images.size(); ++i) {
        auto ps = extract_patches(hr.images[i], p, cfg.train.patches_per_image, stream_seed(cfg.seed, "sr-patches", i));
        patches.insert(patches.end(), ps.begin(), ps.end());
    }
    LossFunction loss = cfg.loss.fn;
    if (!cfg.loss.explicit_range)
        loss.params.dynamic_range = 1.0; // SR works on [0,1] Y data
    if (cfg.loss.normalize)
        loss.scale = estimate_loss_scale(loss, patches, cfg.loss.scale_pairs, stream_seed(cfg.seed, "loss-scale"));

    fs::create_directories(out);
    const SrTrainResult r = train_sr(arch, loss, patches, s, cfg.optimizer, cfg.train.steps, cfg.seed);
    std::ostringstream csv;
    csv << "step,batch_loss\n";
    for (std::size_t i = 0; i < r.batch_loss.size(); ++i)
        csv << i + 1 << ',' << num(r.batch_loss[i]) << "\n";
    write_text(out / "report.csv", csv.str());

    Checkpoint c;
    c.kind = CheckpointKind::sr;
    c.seed = cfg.seed;
    c.image_height = c.image_width = p;
    c.range = Range::unit;
    c.loss = std::string(loss_name(loss.kind));
    c.loss_scale = loss.scale;
    c.model = r.net;
    c.optimizer = r.optimizer;
    save_checkpoint(c, out / "checkpoint.json");

    if (!cfg.data.valid.empty()) {
        const SrReport rep = evaluate_dir(cfg.data.valid, {SrMethod::bicubic(), SrMethod::model("model", r.net)}, s,
                                          cfg.sr.border < 0 ? s : cfg.sr.border);
        emit_report(rep, ReportFormat::csv, out / "valid_report.csv");
        std::cout << render_report(rep, ReportFormat::markdown);
    }
    std::cout << "steps " << r.batch_loss.size() << " first " << num(r.batch_loss.empty() ? 0 : r.batch_loss.front())
              << " last " << num(r.batch_loss.empty() ? 0 : r.batch_loss.back()) << "\n";
    std::cerr << "wall_seconds " << num(r.wall_seconds) << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg)
{
    setup([&] {
        require(cfg.model.has_value(), Errc::config, "train needs a model section");
        require(cfg.has("loss"), Errc::config, "train needs a loss section");
        require(cfg.has("optimizer"), Errc::config, "train needs an optimizer section");
        require_dir(cfg.data.train, "data.train");
        if (cfg.model->kind != CheckpointKind::sr || !cfg.data.valid.empty())
            require_dir(cfg.data.valid, "data.valid");
        if (cfg.model->kind == CheckpointKind::elvae)
            require(cfg.has("elvae"), Errc::config, "elvae model needs an elvae section");
        if (cfg.model->kind == CheckpointKind::sr)
            require(cfg.has("sr"), Errc::config, "sr model needs an sr section (scale)");
        return 0;
    });
    const fs::path out = cfg.out_dir;
    if (cfg.model->kind == CheckpointKind::sr)
        return train_sr_cmd(cfg, out);
    const Dataset train = load_dataset(cfg.data.train, cfg.data.range);
    const Dataset valid = load_dataset(cfg.data.valid, cfg.data.range);
    require(!train.images.empty() && !valid.images.empty(), Errc::invalid_argument,
            "data.train and data.valid must contain images");
    require(train.images.front().height() == valid.images.front().height() &&
                train.images.front().width() == valid.images.front().width(),
            Errc::shape_mismatch, "training and validation images differ in size");
    if (cfg.model->kind == CheckpointKind::elvae)
        return train_elvae_cmd(cfg, train, valid, out);
    return train_autoencoder_cmd(cfg, train, valid, out);
}

// ---- select-c --------------------------------------------------------------

SampleSet images_to_set(const std::vector<Image>& images, const std::string& what)
{
    require(images.size() >= 2, Errc::too_small, what + " needs at least two images");
    return SampleSet::from_images(images);
}

int cmd_select_c(const RunConfig& cfg)
{
    std::map<std::size_t, Checkpoint> models;
    setup([&] {
        require_dir(cfg.select.reference, "select.reference");
        require(cfg.select.candidates.size() >= 2, Errc::config, "select needs at least two candidates");
        for (std::size_t i = 0; i < cfg.select.candidates.size(); ++i) {
            const auto& c = cfg.select.candidates[i];
            const std::string key = "select.candidates[" + std::to_string(i) + "]";
            if (!c.samples.empty()) {
                require_dir(c.samples, key + ".samples");
                continue;
            }
            require_file(c.checkpoint, key + ".checkpoint");
            Checkpoint ck = load_checkpoint(c.checkpoint);
            require(ck.kind == CheckpointKind::elvae, Errc::wrong_kind,
                    c.checkpoint + " is a checkpoint of kind " + std::string(checkpoint_kind_name(ck.kind)) +
                        ", need elvae");
            models.emplace(i, std::move(ck));
        }
        return 0;
    });
    const Range range = cfg.data.range;
    const Dataset ref = load_dataset(cfg.select.reference, range);
    const SampleSet ref_set = images_to_set(ref.images, "select.reference");
    std::map<double, SampleSet> cands;
    for (std::size_t i = 0; i < cfg.select.candidates.size(); ++i) {
        const auto& c = cfg.select.candidates[i];
        std::vector<Image> imgs;
        if (!c.samples.empty()) {
            imgs = load_dataset(c.samples, range).images;
        } else {
            const Checkpoint& ck = models.at(i);
            imgs = sample_prior(ck.vae.decoder, cfg.select.count, stream_seed(cfg.seed, "select-samples", i),
                                ck.image_height, ck.image_width, range);
        }
        cands.emplace(c.C, images_to_set(imgs, "candidate C=" + num(c.C)));
    }
    BandwidthPolicy policy = cfg.select.bandwidth;
    policy.seed = cfg.seed;
    const TradeoffSelection sel = select_tradeoff(ref_set, cands, policy);

    std::ostringstream table;
    table << "C,mmd2\n";
    for (const auto& [c, v] : sel.mmd2)
        table << num(c) << ',' << num(v) << "\n";
    table << "\nC_a,C_b,relative_similarity\n";
    for (const auto& [pair, v] : sel.pairwise)
        table << num(pair.first) << ',' << num(pair.second) << ',' << num(v) << "\n";
    table << "\nbandwidth," << num(sel.bandwidth) << "\nchosen_C," << num(sel.chosen) << "\n";
    fs::create_directories(cfg.out_dir);
    write_text(fs::path(cfg.out_dir) / "selection.csv", table.str());
    std::cout << table.str();
    return 0;
}

// ---- sample ----------------------------------------------------------------

int cmd_sample(const std::string& checkpoint, int n, const RunConfig& cfg)
{
    const Checkpoint ck = setup([&] {
        require(n >= 0, Errc::config, "-n must be non-negative");
        require_file(checkpoint, "--checkpoint");
        Checkpoint c = load_checkpoint(checkpoint);
        require(c.kind == CheckpointKind::elvae, Errc::wrong_kind,
                checkpoint + " is a " + std::string(checkpoint_kind_name(c.kind)) +
                    " checkpoint; sampling needs an elvae checkpoint");
        return c;
    });
    const auto imgs = sample_prior(ck.vae.decoder, n, cfg.seed, ck.image_height, ck.image_width, ck.range);
    if (n == 0) {
        std::cout << "0 samples\n";
        return 0;
    }
    const fs::path out = cfg.out_dir;
    fs::create_directories(out);
    for (int i = 0; i < n; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "sample_%03d.pgm", i);
        save_image(imgs[static_cast<std::size_t>(i)], out / name);
    }
    std::cout << n << " samples written to " << out.string() << "\n";
    return 0;
}

// ---- sr-eval ---------------------------------------------------------------

int cmd_sr_eval(const RunConfig& cfg)
{
    std::vector<SrMethod> methods = setup([&] {
        require(cfg.has("sr"), Errc::config, "sr-eval needs an sr section");
        require_dir(cfg.sr.hr_dir, "sr.hr_dir");
        std::vector<SrMethod> ms;
        for (const auto& m : cfg.sr.methods)
            ms.push_back(m == "bicubic" ? SrMethod::bicubic() : SrMethod::nearest());
        for (const auto& [name, path] : cfg.sr.models) {
            require_file(path, "sr.models." + name);
            Checkpoint c = load_checkpoint(path);
            require(c.kind == CheckpointKind::sr, Errc::wrong_kind,
                    path + " is a checkpoint of kind " + std::string(checkpoint_kind_name(c.kind)) + ", need sr");
            ms.push_back(SrMethod::model(name, std::move(c.model)));
        }
        require(!ms.empty(), Errc::config, "sr-eval needs at least one method");
        return ms;
    });
    const int border = cfg.sr.border < 0 ? cfg.sr.scale : cfg.sr.border;
    const SrReport rep = evaluate_dir(cfg.sr.hr_dir, methods, cfg.sr.scale, border);
    const fs::path out = cfg.out_dir;
    fs::create_directories(out);
    emit_report(rep, ReportFormat::csv, out / "sr_report.csv");
    emit_report(rep, ReportFormat::markdown, out / "sr_report.md");
    std::cout << render_report(rep, ReportFormat::markdown);
    if (rep.skipped)
        std::cerr << rep.skipped << " image(s) skipped\n";
    return 0;
}

// ---- encode ----------------------------------------------------------------

// Last layer of the first run of minimum-width outputs.
int default_bottleneck(const Network& net)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < net.layers.size(); ++i)
        if (net.layers[i].out.size() < net.layers[best].out.size())
            best = i;
    while (best + 1 < net.layers.size() && net.layers[best + 1].out.size() == net.layers[best].out.size())
        ++best;
    return static_cast<int>(best);
}

int cmd_encode(const std::string& checkpoint, const std::string& data, const std::string& out_csv, int layer)
{
    const Checkpoint ck = setup([&] {
        require_file(checkpoint, "--checkpoint");
        require_dir(data, "--data");
        require(!out_csv.empty(), Errc::config, "--out is not set");
        return load_checkpoint(checkpoint);
    });
    const Dataset ds = load_dataset(data, ck.range);
    std::vector<std::vector<double>> rows;
    std::size_t width = 0;
    if (ck.kind == CheckpointKind::elvae) {
        require(layer < 0, Errc::invalid_argument, "--layer does not apply to elvae checkpoints (features are the posterior mean)");
        width = static_cast<std::size_t>(ck.vae.latent_dim);
        for (const auto& x : ds.images)
            rows.push_back(posterior(ck.vae.encoder, x, ck.vae.latent_dim).mu);
    } else {
        const int l = layer < 0 ? default_bottleneck(ck.model) : layer;
        require(l < static_cast<int>(ck.model.layers.size()), Errc::out_of_range,
                "layer " + std::to_string(l) + " outside [0, " + std::to_string(ck.model.layers.size()) + ")");
        width = ck.model.layers[static_cast<std::size_t>(l)].out.size();
        for (const auto& x : ds.images)
            require(x.size() == ck.model.input_shape.size(), Errc::shape_mismatch,
                    "images do not match the checkpoint input size");
        rows = encode(ck.model, ds.images, l);
    }
    const fs::path out = out_csv;
    if (out.has_parent_path())
        fs::create_directories(out.parent_path());
    write_feature_csv(out, ds.names, rows, width);
    std::cout << rows.size() << " rows x " << width << " features written to " << out.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Perceptual image metrics, autoencoders and super-resolution evaluation"};
    app.require_subcommand(1);
    Overrides ov;
    std::string config;

    auto add_common = [&](CLI::App* sub, bool with_config) {
        if (with_config)
            sub->add_option("--config", config, "JSON run configuration");
        sub->add_option("--seed", ov.seed, "override the config seed");
        sub->add_option("--out-dir", ov.out_dir, "override the config output directory");
    };

    std::string ref, test, metrics = "psnr,ssim,ms-ssim,mse,mae";
    int window = 11, scales = 5;
    auto* compare = app.add_subcommand("compare", "compare two images");
    compare->add_option("reference", ref)->required();
    compare->add_option("test", test)->required();
    compare->add_option("--metrics", metrics, "comma-separated subset of psnr,ssim,ms-ssim,mse,mae");
    compare->add_option("--window", window, "SSIM window size");
    compare->add_option("--scales", scales, "MS-SSIM scale count");

    auto* grad = app.add_subcommand("grad-check", "finite-difference checks of every analytic gradient");
    add_common(grad, true);

    auto* train = app.add_subcommand("train", "train an autoencoder, EL-VAE or SR model from a config");
    add_common(train, true);
    train->get_option("--config")->required();

    auto* select = app.add_subcommand("select-c", "pick the EL-VAE trade-off C by relative MMD");
    add_common(select, true);
    select->get_option("--config")->required();

    std::string checkpoint;
    int n = 0;
    auto* sample = app.add_subcommand("sample", "decode prior draws from an EL-VAE checkpoint");
    add_common(sample, false);
    sample->add_option("--checkpoint", checkpoint)->required();
    sample->add_option("-n", n, "number of samples")->required();

    auto* sr = app.add_subcommand("sr-eval", "super-resolution evaluation report");
    add_common(sr, true);
    sr->get_option("--config")->required();

    std::string data, out_csv;
    int layer = -1;
    auto* enc = app.add_subcommand("encode", "export bottleneck features as CSV");
    enc->add_option("--checkpoint", checkpoint)->required();
    enc->add_option("--data", data, "directory of images")->required();
    enc->add_option("--out", out_csv, "output CSV")->required();
    enc->add_option("--layer", layer, "layer index (default: narrowest layer)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (compare->parsed())
            return cmd_compare(ref, test, metrics, window, scales);
        if (enc->parsed())
            return cmd_encode(checkpoint, data, out_csv, layer);
        const RunConfig cfg = load_config(config, ov);
        if (grad->parsed())
            return cmd_grad_check(cfg);
        if (train->parsed())
            return cmd_train(cfg);
        if (select->parsed())
            return cmd_select_c(cfg);
        if (sample->parsed())
            return cmd_sample(checkpoint, n, cfg);
        if (sr->parsed())
            return cmd_sr_eval(cfg);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == Errc::config ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
