#pragma once

#include "percept/error.hpp"
#include "percept/image.hpp"
#include "percept/image_io.hpp"
#include "percept/losses.hpp"
#include "percept/metrics.hpp"
#include "percept/nn.hpp"
#include "percept/optim.hpp"
#include "percept/rng.hpp"
#include "percept/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace percept {

/// Bicubic low-resolution input. HR images whose sides are not multiples of
/// `scale` are center-cropped to the largest multiple first.
inline Image make_lr(const Image& hr, int scale)
{
    require(scale >= 1, Errc::invalid_argument, "scale must be >= 1");
    const Image src = center_crop_to_multiple(hr, scale);
    if (scale == 1)
        return src;
    return resize_bicubic(src, src.height() / scale, src.width() / scale);
}

inline Image upscale_bicubic(const Image& lr, int scale)
{
    require(scale >= 1, Errc::invalid_argument, "scale must be >= 1");
    if (scale == 1)
        return lr;
    return resize_bicubic(lr, lr.height() * scale, lr.width() * scale);
}

/// Copy of a convolutional network re-instantiated for a new input size.
/// Parameter counts must not change (so dense layers only fit their original size).
inline Network with_input_shape(const Network& net, const Shape& input)
{
    if (net.input_shape == input)
        return net;
    Network out = net;
    out.input_shape = input;
    Shape cur = input;
    for (std::size_t i = 0; i < out.layers.size(); ++i) {
        Layer l = make_layer(net.layers[i].spec, cur, i);
        require(l.weights.size() == net.layers[i].weights.size() && l.bias.size() == net.layers[i].bias.size(),
                Errc::shape_mismatch, "layer " + std::to_string(i) + " parameters depend on the input size");
        l.weights = net.layers[i].weights;
        l.bias = net.layers[i].bias;
        cur = l.out;
        out.layers[i] = std::move(l);
    }
    return out;
}

/// Bicubic upscale followed by the network (eval mode), clipped to range.
/// The network maps the upscaled image to a same-size output.
inline Image apply_model(const Image& lr, const Network& net, int scale)
{
    const Image up = upscale_bicubic(lr, scale);
    const Network sized = with_input_shape(net, Shape{1, up.height(), up.width()});
    const auto out = forward(sized, up.pixels(), Mode::eval).output;
    require(out.size() == up.size(), Errc::shape_mismatch, "super-resolution network changes the image size");
    return clip_to_range(Image(up.height(), up.width(), out, up.range()));
}

struct SrTrainResult {
    Network net;
    OptimizerState optimizer;
    std::vector<double> batch_loss; ///< mean scaled loss of each step's batch
    double wall_seconds = 0;
};

/**
 * Supervised training of a same-size refinement network on HR patches:
 * input is the bicubic round trip of each patch, target the patch itself.
 * Each step draws a seeded batch (with replacement) and averages gradients.
 */
inline SrTrainResult train_sr(const Architecture& arch, const LossFunction& loss, const std::vector<Image>& patches,
                              int scale, const OptimizerConfig& opt, int steps, std::uint64_t seed)
{
    require(!patches.empty(), Errc::invalid_argument, "no training patches");
    require(steps >= 0, Errc::invalid_argument, "steps must be non-negative");
    opt.validate();
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<Image> inputs;
    inputs.reserve(patches.size());
    for (const auto& p : patches) {
        require(p.height() % scale == 0 && p.width() % scale == 0, Errc::invalid_argument,
                "patch size must be a multiple of the scale");
        inputs.push_back(upscale_bicubic(make_lr(p, scale), scale));
    }
    SrTrainResult out;
    out.net = arch.build(seed);
    require(out.net.input_shape.size() == patches.front().size() &&
                out.net.output_shape().size() == patches.front().size(),
            Errc::shape_mismatch, "network must map a patch to a same-size output");
    out.optimizer = make_optimizer_state(out.net);
    Rng rng(seed, "sr-batch");
    for (int step = 0; step < steps; ++step) {
        Gradients acc = zero_gradients(out.net);
        detail::CompensatedSum total;
        for (int b = 0; b < opt.batch_size; ++b) {
            const std::size_t i = rng.below(patches.size());
            ForwardResult fr = forward(out.net, inputs[i].pixels(), Mode::train);
            const LossValue lv = eval_loss(loss, patches[i], output_image(fr.output, patches[i]));
            if (!std::isfinite(lv.value))
                fail(Errc::divergence, "non-finite loss at step " + std::to_string(step + 1));
            total.add(lv.value);
            accumulate(acc, backward(out.net, fr.tape, lv.gradient.pixels()));
        }
        percept::scale(acc, 1.0 / opt.batch_size);
        optimizer_step(out.net, acc, out.optimizer, opt);
        out.batch_loss.push_back(total.value() / opt.batch_size);
    }
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

enum class SrMethodKind { bicubic, nearest, model, ground_truth };

struct SrMethod {
    std::string name;
    SrMethodKind kind = SrMethodKind::bicubic;
    std::shared_ptr<const Network> net;

    static SrMethod bicubic() { return {"bicubic", SrMethodKind::bicubic, nullptr}; }
    static SrMethod nearest() { return {"nearest", SrMethodKind::nearest, nullptr}; }
    static SrMethod ground_truth() { return {"ground-truth", SrMethodKind::ground_truth, nullptr}; }
    static SrMethod model(std::string name, Network net)
    {
        return {std::move(name), SrMethodKind::model, std::make_shared<const Network>(std::move(net))};
    }

    Image run(const Image& hr, const Image& lr, int scale) const
    {
        switch (kind) {
        case SrMethodKind::bicubic: return upscale_bicubic(lr, scale);
        case SrMethodKind::nearest: return resize_nearest(lr, lr.height() * scale, lr.width() * scale);
        case SrMethodKind::model: return apply_model(lr, *net, scale);
        case SrMethodKind::ground_truth: return hr;
        }
        return hr;
    }
};

struct SrRow {
    std::string name;
    std::string method;
    int scale = 0;
    int border = 0;
    double psnr_db = 0; ///< +inf when the output equals the reference
    double ssim = 0;
    std::optional<double> ms_ssim;
};

struct SrAggregate {
    std::string method;
    int rows = 0;
    int infinite_psnr = 0; ///< rows excluded from mean_psnr
    double mean_psnr = 0;
    double mean_ssim = 0;
    std::optional<double> mean_ms_ssim;
};

struct SrReport {
    std::vector<SrRow> rows;
    std::vector<SrAggregate> aggregates; ///< one per method, in method order
    int skipped = 0;                     ///< inputs that failed to decode
};

/// Evaluate named Y-channel HR images. Rows follow the order of `images`
/// (callers pass them sorted by name), then the method order.
inline SrReport evaluate_images(const std::vector<std::pair<std::string, Image>>& images,
                                const std::vector<SrMethod>& methods, int scale, int border,
                                const MetricParams& params = MetricParams::ssim())
{
    require(scale >= 1 && border >= 0, Errc::invalid_argument, "bad scale or border");
    SrReport rep;
    MetricParams ms = params;
    ms.with_scales(5);
    for (const auto& [name, hr_in] : images) {
        const Image hr = center_crop_to_multiple(hr_in, scale);
        const Image lr = make_lr(hr, scale);
        const Image ref = crop_border(hr, border);
        for (const auto& m : methods) {
            const Image out = crop_border(m.run(hr, lr, scale), border);
            SrRow row{name, m.name, scale, border, psnr(ref, out, 1.0), ssim(ref, out, params).value, std::nullopt};
            if (max_feasible_scales(ref.height(), ref.width(), ms.window_size) >= ms.scales)
                row.ms_ssim = ms_ssim(ref, out, ms).value;
            rep.rows.push_back(std::move(row));
        }
    }
    for (const auto& m : methods) {
        SrAggregate a;
        a.method = m.name;
        double ps = 0, ss = 0, ms_sum = 0;
        int finite = 0, ms_rows = 0;
        for (const auto& r : rep.rows) {
            if (r.method != m.name)
                continue;
            ++a.rows;
            ss += r.ssim;
            if (std::isfinite(r.psnr_db)) {
                ps += r.psnr_db;
                ++finite;
            } else {
                ++a.infinite_psnr;
            }
            if (r.ms_ssim) {
                ms_sum += *r.ms_ssim;
                ++ms_rows;
            }
        }
        a.mean_psnr = finite ? ps / finite : std::numeric_limits<double>::infinity();
        a.mean_ssim = a.rows ? ss / a.rows : 0.0;
        if (ms_rows > 0 && ms_rows == a.rows)
            a.mean_ms_ssim = ms_sum / ms_rows;
        rep.aggregates.push_back(std::move(a));
    }
    return rep;
}

/// Evaluate every decodable image in a directory (lexicographic order).
/// Files that fail to decode are reported on `log` and counted as skipped.
inline SrReport evaluate_dir(const std::filesystem::path& hr_dir, const std::vector<SrMethod>& methods, int scale,
                             int border, const MetricParams& params = MetricParams::ssim(),
                             std::ostream& log = std::cerr)
{
    const auto files = list_images(hr_dir);
    require(!files.empty(), Errc::invalid_argument, "no images in " + hr_dir.string());
    std::vector<std::pair<std::string, Image>> images;
    int skipped = 0;
    for (const auto& f : files) {
        try {
            images.emplace_back(f.filename().string(), load_gray(f));
        } catch (const Error& e) {
            log << "skipping " << f.filename().string() << ": " << e.what() << "\n";
            ++skipped;
        }
    }
    require(!images.empty(), Errc::invalid_argument, "no decodable images in " + hr_dir.string());
    SrReport rep = evaluate_images(images, methods, scale, border, params);
    rep.skipped = skipped;
    return rep;
}

enum class ReportFormat { csv, markdown };

/// Six significant digits; +inf prints as "inf".
inline std::string format_number(double v)
{
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::string render_report(const SrReport& rep, ReportFormat fmt)
{
    std::ostringstream out;
    if (fmt == ReportFormat::csv) {
        out << "name,method,scale,border,psnr_db,ssim,ms_ssim\n";
        for (const auto& r : rep.rows)
            out << r.name << ',' << r.method << ',' << r.scale << ',' << r.border << ',' << format_number(r.psnr_db)
                << ',' << format_number(r.ssim) << ',' << (r.ms_ssim ? format_number(*r.ms_ssim) : "") << "\n";
        return out.str();
    }
    out << "| Metric |";
    for (const auto& a : rep.aggregates)
        out << ' ' << a.method << " |";
    out << "\n|---|";
    for (std::size_t i = 0; i < rep.aggregates.size(); ++i)
        out << "---|";
    out << "\n";
    if (rep.aggregates.empty())
        return out.str();
    out << "| PSNR |";
    for (const auto& a : rep.aggregates)
        out << ' ' << format_number(a.mean_psnr) << " |";
    out << "\n| SSIM |";
    for (const auto& a : rep.aggregates)
        out << ' ' << format_number(a.mean_ssim) << " |";
    out << "\n";
    const bool all_ms = std::all_of(rep.aggregates.begin(), rep.aggregates.end(),
                                    [](const SrAggregate& a) { return a.mean_ms_ssim.has_value(); });
    if (all_ms) {
        out << "| MS-SSIM |";
        for (const auto& a : rep.aggregates)
            out << ' ' << format_number(*a.mean_ms_ssim) << " |";
        out << "\n";
    }
    return out.str();
}

inline void emit_report(const SrReport& rep, ReportFormat fmt, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(Errc::io_error, "cannot write " + path.string());
    out << render_report(rep, fmt);
    if (!out)
        fail(Errc::io_error, "write failed for " + path.string());
}

/// Parse rows written by render_report(..., csv).
inline std::vector<SrRow> parse_report_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)) && line == "name,method,scale,border,psnr_db,ssim,ms_ssim",
            Errc::corrupt_data, "unexpected report header");
    std::vector<SrRow> rows;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<std::string> f;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ','))
            f.push_back(cell);
        if (!line.empty() && line.back() == ',')
            f.emplace_back();
        require(f.size() == 7, Errc::corrupt_data, "bad report row: " + line);
        SrRow r;
        r.name = f[0];
        r.method = f[1];
        r.scale = std::stoi(f[2]);
        r.border = std::stoi(f[3]);
        r.psnr_db = f[4] == "inf" ? std::numeric_limits<double>::infinity() : std::stod(f[4]);
        r.ssim = std::stod(f[5]);
        if (!f[6].empty())
            r.ms_ssim = std::stod(f[6]);
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace percept
