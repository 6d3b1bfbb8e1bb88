#pragma once

#include "percept/error.hpp"
#include "percept/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace percept {

/// Declared dynamic range of an Image.
enum class Range {
    unit,   ///< [0, 1]
    signed_ ///< [-1, 1]
};

inline double range_lo(Range r) { return r == Range::unit ? 0.0 : -1.0; }
inline double range_hi(Range) { return 1.0; }
inline double range_width(Range r) { return range_hi(r) - range_lo(r); }

/**
 * Grayscale image of doubles, row-major.
 *
 * The shape invariant (height, width >= 1 and pixels.size() == height*width)
 * is enforced on construction. The range is a descriptor: pixel values are
 * checked against it at I/O boundaries and by in_range(), not on every write,
 * because gradients and finite-difference probes reuse this type.
 */
class Image {
public:
    Image() = default;

    Image(int height, int width, Range range = Range::unit, double fill = 0.0)
        : height_(height), width_(width), range_(range)
    {
        check_dims(height, width);
        pixels_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
    }

    Image(int height, int width, std::vector<double> pixels, Range range = Range::unit)
        : height_(height), width_(width), range_(range), pixels_(std::move(pixels))
    {
        check_dims(height, width);
        require(pixels_.size() == static_cast<std::size_t>(height) * static_cast<std::size_t>(width),
                Errc::dimension_mismatch,
                "pixel count " + std::to_string(pixels_.size()) + " != " + std::to_string(height) + "x" +
                    std::to_string(width));
    }

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t size() const noexcept { return pixels_.size(); }
    bool empty() const noexcept { return pixels_.empty(); }
    Range range() const noexcept { return range_; }
    void set_range(Range r) noexcept { range_ = r; }

    double& operator()(int row, int col) { return pixels_[index(row, col)]; }
    double operator()(int row, int col) const { return pixels_[index(row, col)]; }
    double& operator[](std::size_t i) { return pixels_[i]; }
    double operator[](std::size_t i) const { return pixels_[i]; }

    std::span<double> pixels() noexcept { return pixels_; }
    std::span<const double> pixels() const noexcept { return pixels_; }
    const std::vector<double>& data() const noexcept { return pixels_; }

    bool same_shape(const Image& o) const noexcept { return height_ == o.height_ && width_ == o.width_; }

    bool in_range(double slack = 0.0) const
    {
        const double lo = range_lo(range_) - slack, hi = range_hi(range_) + slack;
        return std::all_of(pixels_.begin(), pixels_.end(), [&](double v) { return v >= lo && v <= hi; });
    }

    friend bool operator==(const Image& a, const Image& b)
    {
        return a.height_ == b.height_ && a.width_ == b.width_ && a.range_ == b.range_ && a.pixels_ == b.pixels_;
    }

private:
    static void check_dims(int h, int w)
    {
        require(h >= 1 && w >= 1, Errc::invalid_argument,
                "image dimensions must be positive, got " + std::to_string(h) + "x" + std::to_string(w));
    }

    std::size_t index(int row, int col) const
    {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col);
    }

    int height_ = 0;
    int width_ = 0;
    Range range_ = Range::unit;
    std::vector<double> pixels_;
};

/// Color image, row-major RGB triples with channel values in [0, 255].
class RgbImage {
public:
    RgbImage() = default;

    RgbImage(int height, int width, std::vector<double> rgb) : height_(height), width_(width), rgb_(std::move(rgb))
    {
        require(height >= 1 && width >= 1, Errc::invalid_argument, "rgb image dimensions must be positive");
        require(rgb_.size() == 3 * static_cast<std::size_t>(height) * static_cast<std::size_t>(width),
                Errc::dimension_mismatch, "rgb pixel count must equal 3*height*width");
        require(std::all_of(rgb_.begin(), rgb_.end(), [](double v) { return v >= 0.0 && v <= 255.0; }),
                Errc::out_of_range, "rgb channel values must lie in [0, 255]");
    }

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t pixel_count() const noexcept { return rgb_.size() / 3; }

    std::array<double, 3> at(int row, int col) const
    {
        const std::size_t i = 3 * (static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + col);
        return {rgb_[i], rgb_[i + 1], rgb_[i + 2]};
    }

    std::span<const double> data() const noexcept { return rgb_; }

    friend bool operator==(const RgbImage&, const RgbImage&) = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<double> rgb_;
};

// ---------------------------------------------------------------------------
// Color transforms

/// ITU-R 601-2 luma, normalized to [0, 1].
inline Image rgb_to_luma(const RgbImage& img)
{
    std::vector<double> out(img.pixel_count());
    const auto rgb = img.data();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = (0.299 * rgb[3 * i] + 0.587 * rgb[3 * i + 1] + 0.114 * rgb[3 * i + 2]) / 255.0;
    return Image(img.height(), img.width(), std::move(out), Range::unit);
}

/// Full-range BT.601 Y channel in [0, 1]. Same coefficients as rgb_to_luma.
inline Image rgb_to_y(const RgbImage& img) { return rgb_to_luma(img); }

// ---------------------------------------------------------------------------
// Range handling

/// Affine map between [0,1] and [-1,1]. Identity when the range already matches.
inline Image rescale_range(const Image& img, Range target)
{
    if (img.range() == target)
        return img;
    std::vector<double> out(img.data());
    if (target == Range::signed_)
        for (double& v : out)
            v = 2.0 * v - 1.0;
    else
        for (double& v : out)
            v = (v + 1.0) * 0.5;
    return Image(img.height(), img.width(), std::move(out), target);
}

inline Image clip_to_range(Image img)
{
    const double lo = range_lo(img.range()), hi = range_hi(img.range());
    for (double& v : img.pixels())
        v = std::clamp(v, lo, hi);
    return img;
}

// ---------------------------------------------------------------------------
// Pyramid

/// 2x2 box average followed by stride-2 decimation. Odd trailing rows and
/// columns are dropped.
inline Image downsample2(const Image& img)
{
    require(img.height() >= 2 && img.width() >= 2, Errc::too_small,
            "downsample2 needs at least 2x2, got " + std::to_string(img.height()) + "x" + std::to_string(img.width()));
    const int h = img.height() / 2, w = img.width() / 2;
    Image out(h, w, img.range());
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            out(r, c) = 0.25 * (img(2 * r, 2 * c) + img(2 * r, 2 * c + 1) + img(2 * r + 1, 2 * c) +
                                img(2 * r + 1, 2 * c + 1));
    return out;
}

/// Adjoint of downsample2: each coarse value is spread with weight 1/4 over
/// its 2x2 source block. Dropped rows/columns receive zero.
inline Image downsample2_adjoint(const Image& coarse, int fine_height, int fine_width)
{
    require(coarse.height() == fine_height / 2 && coarse.width() == fine_width / 2, Errc::dimension_mismatch,
            "downsample2_adjoint: coarse shape does not match fine shape");
    Image out(fine_height, fine_width, coarse.range());
    for (int r = 0; r < coarse.height(); ++r)
        for (int c = 0; c < coarse.width(); ++c) {
            const double g = 0.25 * coarse(r, c);
            out(2 * r, 2 * c) = g;
            out(2 * r, 2 * c + 1) = g;
            out(2 * r + 1, 2 * c) = g;
            out(2 * r + 1, 2 * c + 1) = g;
        }
    return out;
}

// ---------------------------------------------------------------------------
// Bicubic resampling

/// Catmull-Rom cubic convolution kernel (a = -0.5).
inline double cubic_kernel(double x)
{
    constexpr double a = -0.5;
    const double ax = std::abs(x);
    if (ax <= 1.0)
        return ((a + 2.0) * ax - (a + 3.0)) * ax * ax + 1.0;
    if (ax < 2.0)
        return ((a * ax - 5.0 * a) * ax + 8.0 * a) * ax - 4.0 * a;
    return 0.0;
}

struct ResizeOptions {
    /// When shrinking, stretch the kernel by the inverse scale (as MATLAB's
    /// imresize does) so the result is low-passed before decimation.
    bool antialias = true;
};

namespace detail {

struct Contribution {
    std::vector<int> index;
    std::vector<double> weight;
};

// Weights for one axis. Pixel centers are aligned: output sample i maps to
// input coordinate (i + 0.5) / scale - 0.5. Indices are clamped at the edges.
inline std::vector<Contribution> axis_contributions(int in_len, int out_len, const ResizeOptions& opt)
{
    const double scale = static_cast<double>(out_len) / in_len;
    const double kscale = (opt.antialias && scale < 1.0) ? scale : 1.0;
    const double support = 2.0 / kscale;
    std::vector<Contribution> table(static_cast<std::size_t>(out_len));
    for (int i = 0; i < out_len; ++i) {
        const double u = (i + 0.5) / scale - 0.5;
        const int first = static_cast<int>(std::floor(u - support)) + 1;
        const int last = static_cast<int>(std::ceil(u + support)) - 1;
        Contribution& c = table[static_cast<std::size_t>(i)];
        double total = 0.0;
        for (int j = first; j <= last; ++j) {
            const double w = kscale * cubic_kernel(kscale * (u - j));
            if (w == 0.0)
                continue;
            c.index.push_back(std::clamp(j, 0, in_len - 1));
            c.weight.push_back(w);
            total += w;
        }
        for (double& w : c.weight)
            w /= total;
    }
    return table;
}

} // namespace detail

/// Separable bicubic resize. Output is clipped to the image's declared range.
inline Image resize_bicubic(const Image& img, int out_h, int out_w, const ResizeOptions& opt = {})
{
    require(out_h >= 1 && out_w >= 1, Errc::invalid_argument, "resize target must be positive");
    const auto rows = detail::axis_contributions(img.height(), out_h, opt);
    const auto cols = detail::axis_contributions(img.width(), out_w, opt);

    Image tmp(img.height(), out_w, img.range());
    for (int r = 0; r < img.height(); ++r)
        for (int c = 0; c < out_w; ++c) {
            const auto& k = cols[static_cast<std::size_t>(c)];
            double acc = 0.0;
            for (std::size_t t = 0; t < k.index.size(); ++t)
                acc += k.weight[t] * img(r, k.index[t]);
            tmp(r, c) = acc;
        }

    Image out(out_h, out_w, img.range());
    for (int r = 0; r < out_h; ++r) {
        const auto& k = rows[static_cast<std::size_t>(r)];
        for (int c = 0; c < out_w; ++c) {
            double acc = 0.0;
            for (std::size_t t = 0; t < k.index.size(); ++t)
                acc += k.weight[t] * tmp(k.index[t], c);
            out(r, c) = acc;
        }
    }
    return clip_to_range(std::move(out));
}

/// Nearest-neighbour resize with the same pixel-center alignment.
inline Image resize_nearest(const Image& img, int out_h, int out_w)
{
    require(out_h >= 1 && out_w >= 1, Errc::invalid_argument, "resize target must be positive");
    Image out(out_h, out_w, img.range());
    for (int r = 0; r < out_h; ++r) {
        const int sr = std::clamp(static_cast<int>(std::floor((r + 0.5) * img.height() / out_h)), 0, img.height() - 1);
        for (int c = 0; c < out_w; ++c) {
            const int sc = std::clamp(static_cast<int>(std::floor((c + 0.5) * img.width() / out_w)), 0, img.width() - 1);
            out(r, c) = img(sr, sc);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cropping and patches

inline Image crop(const Image& img, int top, int left, int h, int w)
{
    require(top >= 0 && left >= 0 && h >= 1 && w >= 1 && top + h <= img.height() && left + w <= img.width(),
            Errc::out_of_range, "crop window exceeds image");
    Image out(h, w, img.range());
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            out(r, c) = img(top + r, left + c);
    return out;
}

/// Central (H-2n) x (W-2n) region.
inline Image crop_border(const Image& img, int n)
{
    require(n >= 0, Errc::invalid_argument, "border must be non-negative");
    require(img.height() > 2 * n && img.width() > 2 * n, Errc::out_of_range,
            "border " + std::to_string(n) + " exceeds image " + std::to_string(img.height()) + "x" +
                std::to_string(img.width()));
    if (n == 0)
        return img;
    return crop(img, n, n, img.height() - 2 * n, img.width() - 2 * n);
}

/// Largest centered region whose sides are multiples of `multiple`.
inline Image center_crop_to_multiple(const Image& img, int multiple)
{
    require(multiple >= 1, Errc::invalid_argument, "multiple must be >= 1");
    const int h = img.height() / multiple * multiple, w = img.width() / multiple * multiple;
    require(h >= 1 && w >= 1, Errc::too_small, "image smaller than crop multiple");
    if (h == img.height() && w == img.width())
        return img;
    return crop(img, (img.height() - h) / 2, (img.width() - w) / 2, h, w);
}

/// `count` square patches at uniformly random valid positions.
inline std::vector<Image> extract_patches(const Image& img, int size, int count, std::uint64_t seed)
{
    require(size >= 1 && count >= 1, Errc::invalid_argument, "patch size and count must be positive");
    require(size <= img.height() && size <= img.width(), Errc::too_small,
            "patch size " + std::to_string(size) + " exceeds image");
    Rng rng(seed, "patches");
    std::vector<Image> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const int top = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.height() - size + 1)));
        const int left = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.width() - size + 1)));
        out.push_back(crop(img, top, left, size, size));
    }
    return out;
}

inline double mean(const Image& img)
{
    double s = 0.0;
    for (double v : img.pixels())
        s += v;
    return s / static_cast<double>(img.size());
}

/// Tile same-size images into a grid, `cols` per row, separated by `pad`
/// pixels of the range minimum. Missing cells stay at the minimum.
inline Image tile_grid(const std::vector<Image>& images, int cols, int pad = 1)
{
    require(!images.empty() && cols >= 1 && pad >= 0, Errc::invalid_argument, "grid needs images and cols >= 1");
    const int h = images.front().height(), w = images.front().width();
    const Range range = images.front().range();
    const int n = static_cast<int>(images.size());
    const int rows = (n + cols - 1) / cols;
    const int used_cols = std::min(cols, n);
    Image out(rows * h + (rows - 1) * pad, used_cols * w + (used_cols - 1) * pad, range, range_lo(range));
    for (int i = 0; i < n; ++i) {
        const Image& img = images[static_cast<std::size_t>(i)];
        require(img.height() == h && img.width() == w, Errc::dimension_mismatch, "grid images differ in size");
        const int top = (i / cols) * (h + pad), left = (i % cols) * (w + pad);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c)
                out(top + r, left + c) = img(r, c);
    }
    return out;
}

} // namespace percept
