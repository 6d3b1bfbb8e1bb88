#pragma once

#include "percept/image.hpp"
#include "percept/mmd.hpp"
#include "percept/rng.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace percept {

// Seeded toy data. Everything lands in the unit range.

namespace detail {

inline void add_ramp(Image& img, Rng& rng, double amplitude)
{
    const double a = rng.uniform(0, 2 * std::numbers::pi);
    const double dx = std::cos(a) / img.width(), dy = std::sin(a) / img.height();
    for (int r = 0; r < img.height(); ++r)
        for (int c = 0; c < img.width(); ++c)
            img(r, c) += amplitude * ((c - img.width() / 2.0) * dx + (r - img.height() / 2.0) * dy);
}

inline void add_shape(Image& img, Rng& rng)
{
    const double h = img.height(), w = img.width();
    const double cy = rng.uniform(0, h), cx = rng.uniform(0, w);
    const double ry = rng.uniform(0.15, 0.4) * h, rx = rng.uniform(0.15, 0.4) * w;
    const double level = rng.uniform(0, 1);
    const bool disk = rng.uniform() < 0.5;
    for (int r = 0; r < img.height(); ++r)
        for (int c = 0; c < img.width(); ++c) {
            const double u = (r + 0.5 - cy) / ry, v = (c + 0.5 - cx) / rx;
            const bool inside = disk ? u * u + v * v <= 1.0 : std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
            if (inside)
                img(r, c) = level;
        }
}

inline void add_grating(Image& img, Rng& rng, double amplitude)
{
    const double a = rng.uniform(0, std::numbers::pi);
    const double period = rng.uniform(3.0, 8.0);
    const double phase = rng.uniform(0, 2 * std::numbers::pi);
    for (int r = 0; r < img.height(); ++r)
        for (int c = 0; c < img.width(); ++c)
            img(r, c) += amplitude * std::sin(2 * std::numbers::pi * (c * std::cos(a) + r * std::sin(a)) / period + phase);
}

// Band-limited texture: coarse random grid, bicubic upsampled.
inline Image smooth_noise(int h, int w, int cell, Rng& rng)
{
    const int gh = std::max(2, h / cell), gw = std::max(2, w / cell);
    Image g(gh, gw);
    for (double& v : g.pixels())
        v = rng.uniform(-1, 1);
    return resize_bicubic(g, h, w, ResizeOptions{false});
}

inline Image finish(Image img)
{
    for (double& v : img.pixels())
        v = std::clamp(v, 0.0, 1.0);
    return img;
}

} // namespace detail

/// Random composition of a ramp, one to three flat shapes, a faint grating
/// and low-amplitude texture.
inline Image toy_image(int h, int w, Rng& rng)
{
    Image img(h, w, Range::unit, rng.uniform(0.2, 0.8));
    detail::add_ramp(img, rng, rng.uniform(0.0, 0.6));
    const int shapes = 1 + static_cast<int>(rng.below(3));
    for (int s = 0; s < shapes; ++s)
        detail::add_shape(img, rng);
    if (rng.uniform() < 0.5)
        detail::add_grating(img, rng, rng.uniform(0.05, 0.2));
    const Image tex = detail::smooth_noise(h, w, 2, rng);
    const double amp = rng.uniform(0.02, 0.1);
    for (std::size_t i = 0; i < img.size(); ++i)
        img[i] += amp * tex[i];
    return detail::finish(std::move(img));
}

inline std::vector<Image> toy_dataset(int n, int h, int w, std::uint64_t seed)
{
    std::vector<Image> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Rng rng(seed, "toy-image", static_cast<std::uint64_t>(i));
        out.push_back(toy_image(h, w, rng));
    }
    return out;
}

/// One or two soft step edges at random orientations.
inline Image edge_image(int h, int w, Rng& rng)
{
    Image img(h, w, Range::unit, rng.uniform(0.3, 0.7));
    const int edges = 1 + static_cast<int>(rng.below(2));
    for (int e = 0; e < edges; ++e) {
        const double a = rng.uniform(0, 2 * std::numbers::pi);
        const double off = rng.uniform(-0.3, 0.3) * std::min(h, w);
        const double step = (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.15, 0.35);
        const double soft = rng.uniform(0.05, 0.6);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                const double d = (c - w / 2.0) * std::cos(a) + (r - h / 2.0) * std::sin(a) - off;
                img(r, c) += step / (1.0 + std::exp(-d / soft));
            }
    }
    return detail::finish(std::move(img));
}

inline std::vector<Image> edge_dataset(int n, int h, int w, std::uint64_t seed)
{
    std::vector<Image> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Rng rng(seed, "edge-image", static_cast<std::uint64_t>(i));
        out.push_back(edge_image(h, w, rng));
    }
    return out;
}

/// Larger stand-in for a natural photograph: many shapes, gratings and
/// multi-scale texture.
inline Image scene_image(int h, int w, std::uint64_t seed)
{
    Rng rng(seed, "scene");
    Image img(h, w, Range::unit, rng.uniform(0.3, 0.7));
    detail::add_ramp(img, rng, 0.5);
    for (int s = 0; s < 12; ++s)
        detail::add_shape(img, rng);
    for (int g = 0; g < 2; ++g)
        detail::add_grating(img, rng, 0.08);
    for (int cell : {16, 4, 2}) {
        const Image tex = detail::smooth_noise(h, w, cell, rng);
        for (std::size_t i = 0; i < img.size(); ++i)
            img[i] += 0.06 * tex[i];
    }
    return detail::finish(std::move(img));
}

/// n draws from N(shift * 1, I) in `dim` dimensions.
inline SampleSet gaussian_set(int n, int dim, double shift, Rng& rng)
{
    std::vector<std::vector<double>> v(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(dim)));
    for (auto& x : v)
        for (double& e : x)
            e = shift + rng.normal();
    return SampleSet(std::move(v));
}

} // namespace percept
