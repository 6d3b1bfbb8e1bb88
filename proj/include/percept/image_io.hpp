#pragma once

#include "percept/error.hpp"
#include "percept/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <variant>
#include <vector>

namespace percept {

using LoadedImage = std::variant<Image, RgbImage>;

namespace detail {

inline std::vector<unsigned char> read_file(const std::filesystem::path& path)
{
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec))
        fail(Errc::file_not_found, path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(Errc::io_error, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline unsigned char quantize(double v, Range range)
{
    double u = range == Range::unit ? v : (v + 1.0) * 0.5;
    u = std::clamp(u, 0.0, 1.0);
    return static_cast<unsigned char>(std::lround(u * 255.0));
}

class PnmReader {
public:
    PnmReader(const std::vector<unsigned char>& bytes, const std::string& name) : b_(bytes), name_(name) {}

    int next_int()
    {
        skip_space_and_comments();
        if (pos_ >= b_.size() || !std::isdigit(b_[pos_]))
            fail(Errc::corrupt_data, "bad PNM header in " + name_);
        long v = 0;
        while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
            v = v * 10 + (b_[pos_++] - '0');
            if (v > (1L << 24))
                fail(Errc::corrupt_data, "PNM header value too large in " + name_);
        }
        return static_cast<int>(v);
    }

    // Exactly one whitespace byte separates the header from the raster.
    std::size_t raster_start()
    {
        if (pos_ >= b_.size() || !std::isspace(b_[pos_]))
            fail(Errc::corrupt_data, "bad PNM header in " + name_);
        return pos_ + 1;
    }

    void seek(std::size_t p) { pos_ = p; }

private:
    void skip_space_and_comments()
    {
        while (pos_ < b_.size()) {
            if (std::isspace(b_[pos_]))
                ++pos_;
            else if (b_[pos_] == '#')
                while (pos_ < b_.size() && b_[pos_] != '\n')
                    ++pos_;
            else
                break;
        }
    }

    const std::vector<unsigned char>& b_;
    std::string name_;
    std::size_t pos_ = 0;
};

inline LoadedImage decode_pnm(const std::vector<unsigned char>& bytes, const std::string& name)
{
    const bool color = bytes[1] == '6';
    PnmReader rd(bytes, name);
    rd.seek(2);
    const int w = rd.next_int();
    const int h = rd.next_int();
    const int maxval = rd.next_int();
    if (w < 1 || h < 1)
        fail(Errc::corrupt_data, "PNM with empty raster: " + name);
    if (maxval < 1 || maxval > 255)
        fail(Errc::unsupported_format, "only 8-bit PNM is supported: " + name);
    const std::size_t start = rd.raster_start();
    const std::size_t channels = color ? 3 : 1;
    const std::size_t need = channels * static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (bytes.size() < start + need)
        fail(Errc::corrupt_data, "truncated PNM raster: " + name);

    std::vector<double> px(need);
    for (std::size_t i = 0; i < need; ++i) {
        const int v = bytes[start + i];
        if (v > maxval)
            fail(Errc::corrupt_data, "sample exceeds maxval in " + name);
        px[i] = color ? v * (255.0 / maxval) : static_cast<double>(v) / maxval;
    }
    if (color)
        return RgbImage(h, w, std::move(px));
    return Image(h, w, std::move(px), Range::unit);
}

inline LoadedImage decode_png(const std::vector<unsigned char>& bytes, const std::string& name)
{
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
        fail(Errc::corrupt_data, name + ": " + img.message);
    const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
    img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    std::vector<unsigned char> raster(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, raster.data(), 0, nullptr)) {
        const std::string msg = img.message;
        png_image_free(&img);
        fail(Errc::corrupt_data, name + ": " + msg);
    }
    const int w = static_cast<int>(img.width), h = static_cast<int>(img.height);
    std::vector<double> px(raster.size());
    if (color) {
        std::transform(raster.begin(), raster.end(), px.begin(), [](unsigned char v) { return double(v); });
        return RgbImage(h, w, std::move(px));
    }
    std::transform(raster.begin(), raster.end(), px.begin(), [](unsigned char v) { return v / 255.0; });
    return Image(h, w, std::move(px), Range::unit);
}

inline std::string lower_extension(const std::filesystem::path& p)
{
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

inline void write_bytes(const std::filesystem::path& path, const std::string& header,
                        const std::vector<unsigned char>& raster)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(Errc::io_error, "cannot write " + path.string());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
    if (!out)
        fail(Errc::io_error, "write failed for " + path.string());
}

} // namespace detail

/// Decode a binary PGM/PPM (P5/P6, maxval <= 255) or 8-bit PNG.
/// Gray files yield an Image in [0,1]; color files an RgbImage in [0,255].
inline LoadedImage load_image(const std::filesystem::path& path)
{
    const auto bytes = detail::read_file(path);
    const std::string name = path.string();
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6'))
        return detail::decode_pnm(bytes, name);
    static constexpr unsigned char png_sig[] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (bytes.size() >= 8 && std::equal(std::begin(png_sig), std::end(png_sig), bytes.begin()))
        return detail::decode_png(bytes, name);
    fail(Errc::unsupported_format, name);
}

/// Load as grayscale; color files go through the BT.601 luma transform.
inline Image load_gray(const std::filesystem::path& path)
{
    auto img = load_image(path);
    if (auto* g = std::get_if<Image>(&img))
        return std::move(*g);
    return rgb_to_luma(std::get<RgbImage>(img));
}

inline bool is_image_file(const std::filesystem::path& p)
{
    const auto ext = detail::lower_extension(p);
    return ext == ".png" || ext == ".pgm" || ext == ".ppm";
}

/// Image files of a directory in lexicographic order of file name.
inline std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir)
{
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec))
        fail(Errc::file_not_found, "not a directory: " + dir.string());
    std::vector<std::filesystem::path> out;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && is_image_file(e.path()))
            out.push_back(e.path());
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
    return out;
}

/// Write an 8-bit gray image. Format follows the extension (.pgm or .png).
/// Values are quantized as round(255 * v) after mapping to [0,1].
inline void save_image(const Image& img, const std::filesystem::path& path)
{
    const auto ext = detail::lower_extension(path);
    std::vector<unsigned char> raster(img.size());
    for (std::size_t i = 0; i < img.size(); ++i)
        raster[i] = detail::quantize(img[i], img.range());

    if (ext == ".pgm") {
        const std::string header =
            "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
        detail::write_bytes(path, header, raster);
        return;
    }
    if (ext == ".png") {
        png_image pi{};
        pi.version = PNG_IMAGE_VERSION;
        pi.width = static_cast<png_uint_32>(img.width());
        pi.height = static_cast<png_uint_32>(img.height());
        pi.format = PNG_FORMAT_GRAY;
        if (!png_image_write_to_file(&pi, path.string().c_str(), 0, raster.data(), 0, nullptr))
            fail(Errc::io_error, "cannot write " + path.string() + ": " + pi.message);
        return;
    }
    fail(Errc::unsupported_format, "cannot save to " + path.string());
}

inline void save_image(const RgbImage& img, const std::filesystem::path& path)
{
    const auto ext = detail::lower_extension(path);
    std::vector<unsigned char> raster(3 * img.pixel_count());
    const auto d = img.data();
    for (std::size_t i = 0; i < raster.size(); ++i)
        raster[i] = static_cast<unsigned char>(std::lround(std::clamp(d[i], 0.0, 255.0)));
    if (ext == ".ppm") {
        const std::string header =
            "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
        detail::write_bytes(path, header, raster);
        return;
    }
    if (ext == ".png") {
        png_image pi{};
        pi.version = PNG_IMAGE_VERSION;
        pi.width = static_cast<png_uint_32>(img.width());
        pi.height = static_cast<png_uint_32>(img.height());
        pi.format = PNG_FORMAT_RGB;
        if (!png_image_write_to_file(&pi, path.string().c_str(), 0, raster.data(), 0, nullptr))
            fail(Errc::io_error, "cannot write " + path.string() + ": " + pi.message);
        return;
    }
    fail(Errc::unsupported_format, "cannot save to " + path.string());
}

} // namespace percept
