#include "oracles.hpp"

#include <percept/image_io.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace percept;
namespace fs = std::filesystem;

namespace {

class ImageIo : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() /
               ("percept_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path write(const std::string& name, const std::string& bytes)
    {
        const fs::path p = dir_ / name;
        std::ofstream(p, std::ios::binary) << bytes;
        return p;
    }

    fs::path dir_;
};

Errc code_of(const fs::path& p)
{
    try {
        load_image(p);
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::config;
}

} // namespace

TEST_F(ImageIo, DecodesPgm)
{
    const auto p = write("a.pgm", std::string("P5\n2 2\n255\n") + std::string("\x00\xff\xff\x00", 4));
    const Image img = std::get<Image>(load_image(p));
    EXPECT_EQ(img.height(), 2);
    EXPECT_EQ(img.width(), 2);
    EXPECT_EQ(img.range(), Range::unit);
    EXPECT_EQ(img.data(), (std::vector<double>{0, 1, 1, 0}));
}

TEST_F(ImageIo, DecodesPpmWithComment)
{
    const auto p = write("a.ppm", std::string("P6\n# red\n1 1\n255\n") + std::string("\xff\x00\x00", 3));
    const RgbImage img = std::get<RgbImage>(load_image(p));
    const auto px = img.at(0, 0);
    EXPECT_EQ(px[0], 255.0);
    EXPECT_EQ(px[1], 0.0);
    EXPECT_EQ(px[2], 0.0);
}

TEST_F(ImageIo, DistinctErrors)
{
    EXPECT_EQ(code_of(dir_ / "missing.pgm"), Errc::file_not_found);
    EXPECT_EQ(code_of(write("x.gif", "GIF89a....")), Errc::unsupported_format);
    EXPECT_EQ(code_of(write("t.pgm", "P5\n4 4\n255\n\x01\x02")), Errc::corrupt_data);
    EXPECT_EQ(code_of(write("w.pgm", "P5\n2 2\n65535\n")), Errc::unsupported_format);

    // a PNG cut after its signature and part of the header chunk
    const Image img = oracle::random_image(16, 16, 1);
    save_image(img, dir_ / "full.png");
    std::ifstream in(dir_ / "full.png", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    EXPECT_EQ(code_of(write("cut.png", bytes.substr(0, bytes.size() / 2))), Errc::corrupt_data);
    EXPECT_EQ(code_of(write("cut2.png", bytes.substr(0, 12))), Errc::corrupt_data);
}

TEST_F(ImageIo, RoundTripWithinQuantization)
{
    const Image img = oracle::random_image(13, 17, 9);
    for (const char* name : {"r.pgm", "r.png"}) {
        save_image(img, dir_ / name);
        const Image back = load_gray(dir_ / name);
        ASSERT_TRUE(back.same_shape(img));
        for (std::size_t i = 0; i < img.size(); ++i)
            EXPECT_LE(std::abs(back[i] - img[i]), 1.0 / 510 + 1e-12) << name;
    }
}

TEST_F(ImageIo, ConstantHalfAndZeros)
{
    save_image(Image(3, 3, Range::unit, 0.5), dir_ / "h.pgm");
    const Image h = load_gray(dir_ / "h.pgm");
    for (double v : h.pixels())
        EXPECT_TRUE(v == 127.0 / 255 || v == 128.0 / 255);
    save_image(Image(3, 3, Range::unit, 0.0), dir_ / "z.png");
    const Image z = load_gray(dir_ / "z.png");
    for (double v : z.pixels())
        EXPECT_EQ(v, 0.0);
}

TEST_F(ImageIo, SignedRangeMapsToUnitOnDisk)
{
    const Image s(1, 3, {-1.0, 0.0, 1.0}, Range::signed_);
    save_image(s, dir_ / "s.pgm");
    const Image back = load_gray(dir_ / "s.pgm");
    EXPECT_EQ(back[0], 0.0);
    EXPECT_EQ(back[2], 1.0);
    EXPECT_NEAR(back[1], 0.5, 1.0 / 510);
}

TEST_F(ImageIo, ColorPngAndLuma)
{
    const RgbImage rgb(1, 2, {255, 0, 0, 0, 0, 255});
    save_image(rgb, dir_ / "c.png");
    const auto loaded = load_image(dir_ / "c.png");
    ASSERT_TRUE(std::holds_alternative<RgbImage>(loaded));
    EXPECT_EQ(std::get<RgbImage>(loaded), rgb);
    const Image g = load_gray(dir_ / "c.png");
    EXPECT_NEAR(g[0], 0.299, 1e-12);
    EXPECT_NEAR(g[1], 0.114, 1e-12);
}

TEST_F(ImageIo, UnwritablePath)
{
    try {
        save_image(Image(2, 2), dir_ / "no" / "such" / "dir.pgm");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::io_error);
    }
    try {
        save_image(Image(2, 2), dir_ / "no" / "such" / "dir.png");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::io_error);
    }
}

TEST_F(ImageIo, ListsImagesLexicographically)
{
    for (const char* n : {"b.pgm", "a.png", "c.txt", "B.PGM"})
        write(n, "x");
    const auto files = list_images(dir_);
    ASSERT_EQ(files.size(), 3u);
    EXPECT_EQ(files[0].filename(), "B.PGM");
    EXPECT_EQ(files[1].filename(), "a.png");
    EXPECT_EQ(files[2].filename(), "b.pgm");
}
