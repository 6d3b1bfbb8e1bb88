// Writes the seeded synthetic datasets used by the example configs.
//
//   make_data <root>
//
// <root>/toy/{train,valid}       256 toy 16x16 PGMs, 80/20 split
// <root>/sr_train                HR scenes for SR patch sampling
// <root>/sr_valid                small held-out scenes for SR training runs
// <root>/sr_standin              five scene PNGs sized like the Set5 images
// <root>/select/reference        reference set for select-c
// <root>/select/c{1,10,100,1000} degraded look-alikes standing in for samples

#include <percept.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace percept;

namespace {

std::string numbered(const char* prefix, int i, const char* ext)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%03d.%s", prefix, i, ext);
    return buf;
}

void write_set(const fs::path& dir, const std::vector<Image>& images, std::size_t begin, std::size_t end)
{
    fs::create_directories(dir);
    for (std::size_t i = begin; i < end; ++i)
        save_image(images[i], dir / numbered("img", static_cast<int>(i - begin), "pgm"));
}

// blur: fraction of detail removed by a down/up round trip; noise: stddev.
Image degrade(const Image& x, bool blur, double noise, Rng& rng)
{
    Image y = blur ? resize_bicubic(resize_bicubic(x, x.height() / 2, x.width() / 2), x.height(), x.width()) : x;
    for (double& v : y.pixels())
        v += noise * rng.normal();
    return clip_to_range(y);
}

} // namespace

int main(int argc, char** argv)
{
    if (argc != 2) {
        std::cerr << "usage: make_data <root>\n";
        return 2;
    }
    const fs::path root = argv[1];
    try {
        const auto toy = toy_dataset(256, 16, 16, 2024);
        write_set(root / "toy" / "train", toy, 0, 205);
        write_set(root / "toy" / "valid", toy, 205, 256);

        fs::create_directories(root / "sr_train");
        for (int i = 0; i < 8; ++i)
            save_image(scene_image(96, 96, 100 + static_cast<std::uint64_t>(i)),
                       root / "sr_train" / numbered("scene", i, "png"));

        fs::create_directories(root / "sr_valid");
        for (int i = 0; i < 3; ++i)
            save_image(scene_image(64, 64, 150 + static_cast<std::uint64_t>(i)),
                       root / "sr_valid" / numbered("scene", i, "png"));

        const std::vector<std::pair<int, int>> set5_sizes{{512, 512}, {288, 288}, {256, 256}, {280, 280}, {344, 228}};
        fs::create_directories(root / "sr_standin");
        for (std::size_t i = 0; i < set5_sizes.size(); ++i)
            save_image(scene_image(set5_sizes[i].first, set5_sizes[i].second, 200 + i),
                       root / "sr_standin" / numbered("scene", static_cast<int>(i), "png"));

        const auto ref = toy_dataset(64, 16, 16, 3001);
        write_set(root / "select" / "reference", ref, 0, ref.size());
        const auto base = toy_dataset(64, 16, 16, 3002);
        struct Cand {
            const char* name;
            bool blur;
            double noise;
        };
        for (const Cand& c : {Cand{"c1", true, 0.0}, Cand{"c10", true, 0.02}, Cand{"c100", false, 0.0},
                              Cand{"c1000", false, 0.15}}) {
            std::vector<Image> imgs;
            for (std::size_t i = 0; i < base.size(); ++i) {
                Rng rng(3003, c.name, i);
                imgs.push_back(degrade(base[i], c.blur, c.noise, rng));
            }
            write_set(root / "select" / c.name, imgs, 0, imgs.size());
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cout << "datasets written under " << root.string() << "\n";
    return 0;
}
