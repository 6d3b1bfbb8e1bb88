// Drives the percept binary end to end in a scratch directory.

#include <percept/checkpoint.hpp>
#include <percept/image_io.hpp>
#include <percept/synthetic.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;
using namespace percept;

namespace {

const fs::path cli = PERCEPT_CLI;
const fs::path make_data = PERCEPT_MAKE_DATA;
const fs::path configs = fs::path(PERCEPT_SOURCE_DIR) / "configs";

struct CliRun {
    int exit = -1;
    std::string out;
};

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Scratch directory holding data/ from make_data; commands run inside it.
const fs::path& work()
{
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / "percept_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        const std::string cmd = make_data.string() + " " + (d / "data").string() + " > /dev/null";
        if (std::system(cmd.c_str()) != 0)
            throw std::runtime_error("make_data failed");
        return d;
    }();
    return dir;
}

CliRun run(const std::string& args)
{
    const fs::path log = work() / "stdout.txt";
    const std::string cmd =
        "cd " + work().string() + " && " + cli.string() + " " + args + " > " + log.string() + " 2> /dev/null";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

std::string cfg(const std::string& name) { return (configs / name).string(); }

void write(const fs::path& p, const std::string& text)
{
    std::ofstream(p, std::ios::binary) << text;
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

} // namespace

TEST(CliCompare, IdenticalAndMismatched)
{
    const fs::path a = work() / "cmp_a.png", b = work() / "cmp_b.png";
    save_image(scene_image(40, 40, 1), a);
    save_image(scene_image(40, 48, 2), b);
    const CliRun same = run("compare " + a.string() + " " + a.string());
    EXPECT_EQ(same.exit, 0);
    EXPECT_EQ(same.out, "metric,value\npsnr_db,inf\nssim,1\nms_ssim,n/a\nmse,0\nmae,0\n");
    EXPECT_EQ(run("compare " + a.string() + " " + b.string()).exit, 2);
    const CliRun sub = run("compare --metrics ssim,mse --window 7 " + a.string() + " " + a.string());
    EXPECT_EQ(sub.out, "metric,value\nssim,1\nmse,0\n");
    EXPECT_EQ(run("compare --metrics lpips " + a.string() + " " + a.string()).exit, 2);
    EXPECT_EQ(run("compare " + a.string() + " missing.png").exit, 1);
}

TEST(CliGradCheck, PassCorruptAndSchema)
{
    write(work() / "gc.json", R"({"seed": 3, "grad_check": {"pairs": 1, "ssim_sizes": [16], "ms_pixels": 20}})");
    const CliRun ok = run("grad-check --config gc.json");
    EXPECT_EQ(ok.exit, 0);
    EXPECT_EQ(ok.out.find("FAIL"), std::string::npos);
    EXPECT_NE(ok.out.find("PASS ms-ssim-176"), std::string::npos);
    EXPECT_EQ(run("grad-check --config gc.json").out, ok.out);

    write(work() / "gc_bad.json", R"({"grad_check": {"pairs": 1, "ssim_sizes": [16], "corrupt": "layer-tanh"}})");
    const CliRun bad = run("grad-check --config gc_bad.json");
    EXPECT_EQ(bad.exit, 1);
    EXPECT_NE(bad.out.find("FAIL layer-tanh"), std::string::npos);

    write(work() / "gc_key.json", R"({"grad_check": {"pairz": 1}})");
    EXPECT_EQ(run("grad-check --config gc_key.json").exit, 2);
    write(work() / "gc_name.json", R"({"grad_check": {"corrupt": "nothing"}})");
    EXPECT_EQ(run("grad-check --config gc_name.json").exit, 2);
}

TEST(CliTrain, AutoencoderArtifactsAndDeterminism)
{
    ASSERT_EQ(run("train --config " + cfg("toy_conv_ae.json") + " --out-dir t1").exit, 0);
    ASSERT_EQ(run("train --config " + cfg("toy_conv_ae.json") + " --out-dir t2").exit, 0);
    const fs::path t1 = work() / "t1", t2 = work() / "t2";
    EXPECT_EQ(slurp(t1 / "checkpoint.json"), slurp(t2 / "checkpoint.json"));
    EXPECT_EQ(slurp(t1 / "report.csv"), slurp(t2 / "report.csv"));
    EXPECT_TRUE(fs::exists(t1 / "grids" / "epoch_000.pgm"));
    EXPECT_TRUE(fs::exists(t1 / "grids" / "epoch_001.pgm"));
    EXPECT_EQ(slurp(t1 / "grids" / "epoch_003.pgm"), slurp(t2 / "grids" / "epoch_003.pgm"));

    // two rows of eight 16x16 cells with one-pixel gaps
    const Image grid = load_gray(t1 / "grids" / "epoch_000.pgm");
    EXPECT_EQ(grid.height(), 2 * 16 + 1);
    EXPECT_EQ(grid.width(), 8 * 16 + 7);

    std::istringstream rep(slurp(t1 / "report.csv"));
    std::string header, first, line, last;
    std::getline(rep, header);
    std::getline(rep, first);
    while (std::getline(rep, line))
        last = line;
    EXPECT_EQ(header, "epoch,train_loss,valid_loss");
    EXPECT_EQ(first.rfind("0,", 0), 0u);
    auto column = [](const std::string& row, int k) {
        std::istringstream ss(row);
        std::string v;
        for (int i = 0; i <= k; ++i)
            std::getline(ss, v, ',');
        return std::stod(v);
    };
    EXPECT_LT(column(last, 1), column(first, 1));

    const Checkpoint c = load_checkpoint(t1 / "checkpoint.json");
    EXPECT_EQ(c.kind, CheckpointKind::autoencoder);
    EXPECT_EQ(c.range, Range::signed_);
}

TEST(CliTrain, ValidatesBeforeWriting)
{
    std::string text = slurp(configs / "toy_conv_ae.json");
    text.replace(text.find("data/toy/train"), 14, "data/nowhere");
    write(work() / "missing.json", text);
    EXPECT_EQ(run("train --config missing.json --out-dir never").exit, 2);
    EXPECT_FALSE(fs::exists(work() / "never"));

    write(work() / "extra.json", R"({"model": {"kind": "autoencoder", "layers": [{"type": "relu"}], "dropout": 0.5}})");
    EXPECT_EQ(run("train --config extra.json --out-dir never").exit, 2);
    write(work() / "noloss.json", R"({"data": {"train": "data/toy/train", "valid": "data/toy/valid"},
        "model": {"layers": [{"type": "dense", "units": 256}]}, "optimizer": {"kind": "sgd", "lr": 0.1}})");
    EXPECT_EQ(run("train --config noloss.json --out-dir never").exit, 2);
    write(work() / "badshape.json", R"({"data": {"train": "data/toy/train", "valid": "data/toy/valid"},
        "model": {"layers": [{"type": "dense", "units": 10}]}, "loss": {"name": "mse"},
        "optimizer": {"kind": "sgd", "lr": 0.1}})");
    EXPECT_EQ(run("train --config badshape.json --out-dir never").exit, 2);
    EXPECT_FALSE(fs::exists(work() / "never"));
}

TEST(CliSample, ElVaeOnly)
{
    ASSERT_EQ(run("train --config " + cfg("toy_elvae.json") + " --out-dir vae").exit, 0);
    EXPECT_TRUE(fs::exists(work() / "vae" / "grids" / "prior_samples.pgm"));
    ASSERT_EQ(run("sample --checkpoint vae/checkpoint.json -n 4 --seed 5 --out-dir s1").exit, 0);
    ASSERT_EQ(run("sample --checkpoint vae/checkpoint.json -n 4 --seed 5 --out-dir s2").exit, 0);
    for (int i = 0; i < 4; ++i) {
        const std::string name = "sample_00" + std::to_string(i) + ".pgm";
        ASSERT_TRUE(fs::exists(work() / "s1" / name));
        EXPECT_EQ(slurp(work() / "s1" / name), slurp(work() / "s2" / name));
    }
    EXPECT_FALSE(fs::exists(work() / "s1" / "sample_004.pgm"));
    EXPECT_EQ(run("sample --checkpoint vae/checkpoint.json -n 0 --out-dir s0").exit, 0);
    EXPECT_FALSE(fs::exists(work() / "s0"));

    ASSERT_EQ(run("train --config " + cfg("toy_conv_ae.json") + " --out-dir ae").exit, 0);
    EXPECT_EQ(run("sample --checkpoint ae/checkpoint.json -n 2 --out-dir s3").exit, 2);
    EXPECT_FALSE(fs::exists(work() / "s3"));
}

TEST(CliEncode, RowsColumnsAndEmpty)
{
    ASSERT_EQ(run("train --config " + cfg("toy_ae.json") + " --out-dir dense").exit, 0);
    fs::create_directories(work() / "ten");
    for (int i = 0; i < 10; ++i) {
        const std::string name = "img_00" + std::to_string(i) + ".pgm";
        fs::copy_file(work() / "data" / "toy" / "valid" / name, work() / "ten" / name,
                      fs::copy_options::overwrite_existing);
    }
    ASSERT_EQ(run("encode --checkpoint dense/checkpoint.json --data ten --out f1.csv").exit, 0);
    ASSERT_EQ(run("encode --checkpoint dense/checkpoint.json --data ten --out f2.csv").exit, 0);
    const std::string csv = slurp(work() / "f1.csv");
    EXPECT_EQ(csv, slurp(work() / "f2.csv"));
    EXPECT_EQ(count_lines(csv), 11);
    const std::string header = csv.substr(0, csv.find('\n'));
    EXPECT_EQ(std::count(header.begin(), header.end(), ','), 32); // binarized bottleneck
    EXPECT_EQ(csv.find("img_000.pgm"), header.size() + 1);

    fs::create_directories(work() / "nothing");
    ASSERT_EQ(run("encode --checkpoint dense/checkpoint.json --data nothing --out f3.csv").exit, 0);
    EXPECT_EQ(count_lines(slurp(work() / "f3.csv")), 1);

    fs::create_directories(work() / "big");
    save_image(scene_image(20, 20, 1), work() / "big" / "x.png");
    EXPECT_EQ(run("encode --checkpoint dense/checkpoint.json --data big --out f4.csv").exit, 1);
}

TEST(CliSelect, PicksMatchingCandidateAndSwaps)
{
    const CliRun r = run("select-c --config " + cfg("select_c.json") + " --out-dir sel");
    ASSERT_EQ(r.exit, 0);
    EXPECT_NE(r.out.find("chosen_C,100\n"), std::string::npos);
    EXPECT_EQ(slurp(work() / "sel" / "selection.csv"), r.out);
    EXPECT_EQ(run("select-c --config " + cfg("select_c.json") + " --out-dir sel").out, r.out);

    write(work() / "swap_a.json", R"({"select": {"reference": "data/select/reference", "candidates": [
        {"C": 1, "samples": "data/select/c100"}, {"C": 2, "samples": "data/select/c1000"}]}})");
    write(work() / "swap_b.json", R"({"select": {"reference": "data/select/reference", "candidates": [
        {"C": 1, "samples": "data/select/c1000"}, {"C": 2, "samples": "data/select/c100"}]}})");
    EXPECT_NE(run("select-c --config swap_a.json --out-dir sa").out.find("chosen_C,1\n"), std::string::npos);
    EXPECT_NE(run("select-c --config swap_b.json --out-dir sb").out.find("chosen_C,2\n"), std::string::npos);

    write(work() / "one.json", R"({"select": {"reference": "data/select/reference", "candidates": [
        {"C": 1, "samples": "data/select/c100"}]}})");
    EXPECT_EQ(run("select-c --config one.json --out-dir s1c").exit, 2);
}

TEST(CliSelect, CheckpointCandidates)
{
    ASSERT_EQ(run("train --config " + cfg("toy_elvae.json") + " --out-dir vae_a").exit, 0);
    ASSERT_EQ(run("train --config " + cfg("toy_elvae.json") + " --seed 2 --out-dir vae_b").exit, 0);
    ASSERT_EQ(run("train --config " + cfg("toy_conv_ae.json") + " --out-dir ae").exit, 0);
    write(work() / "ck.json", R"({"select": {"reference": "data/toy/valid", "count": 16, "candidates": [
        {"C": 10, "checkpoint": "vae_a/checkpoint.json"}, {"C": 1000, "checkpoint": "vae_b/checkpoint.json"},
        {"C": 5, "samples": "data/select/c1"}]}})");
    const CliRun r = run("select-c --config ck.json --out-dir ck");
    ASSERT_EQ(r.exit, 0);
    EXPECT_NE(r.out.find("\n10,"), std::string::npos);
    EXPECT_NE(r.out.find("chosen_C,"), std::string::npos);
    EXPECT_EQ(run("select-c --config ck.json --out-dir ck2").out, r.out);

    write(work() / "ck_bad.json", R"({"select": {"reference": "data/toy/valid", "candidates": [
        {"C": 10, "checkpoint": "ae/checkpoint.json"}, {"C": 5, "samples": "data/select/c1"}]}})");
    EXPECT_EQ(run("select-c --config ck_bad.json --out-dir ck3").exit, 2);
    EXPECT_FALSE(fs::exists(work() / "ck3"));
}

TEST(CliSrEval, BicubicAndModelColumns)
{
    write(work() / "sr1.json", R"({"sr": {"hr_dir": "data/sr_standin", "scale": 4}})");
    const CliRun r = run("sr-eval --config sr1.json --out-dir sr1");
    ASSERT_EQ(r.exit, 0);
    EXPECT_EQ(r.out.rfind("| Metric | bicubic |\n", 0), 0u);
    EXPECT_EQ(slurp(work() / "sr1" / "sr_report.md"), r.out);
    EXPECT_EQ(count_lines(slurp(work() / "sr1" / "sr_report.csv")), 6);
    run("sr-eval --config sr1.json --out-dir sr1b");
    EXPECT_EQ(slurp(work() / "sr1" / "sr_report.csv"), slurp(work() / "sr1b" / "sr_report.csv"));

    ASSERT_EQ(run("train --config " + cfg("srcnn_toy.json") + " --out-dir srcnn").exit, 0);
    write(work() / "sr2.json", R"({"sr": {"hr_dir": "data/sr_valid", "scale": 4,
        "models": {"srcnn": "srcnn/checkpoint.json"}}})");
    const CliRun m = run("sr-eval --config sr2.json --out-dir sr2");
    ASSERT_EQ(m.exit, 0);
    EXPECT_EQ(m.out.rfind("| Metric | bicubic | srcnn |\n", 0), 0u);
    EXPECT_EQ(count_lines(slurp(work() / "sr2" / "sr_report.csv")), 1 + 2 * 3);

    write(work() / "sr3.json", R"({"sr": {"hr_dir": "data/sr_standin", "models": {"x": "vae/checkpoint.json"}}})");
    ASSERT_EQ(run("train --config " + cfg("toy_elvae.json") + " --out-dir vae").exit, 0);
    EXPECT_EQ(run("sr-eval --config sr3.json --out-dir sr3").exit, 2);
    fs::create_directories(work() / "empty_hr");
    write(work() / "sr4.json", R"({"sr": {"hr_dir": "empty_hr"}})");
    EXPECT_EQ(run("sr-eval --config sr4.json --out-dir sr4").exit, 1);
}

TEST(CliUsage, ExitCodes)
{
    EXPECT_EQ(run("").exit, 2);
    EXPECT_EQ(run("frobnicate").exit, 2);
    EXPECT_EQ(run("--help").exit, 0);
    EXPECT_EQ(run("train").exit, 2);
    EXPECT_EQ(run("train --config no_such.json").exit, 2);
    write(work() / "junk.json", "{ nope");
    EXPECT_EQ(run("train --config junk.json").exit, 2);
}
