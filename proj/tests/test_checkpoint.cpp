#include <percept/checkpoint.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace percept;
namespace fs = std::filesystem;

namespace {

Network sample_net(std::uint64_t seed)
{
    Network net = init_network(Shape{1, 8, 8},
                               {LayerSpec::conv2d(2, 3, 2), LayerSpec::relu(), LayerSpec::dense(5), LayerSpec::tanh(),
                                LayerSpec::binarize_ste(), LayerSpec::dense(16), LayerSpec::reshape(Shape{1, 4, 4}),
                                LayerSpec::upsample2()},
                               seed);
    net.generation = 3;
    return net;
}

void expect_same(const Network& a, const Network& b)
{
    EXPECT_EQ(a.input_shape, b.input_shape);
    EXPECT_EQ(a.residual, b.residual);
    EXPECT_EQ(a.seed, b.seed);
    EXPECT_EQ(a.generation, b.generation);
    ASSERT_EQ(a.layers.size(), b.layers.size());
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        EXPECT_EQ(a.layers[i].weights, b.layers[i].weights);
        EXPECT_EQ(a.layers[i].bias, b.layers[i].bias);
        EXPECT_EQ(a.layers[i].out, b.layers[i].out);
    }
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST(Checkpoint, AutoencoderRoundTrip)
{
    Checkpoint c;
    c.seed = 42;
    c.image_height = c.image_width = 8;
    c.range = Range::signed_;
    c.loss = "ssim";
    c.loss_scale = 0.123456789012345;
    c.model = sample_net(1);
    c.optimizer = make_optimizer_state(c.model);
    c.optimizer.step = 7;
    c.optimizer.first[0].weights[0] = 1e-300;

    const fs::path p = fs::temp_directory_path() / "percept_ckpt.json";
    save_checkpoint(c, p);
    const Checkpoint d = load_checkpoint(p);
    EXPECT_EQ(d.kind, CheckpointKind::autoencoder);
    EXPECT_EQ(d.seed, 42u);
    EXPECT_EQ(d.range, Range::signed_);
    EXPECT_EQ(d.loss, "ssim");
    EXPECT_EQ(d.loss_scale, c.loss_scale);
    expect_same(c.model, d.model);
    EXPECT_EQ(d.optimizer.step, 7);
    EXPECT_EQ(d.optimizer.first, c.optimizer.first);

    const std::string bytes = slurp(p);
    save_checkpoint(d, p);
    EXPECT_EQ(slurp(p), bytes);
    fs::remove(p);
}

TEST(Checkpoint, ElVaeAndSrKinds)
{
    Checkpoint c;
    c.kind = CheckpointKind::elvae;
    c.vae.latent_dim = 2;
    c.vae.encoder = init_network(Shape{1, 2, 2}, {LayerSpec::dense(4)}, 1);
    c.vae.decoder = init_network(Shape{2, 1, 1}, {LayerSpec::dense(4), LayerSpec::reshape(Shape{1, 2, 2})}, 2);
    c.encoder_optimizer = make_optimizer_state(c.vae.encoder);
    c.decoder_optimizer = make_optimizer_state(c.vae.decoder);
    const Checkpoint d = checkpoint_from_json(checkpoint_to_json(c));
    EXPECT_EQ(d.kind, CheckpointKind::elvae);
    EXPECT_EQ(d.vae.latent_dim, 2);
    expect_same(c.vae.encoder, d.vae.encoder);
    expect_same(c.vae.decoder, d.vae.decoder);

    Checkpoint s;
    s.kind = CheckpointKind::sr;
    s.model = init_network(Shape{1, 6, 6}, {LayerSpec::conv2d(1, 3)}, 3);
    s.model.residual = true;
    s.optimizer = make_optimizer_state(s.model);
    const Checkpoint t = checkpoint_from_json(checkpoint_to_json(s));
    EXPECT_EQ(t.kind, CheckpointKind::sr);
    expect_same(s.model, t.model);
}

TEST(Checkpoint, RejectsMalformedFiles)
{
    Checkpoint c;
    c.model = init_network(Shape{1, 2, 2}, {LayerSpec::dense(4)}, 1);
    c.optimizer = make_optimizer_state(c.model);
    Json j = checkpoint_to_json(c);

    Json extra = j;
    extra["model"]["extra"] = 1;
    EXPECT_THROW(checkpoint_from_json(extra), Error);

    Json kind = j;
    kind["kind"] = "gan";
    EXPECT_THROW(checkpoint_from_json(kind), Error);

    Json weights = j;
    weights["model"]["layers"][0]["weights"].erase(0);
    EXPECT_THROW(checkpoint_from_json(weights), Error);

    Json version = j;
    version["version"] = 99;
    EXPECT_THROW(checkpoint_from_json(version), Error);

    const fs::path p = fs::temp_directory_path() / "percept_bad.json";
    {
        std::ofstream out(p);
        out << "{ not json";
    }
    try {
        load_checkpoint(p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::corrupt_data);
    }
    fs::remove(p);
    try {
        load_checkpoint(p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::file_not_found);
    }
}

TEST(LayerJson, AllKindsRoundTrip)
{
    for (const LayerSpec& s : {LayerSpec::dense(3, 5), LayerSpec::conv2d(4, 5, 2), LayerSpec::upsample2(),
                               LayerSpec::relu(), LayerSpec::tanh(), LayerSpec::binarize_ste(),
                               LayerSpec::reshape(Shape{2, 3, 4})}) {
        const Json j = layer_spec_to_json(s);
        EXPECT_EQ(layer_spec_to_json(layer_spec_from_json(j, "t")), j);
    }
    EXPECT_THROW(layer_spec_from_json(Json{{"type", "pool"}}, "t"), Error);
    EXPECT_THROW(layer_spec_from_json(Json{{"type", "dense"}}, "t"), Error);
}
