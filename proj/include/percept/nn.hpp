#pragma once

#include "percept/error.hpp"
#include "percept/rng.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace percept {

/// Activation tensor shape, channel-major (C, H, W). Flat vectors use 1x1 spatial.
struct Shape {
    int channels = 1;
    int height = 1;
    int width = 1;

    std::size_t size() const
    {
        return static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    }
    friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s)
{
    return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" + std::to_string(s.width);
}

enum class LayerKind { dense, conv2d, upsample2, activation, binarize_ste, reshape };
enum class Activation { relu, tanh };
enum class Padding { same, valid };

struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    int in_dim = 0; ///< dense; 0 means "infer from the previous layer"
    int out_dim = 0;
    int filters = 0; ///< conv2d
    int kernel = 0;
    int stride = 1;
    Padding padding = Padding::same;
    Activation activation = Activation::relu;
    Shape target; ///< reshape

    static LayerSpec dense(int in_dim, int out_dim)
    {
        LayerSpec s;
        s.kind = LayerKind::dense;
        s.in_dim = in_dim;
        s.out_dim = out_dim;
        return s;
    }
    static LayerSpec dense(int out_dim) { return dense(0, out_dim); }
    static LayerSpec conv2d(int filters, int kernel, int stride = 1, Padding pad = Padding::same)
    {
        LayerSpec s;
        s.kind = LayerKind::conv2d;
        s.filters = filters;
        s.kernel = kernel;
        s.stride = stride;
        s.padding = pad;
        return s;
    }
    static LayerSpec upsample2()
    {
        LayerSpec s;
        s.kind = LayerKind::upsample2;
        return s;
    }
    static LayerSpec relu()
    {
        LayerSpec s;
        s.kind = LayerKind::activation;
        s.activation = Activation::relu;
        return s;
    }
    static LayerSpec tanh()
    {
        LayerSpec s;
        s.kind = LayerKind::activation;
        s.activation = Activation::tanh;
        return s;
    }
    static LayerSpec binarize_ste()
    {
        LayerSpec s;
        s.kind = LayerKind::binarize_ste;
        return s;
    }
    static LayerSpec reshape(Shape target)
    {
        LayerSpec s;
        s.kind = LayerKind::reshape;
        s.target = target;
        return s;
    }
};

struct Layer {
    LayerSpec spec;
    Shape in, out;
    std::vector<double> weights; ///< dense: out x in; conv2d: filters x C x k x k
    std::vector<double> bias;

    int pad() const { return spec.padding == Padding::same ? spec.kernel / 2 : 0; }
};

struct Network {
    Shape input_shape;
    std::vector<Layer> layers;
    bool residual = false; ///< output = layers(input) + input
    std::uint64_t seed = 0;
    std::uint64_t generation = 0; ///< bumped on every parameter update

    Shape output_shape() const { return layers.empty() ? input_shape : layers.back().out; }

    std::size_t parameter_count() const
    {
        std::size_t n = 0;
        for (const auto& l : layers)
            n += l.weights.size() + l.bias.size();
        return n;
    }
};

struct InitOptions {
    enum class Scheme { fan_in, gaussian };
    /// fan_in: U(-sqrt(3/fan_in), +sqrt(3/fan_in)); gaussian: N(0, stddev).
    Scheme scheme = Scheme::fan_in;
    double stddev = 0.001;

    static InitOptions gaussian(double stddev)
    {
        return {Scheme::gaussian, stddev};
    }
};

/// Resolve one layer's output shape and allocate its parameters.
inline Layer make_layer(const LayerSpec& spec, const Shape& in, std::size_t index)
{
    const std::string where = "layer " + std::to_string(index) + ": ";
    Layer l{spec, in, in, {}, {}};
    switch (spec.kind) {
    case LayerKind::dense: {
        require(spec.out_dim >= 1, Errc::shape_mismatch, where + "dense out_dim must be positive");
        if (spec.in_dim != 0)
            require(static_cast<std::size_t>(spec.in_dim) == in.size(), Errc::shape_mismatch,
                    where + "dense expects " + std::to_string(spec.in_dim) + " inputs, previous layer gives " +
                        std::to_string(in.size()));
        l.spec.in_dim = static_cast<int>(in.size());
        l.out = Shape{spec.out_dim, 1, 1};
        l.weights.assign(static_cast<std::size_t>(spec.out_dim) * in.size(), 0.0);
        l.bias.assign(static_cast<std::size_t>(spec.out_dim), 0.0);
        break;
    }
    case LayerKind::conv2d: {
        require(spec.kernel >= 1 && spec.kernel % 2 == 1, Errc::shape_mismatch, where + "kernel must be odd");
        require(spec.stride >= 1 && spec.filters >= 1, Errc::shape_mismatch, where + "bad stride or filter count");
        const int p = l.pad();
        const int oh = (in.height + 2 * p - spec.kernel) / spec.stride + 1;
        const int ow = (in.width + 2 * p - spec.kernel) / spec.stride + 1;
        require(in.height + 2 * p >= spec.kernel && in.width + 2 * p >= spec.kernel && oh >= 1 && ow >= 1,
                Errc::shape_mismatch, where + "input " + to_string(in) + " smaller than kernel");
        l.out = Shape{spec.filters, oh, ow};
        l.weights.assign(static_cast<std::size_t>(spec.filters) * in.channels * spec.kernel * spec.kernel, 0.0);
        l.bias.assign(static_cast<std::size_t>(spec.filters), 0.0);
        break;
    }
    case LayerKind::upsample2:
        l.out = Shape{in.channels, in.height * 2, in.width * 2};
        break;
    case LayerKind::activation:
    case LayerKind::binarize_ste:
        break;
    case LayerKind::reshape:
        require(spec.target.size() == in.size(), Errc::shape_mismatch,
                where + "cannot reshape " + to_string(in) + " to " + to_string(spec.target));
        l.out = spec.target;
        break;
    }
    return l;
}

/// Build a network and draw its weights. Biases start at zero; each layer
/// draws from its own seeded stream.
inline Network init_network(const Shape& input, const std::vector<LayerSpec>& specs, std::uint64_t seed,
                            const InitOptions& init = {})
{
    require(input.size() >= 1, Errc::shape_mismatch, "empty input shape");
    Network net;
    net.input_shape = input;
    net.seed = seed;
    Shape cur = input;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        Layer l = make_layer(specs[i], cur, i);
        if (!l.weights.empty()) {
            Rng rng(seed, "init", i);
            const double fan_in = static_cast<double>(l.weights.size() / l.bias.size());
            const double limit = std::sqrt(3.0 / fan_in);
            for (double& w : l.weights)
                w = init.scheme == InitOptions::Scheme::gaussian ? init.stddev * rng.normal()
                                                                 : rng.uniform(-limit, limit);
        }
        cur = l.out;
        net.layers.push_back(std::move(l));
    }
    return net;
}

/// Overload for networks that start with a dense layer of known width.
inline Network init_network(const std::vector<LayerSpec>& specs, std::uint64_t seed, const InitOptions& init = {})
{
    require(!specs.empty() && specs.front().kind == LayerKind::dense && specs.front().in_dim > 0,
            Errc::shape_mismatch, "input shape can only be inferred from a leading dense layer");
    return init_network(Shape{specs.front().in_dim, 1, 1}, specs, seed, init);
}

enum class Mode { train, eval };

/// Activations recorded by forward() for use by backward().
struct Tape {
    std::vector<std::vector<double>> acts; ///< acts[0] = input, acts[i+1] = output of layer i
    std::uint64_t generation = 0;
    std::size_t layer_count = 0;
};

struct ForwardResult {
    std::vector<double> output;
    Tape tape;
};

struct ParamGrad {
    std::vector<double> weights;
    std::vector<double> bias;

    friend bool operator==(const ParamGrad&, const ParamGrad&) = default;
};

struct Gradients {
    std::vector<ParamGrad> layers;
    std::vector<double> input;
};

namespace detail {

inline void dense_forward(const Layer& l, std::span<const double> in, std::vector<double>& out)
{
    const std::size_t n_in = in.size(), n_out = l.bias.size();
    out.assign(n_out, 0.0);
    for (std::size_t o = 0; o < n_out; ++o) {
        const double* w = &l.weights[o * n_in];
        double s = l.bias[o];
        for (std::size_t i = 0; i < n_in; ++i)
            s += w[i] * in[i];
        out[o] = s;
    }
}

inline void conv_forward(const Layer& l, std::span<const double> in, std::vector<double>& out)
{
    const int C = l.in.channels, H = l.in.height, W = l.in.width;
    const int F = l.out.channels, OH = l.out.height, OW = l.out.width;
    const int k = l.spec.kernel, s = l.spec.stride, p = l.pad();
    out.assign(l.out.size(), 0.0);
    for (int f = 0; f < F; ++f)
        for (int oy = 0; oy < OH; ++oy)
            for (int ox = 0; ox < OW; ++ox) {
                double acc = l.bias[static_cast<std::size_t>(f)];
                for (int c = 0; c < C; ++c)
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * s + ky - p;
                        if (iy < 0 || iy >= H)
                            continue;
                        const double* w = &l.weights[((static_cast<std::size_t>(f) * C + c) * k + ky) * k];
                        const double* row = &in[(static_cast<std::size_t>(c) * H + iy) * W];
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * s + kx - p;
                            if (ix >= 0 && ix < W)
                                acc += w[kx] * row[ix];
                        }
                    }
                out[(static_cast<std::size_t>(f) * OH + oy) * OW + ox] = acc;
            }
}

inline void conv_backward(const Layer& l, std::span<const double> in, std::span<const double> gout, ParamGrad& pg,
                          std::vector<double>& gin)
{
    const int C = l.in.channels, H = l.in.height, W = l.in.width;
    const int F = l.out.channels, OH = l.out.height, OW = l.out.width;
    const int k = l.spec.kernel, s = l.spec.stride, p = l.pad();
    for (int f = 0; f < F; ++f)
        for (int oy = 0; oy < OH; ++oy)
            for (int ox = 0; ox < OW; ++ox) {
                const double g = gout[(static_cast<std::size_t>(f) * OH + oy) * OW + ox];
                if (g == 0.0)
                    continue;
                pg.bias[static_cast<std::size_t>(f)] += g;
                for (int c = 0; c < C; ++c)
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * s + ky - p;
                        if (iy < 0 || iy >= H)
                            continue;
                        const std::size_t wbase = ((static_cast<std::size_t>(f) * C + c) * k + ky) * k;
                        const std::size_t ibase = (static_cast<std::size_t>(c) * H + iy) * W;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * s + kx - p;
                            if (ix < 0 || ix >= W)
                                continue;
                            pg.weights[wbase + kx] += g * in[ibase + ix];
                            gin[ibase + ix] += g * l.weights[wbase + kx];
                        }
                    }
            }
}

} // namespace detail

/// Evaluate the network layer by layer. Both modes behave identically
/// (binarize_ste thresholds in training and evaluation alike).
inline ForwardResult forward(const Network& net, std::span<const double> input, Mode = Mode::eval)
{
    require(input.size() == net.input_shape.size(), Errc::shape_mismatch,
            "input has " + std::to_string(input.size()) + " values, network expects " + to_string(net.input_shape));
    ForwardResult r;
    r.tape.generation = net.generation;
    r.tape.layer_count = net.layers.size();
    r.tape.acts.reserve(net.layers.size() + 1);
    r.tape.acts.emplace_back(input.begin(), input.end());
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        const Layer& l = net.layers[li];
        const std::vector<double>& in = r.tape.acts.back();
        std::vector<double> out;
        switch (l.spec.kind) {
        case LayerKind::dense: detail::dense_forward(l, in, out); break;
        case LayerKind::conv2d: detail::conv_forward(l, in, out); break;
        case LayerKind::upsample2: {
            const int C = l.in.channels, H = l.in.height, W = l.in.width;
            out.resize(l.out.size());
            for (int c = 0; c < C; ++c)
                for (int y = 0; y < 2 * H; ++y)
                    for (int x = 0; x < 2 * W; ++x)
                        out[(static_cast<std::size_t>(c) * 2 * H + y) * 2 * W + x] =
                            in[(static_cast<std::size_t>(c) * H + y / 2) * W + x / 2];
            break;
        }
        case LayerKind::activation:
            out = in;
            if (l.spec.activation == Activation::relu)
                for (double& v : out)
                    v = v > 0.0 ? v : 0.0;
            else
                for (double& v : out)
                    v = std::tanh(v);
            break;
        case LayerKind::binarize_ste:
            out = in;
            for (double& v : out)
                v = v >= 0.0 ? 1.0 : -1.0; // tie at 0 goes to +1
            break;
        case LayerKind::reshape: out = in; break;
        }
        for (double v : out)
            if (!std::isfinite(v))
                fail(Errc::non_finite, "activation of layer " + std::to_string(li));
        r.tape.acts.push_back(std::move(out));
    }
    r.output = r.tape.acts.back();
    if (net.residual) {
        require(r.output.size() == input.size(), Errc::shape_mismatch, "residual network must preserve its shape");
        for (std::size_t i = 0; i < input.size(); ++i)
            r.output[i] += input[i];
    }
    return r;
}

/// Reverse-mode gradients for an injected output gradient. binarize_ste
/// passes its incoming gradient through unchanged.
inline Gradients backward(const Network& net, const Tape& tape, std::span<const double> output_grad)
{
    require(tape.generation == net.generation && tape.layer_count == net.layers.size() &&
                tape.acts.size() == net.layers.size() + 1,
            Errc::stale_tape, "tape was recorded against different network parameters");
    require(output_grad.size() == net.output_shape().size(), Errc::shape_mismatch,
            "output gradient has " + std::to_string(output_grad.size()) + " values, expected " +
                std::to_string(net.output_shape().size()));

    Gradients g;
    g.layers.resize(net.layers.size());
    std::vector<double> cur(output_grad.begin(), output_grad.end());
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const Layer& l = net.layers[li];
        const std::vector<double>& in = tape.acts[li];
        const std::vector<double>& out = tape.acts[li + 1];
        ParamGrad& pg = g.layers[li];
        pg.weights.assign(l.weights.size(), 0.0);
        pg.bias.assign(l.bias.size(), 0.0);
        std::vector<double> gin(in.size(), 0.0);
        switch (l.spec.kind) {
        case LayerKind::dense: {
            const std::size_t n_in = in.size();
            for (std::size_t o = 0; o < cur.size(); ++o) {
                const double go = cur[o];
                pg.bias[o] = go;
                const double* w = &l.weights[o * n_in];
                double* gw = &pg.weights[o * n_in];
                for (std::size_t i = 0; i < n_in; ++i) {
                    gw[i] = go * in[i];
                    gin[i] += go * w[i];
                }
            }
            break;
        }
        case LayerKind::conv2d: detail::conv_backward(l, in, cur, pg, gin); break;
        case LayerKind::upsample2: {
            const int C = l.in.channels, H = l.in.height, W = l.in.width;
            for (int c = 0; c < C; ++c)
                for (int y = 0; y < 2 * H; ++y)
                    for (int x = 0; x < 2 * W; ++x)
                        gin[(static_cast<std::size_t>(c) * H + y / 2) * W + x / 2] +=
                            cur[(static_cast<std::size_t>(c) * 2 * H + y) * 2 * W + x];
            break;
        }
        case LayerKind::activation:
            if (l.spec.activation == Activation::relu)
                for (std::size_t i = 0; i < gin.size(); ++i)
                    gin[i] = in[i] > 0.0 ? cur[i] : 0.0;
            else
                for (std::size_t i = 0; i < gin.size(); ++i)
                    gin[i] = cur[i] * (1.0 - out[i] * out[i]);
            break;
        case LayerKind::binarize_ste:
        case LayerKind::reshape: gin = cur; break;
        }
        cur = std::move(gin);
    }
    if (net.residual)
        for (std::size_t i = 0; i < cur.size(); ++i)
            cur[i] += output_grad[i];
    g.input = std::move(cur);
    return g;
}

/// Zero-initialized gradient accumulator shaped like the network's parameters.
inline Gradients zero_gradients(const Network& net)
{
    Gradients g;
    g.layers.resize(net.layers.size());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        g.layers[i].weights.assign(net.layers[i].weights.size(), 0.0);
        g.layers[i].bias.assign(net.layers[i].bias.size(), 0.0);
    }
    return g;
}

inline void accumulate(Gradients& into, const Gradients& g, double factor = 1.0)
{
    for (std::size_t i = 0; i < into.layers.size(); ++i) {
        for (std::size_t k = 0; k < into.layers[i].weights.size(); ++k)
            into.layers[i].weights[k] += factor * g.layers[i].weights[k];
        for (std::size_t k = 0; k < into.layers[i].bias.size(); ++k)
            into.layers[i].bias[k] += factor * g.layers[i].bias[k];
    }
}

inline void scale(Gradients& g, double factor)
{
    for (auto& l : g.layers) {
        for (double& v : l.weights)
            v *= factor;
        for (double& v : l.bias)
            v *= factor;
    }
}

/// Pointers to every parameter in a fixed order (layer, weights, bias).
inline std::vector<double*> parameter_pointers(Network& net)
{
    std::vector<double*> out;
    for (auto& l : net.layers) {
        for (double& w : l.weights)
            out.push_back(&w);
        for (double& b : l.bias)
            out.push_back(&b);
    }
    return out;
}

/// Gradient values in the order of parameter_pointers().
inline std::vector<double> flatten(const Gradients& g)
{
    std::vector<double> out;
    for (const auto& l : g.layers) {
        out.insert(out.end(), l.weights.begin(), l.weights.end());
        out.insert(out.end(), l.bias.begin(), l.bias.end());
    }
    return out;
}

} // namespace percept
