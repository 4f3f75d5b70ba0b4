#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "dcnet/errors.hpp"
#include "dcnet/layers.hpp"
#include "dcnet/rng.hpp"
#include "dcnet/tensor.hpp"

namespace dcnet {

enum class Task { classification, regression };
enum class Precision { single_prec, double_prec };

inline const char* task_name(Task t) {
    return t == Task::classification ? "classification" : "regression";
}

struct ModelConfig {
    int64_t input_channels = 0;
    int64_t deconv_layers = 6;
    Task task = Task::classification;
    int64_t num_classes = 2;  // classification only; regression heads have width 1
    uint64_t seed = 1;
    Precision precision = Precision::single_prec;

    int64_t output_width() const {
        return task == Task::classification ? num_classes : 1;
    }

    void validate() const {
        if (input_channels < 1)
            throw ConfigError("input_channels must be positive, got " +
                              std::to_string(input_channels));
        if (deconv_layers < 3 || deconv_layers > 6)
            throw ConfigError("deconv_layers must be in [3, 6], got " +
                              std::to_string(deconv_layers));
        if (task == Task::classification && num_classes < 2)
            throw ConfigError("classification needs num_classes >= 2, got " +
                              std::to_string(num_classes));
    }
};

// ------------------------------------------------------------- layer plan --

struct DeconvPlanEntry {
    int64_t k;
    int64_t out_channels;
};

// Stride-1 deconv stacks satisfying sum(k - 1) = 31, so every depth ends at a
// 32x32 single-channel map and the convolution phase is identical across D.
inline std::vector<DeconvPlanEntry> plan_deconv_phase(int64_t D) {
    switch (D) {
        case 6:
            return {{2, 512}, {3, 256}, {5, 128}, {9, 64}, {9, 3}, {9, 1}};
        case 5:
            return {{9, 512}, {9, 128}, {9, 64}, {5, 3}, {4, 1}};
        case 4:
            return {{9, 512}, {9, 64}, {9, 3}, {8, 1}};
        case 3:
            return {{11, 512}, {11, 64}, {12, 1}};
        default:
            throw ConfigError("deconv_layers must be in [3, 6], got " + std::to_string(D));
    }
}

enum class LayerKind { deconv, relu, conv, relu_pool, fc };

// One row of the network table. Shapes use b = 1 as a placeholder; the batch
// dimension is whatever the caller feeds forward().
struct LayerSpec {
    std::string id;
    LayerKind kind;
    int64_t k = 0;  // kernel size for deconv/conv
    int64_t c_in = 0;
    int64_t c_out = 0;
    Shape4 in_shape;
    Shape4 out_shape;
};

namespace detail {

// Builds the LayerSpec chain for an arbitrary stack: a deconv phase (each deconv
// followed by its own ReLU row), then one conv + relu/maxpool row pair per
// entry of conv_channels, then the fully connected head.
inline std::vector<LayerSpec> chain_specs(int64_t c_in,
                                          const std::vector<DeconvPlanEntry>& plan,
                                          const std::vector<int64_t>& conv_channels,
                                          int64_t out_width) {
    std::vector<LayerSpec> specs;
    int64_t ln = 1;
    Shape4 cur{1, 1, 1, c_in};
    for (const auto& d : plan) {
        LayerSpec dc;
        dc.id = "L" + std::to_string(ln++);
        dc.kind = LayerKind::deconv;
        dc.k = d.k;
        dc.c_in = cur.c;
        dc.c_out = d.out_channels;
        dc.in_shape = cur;
        dc.out_shape = Shape4{1, cur.h + d.k - 1, cur.w + d.k - 1, d.out_channels};
        cur = dc.out_shape;
        specs.push_back(dc);

        LayerSpec re;
        re.id = "L" + std::to_string(ln++);
        re.kind = LayerKind::relu;
        re.c_in = re.c_out = cur.c;
        re.in_shape = re.out_shape = cur;
        specs.push_back(re);
    }
    for (int64_t co : conv_channels) {
        LayerSpec cv;
        cv.id = "L" + std::to_string(ln++);
        cv.kind = LayerKind::conv;
        cv.k = 2;
        cv.c_in = cur.c;
        cv.c_out = co;
        cv.in_shape = cur;
        cv.out_shape = Shape4{1, cur.h, cur.w, co};  // bottom-right same padding
        cur = cv.out_shape;
        specs.push_back(cv);

        if (cur.h % 2 != 0 || cur.w % 2 != 0)
            throw ConfigError("conv phase reached odd spatial dims " + cur.str());
        LayerSpec rp;
        rp.id = "L" + std::to_string(ln++);
        rp.kind = LayerKind::relu_pool;
        rp.c_in = rp.c_out = cur.c;
        rp.in_shape = cur;
        rp.out_shape = Shape4{1, cur.h / 2, cur.w / 2, cur.c};
        cur = rp.out_shape;
        specs.push_back(rp);
    }
    LayerSpec fc;
    fc.id = "L" + std::to_string(ln++);
    fc.kind = LayerKind::fc;
    fc.c_in = cur.h * cur.w * cur.c;
    fc.c_out = out_width;
    fc.in_shape = cur;
    fc.out_shape = Shape4{1, 1, 1, out_width};
    specs.push_back(fc);
    return specs;
}

}  // namespace detail

// The network table for a config: deconv phase rows, Conv(2,1) + ReLU/maxpool
// row pairs with output channels 3, 128, 256, 512, then the head.
inline std::vector<LayerSpec> layer_plan(const ModelConfig& config) {
    config.validate();
    return detail::chain_specs(config.input_channels,
                               plan_deconv_phase(config.deconv_layers),
                               {3, 128, 256, 512}, config.output_width());
}

// ------------------------------------------------------------------ model --

template <typename T>
struct Param {
    std::string id;  // e.g. "L1.weights"
    Tensor4<T> value;
    Tensor4<T> velocity;
};

template <typename T>
struct Model {
    ModelConfig config;
    std::vector<LayerSpec> layers;
    std::vector<Param<T>> params;
    // Index of a layer's weights in params (bias follows at +1); -1 if none.
    std::vector<int> param_index;

    int64_t param_count() const {
        int64_t n = 0;
        for (const auto& p : params) n += p.value.size();
        return n;
    }

    const Param<T>& param(const std::string& id) const {
        for (const auto& p : params)
            if (p.id == id) return p;
        throw InputError("unknown parameter id: " + id);
    }
};

namespace detail {

// He-normal fan-in. A stride-1 deconv output pixel receives at most
// min(k, in_dim) taps per axis, which collapses to the usual k*k*c_in once
// the input is at least kernel-sized.
inline int64_t init_fan_in(const LayerSpec& s) {
    switch (s.kind) {
        case LayerKind::deconv:
            return s.c_in * std::min(s.k, s.in_shape.h) * std::min(s.k, s.in_shape.w);
        case LayerKind::conv:
            return s.k * s.k * s.c_in;
        case LayerKind::fc:
            return s.c_in;
        default:
            return 1;
    }
}

template <typename T>
Model<T> build_stack(const ModelConfig& config, std::vector<LayerSpec> specs) {
    Model<T> m;
    m.config = config;
    m.layers = std::move(specs);
    m.param_index.assign(m.layers.size(), -1);
    for (size_t i = 0; i < m.layers.size(); ++i) {
        const LayerSpec& s = m.layers[i];
        if (s.kind == LayerKind::relu || s.kind == LayerKind::relu_pool) continue;
        // One private stream per parametric layer, derived from the model
        // seed and the layer ordinal, so adding layers never shifts the
        // draws of the others.
        Rng rng(splitmix64(config.seed ^ static_cast<uint64_t>(i + 1)));
        Shape4 wshape = s.kind == LayerKind::fc ? Shape4{1, 1, s.c_in, s.c_out}
                                                : Shape4{s.k, s.k, s.c_in, s.c_out};
        m.param_index[i] = static_cast<int>(m.params.size());
        m.params.push_back({s.id + ".weights",
                            he_normal<T>(wshape, init_fan_in(s), rng),
                            Tensor4<T>(wshape)});
        Shape4 bshape{1, 1, 1, s.c_out};
        m.params.push_back({s.id + ".bias", Tensor4<T>(bshape), Tensor4<T>(bshape)});
    }
    return m;
}

template <typename T>
ConvKernel<T> as_kernel(const Model<T>& m, size_t layer_i) {
    int pi = m.param_index[layer_i];
    return ConvKernel<T>{m.params[pi].value, m.params[pi + 1].value, 1};
}

}  // namespace detail

template <typename T>
Model<T> build(const ModelConfig& config) {
    return detail::build_stack<T>(config, layer_plan(config));
}

// Miniature stack with the same layer pattern (deconv/ReLU pairs, two
// conv + pool pairs, head) but only ~840 parameters, ending at an 8x8 map.
// Small enough for central finite differences over every parameter.
template <typename T>
Model<T> build_small(uint64_t seed, Task task, int64_t out_width) {
    ModelConfig config;
    config.input_channels = 4;
    config.deconv_layers = 3;
    config.task = task;
    config.num_classes = task == Task::classification ? out_width : 2;
    config.seed = seed;
    config.precision =
        std::is_same_v<T, double> ? Precision::double_prec : Precision::single_prec;
    config.validate();
    auto specs = detail::chain_specs(config.input_channels, {{3, 8}, {3, 4}, {4, 1}},
                                     {3, 8}, config.output_width());
    return detail::build_stack<T>(config, std::move(specs));
}

// ---------------------------------------------------------------- forward --

template <typename T>
struct ForwardResult {
    // Softmax probabilities for classification, raw predictions otherwise.
    Tensor4<T> output;
    bool has_cache = false;
    // acts[i] is the input of layer i; acts.back() is the head's raw output
    // (pre-softmax logits for classification).
    std::vector<Tensor4<T>> acts;
    std::vector<Tensor4<T>> mids;  // ReLU output inside relu_pool layers
    std::vector<PoolCache> pools;
};

template <typename T>
ForwardResult<T> forward(const Model<T>& m, const Tensor4<T>& x, bool keep_cache) {
    const Shape4 xs = x.shape();
    if (xs.h != 1 || xs.w != 1 || xs.c != m.config.input_channels)
        throw ShapeError("model input must be (b, 1, 1, " +
                         std::to_string(m.config.input_channels) + "), got " + xs.str());
    ForwardResult<T> r;
    r.has_cache = keep_cache;
    if (keep_cache) {
        r.mids.resize(m.layers.size());
        r.pools.resize(m.layers.size());
        r.acts.reserve(m.layers.size() + 1);
        r.acts.push_back(x);
    }
    Tensor4<T> cur = x;
    for (size_t i = 0; i < m.layers.size(); ++i) {
        const LayerSpec& s = m.layers[i];
        switch (s.kind) {
            case LayerKind::deconv:
                cur = deconv2d_forward(cur, detail::as_kernel(m, i));
                break;
            case LayerKind::relu:
                cur = relu(cur);
                break;
            case LayerKind::conv:
                cur = conv2d_forward(cur, detail::as_kernel(m, i),
                                             same_pad_bottom_right(s.k));
                break;
            case LayerKind::relu_pool: {
                Tensor4<T> mid = relu(cur);
                auto [pooled, cache] = maxpool2(mid);
                cur = std::move(pooled);
                if (keep_cache) {
                    r.mids[i] = std::move(mid);
                    r.pools[i] = std::move(cache);
                }
                break;
            }
            case LayerKind::fc: {
                int pi = m.param_index[i];
                cur = fc_forward(cur, m.params[pi].value, m.params[pi + 1].value);
                break;
            }
        }
        if (keep_cache) r.acts.push_back(cur);
    }
    r.output = m.config.task == Task::classification ? softmax(cur) : cur;
    return r;
}

// --------------------------------------------------------------- backward --

// output_grad is the loss gradient at the head's raw output: for
// classification that is the pre-softmax logits, which is exactly the node
// cross_entropy differentiates through; for regression it is the prediction
// itself. Returns one gradient tensor per entry of m.params, same order.
// input_grad, when given, receives the gradient at the network input.
template <typename T>
std::vector<Tensor4<T>> backward(const Model<T>& m, const ForwardResult<T>& fwd,
                                 const Tensor4<T>& output_grad,
                                 Tensor4<T>* input_grad = nullptr) {
    if (!fwd.has_cache || fwd.acts.size() != m.layers.size() + 1)
        throw StateError("backward needs caches from a keep_cache forward of this model");
    if (!(output_grad.shape() == fwd.acts.back().shape()))
        throw ShapeError("output_grad shape " + output_grad.shape().str() +
                         " does not match head output " + fwd.acts.back().shape().str());
    std::vector<Tensor4<T>> grads(m.params.size());
    Tensor4<T> g = output_grad;
    for (size_t ii = m.layers.size(); ii-- > 0;) {
        const LayerSpec& s = m.layers[ii];
        switch (s.kind) {
            case LayerKind::deconv: {
                auto cg = deconv2d_backward(fwd.acts[ii], detail::as_kernel(m, ii), g);
                grads[m.param_index[ii]] = std::move(cg.dweights);
                grads[m.param_index[ii] + 1] = std::move(cg.dbias);
                g = std::move(cg.dx);
                break;
            }
            case LayerKind::relu:
                g = relu_backward(fwd.acts[ii + 1], g);
                break;
            case LayerKind::conv: {
                auto cg = conv2d_backward(fwd.acts[ii], detail::as_kernel(m, ii),
                                                  same_pad_bottom_right(s.k), g);
                grads[m.param_index[ii]] = std::move(cg.dweights);
                grads[m.param_index[ii] + 1] = std::move(cg.dbias);
                g = std::move(cg.dx);
                break;
            }
            case LayerKind::relu_pool:
                g = maxpool2_backward(fwd.pools[ii], g);
                g = relu_backward(fwd.mids[ii], g);
                break;
            case LayerKind::fc: {
                int pi = m.param_index[ii];
                auto fg = fc_backward(fwd.acts[ii], m.params[pi].value, g);
                grads[pi] = std::move(fg.dweights);
                grads[pi + 1] = std::move(fg.dbias);
                g = std::move(fg.dx);
                break;
            }
        }
    }
    if (input_grad) *input_grad = std::move(g);
    return grads;
}

// ------------------------------------------------------- feature taps -----

// Runs forward up to and including layer_id and returns that activation.
// "input" returns x unchanged; the final layer id returns what forward()
// returns (softmax probabilities for classification).
template <typename T>
Tensor4<T> extract_features(const Model<T>& m, const Tensor4<T>& x,
                            const std::string& layer_id) {
    const Shape4 xs = x.shape();
    if (xs.h != 1 || xs.w != 1 || xs.c != m.config.input_channels)
        throw ShapeError("model input must be (b, 1, 1, " +
                         std::to_string(m.config.input_channels) + "), got " + xs.str());
    if (layer_id == "input") return x;
    size_t stop = m.layers.size();
    for (size_t i = 0; i < m.layers.size(); ++i)
        if (m.layers[i].id == layer_id) {
            stop = i;
            break;
        }
    if (stop == m.layers.size()) throw InputError("unknown layer id: " + layer_id);
    Tensor4<T> cur = x;
    for (size_t i = 0; i <= stop; ++i) {
        const LayerSpec& s = m.layers[i];
        switch (s.kind) {
            case LayerKind::deconv:
                cur = deconv2d_forward(cur, detail::as_kernel(m, i));
                break;
            case LayerKind::relu:
                cur = relu(cur);
                break;
            case LayerKind::conv:
                cur = conv2d_forward(cur, detail::as_kernel(m, i),
                                             same_pad_bottom_right(s.k));
                break;
            case LayerKind::relu_pool:
                cur = maxpool2(relu(cur)).first;
                break;
            case LayerKind::fc: {
                int pi = m.param_index[i];
                cur = fc_forward(cur, m.params[pi].value, m.params[pi + 1].value);
                if (m.config.task == Task::classification) cur = softmax(cur);
                break;
            }
        }
    }
    return cur;
}

// ------------------------------------------------------------ checkpoints --

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

inline void put_u32(std::ostream& os, uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_u64(std::ostream& os, uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_str(std::ostream& os, const std::string& s) {
    put_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline uint32_t get_u32(std::istream& is) {
    uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
        throw FormatError("checkpoint truncated");
    return v;
}
inline uint64_t get_u64(std::istream& is) {
    uint64_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
        throw FormatError("checkpoint truncated");
    return v;
}
inline std::string get_str(std::istream& is) {
    uint64_t n = get_u64(is);
    if (n > (1ull << 20)) throw FormatError("checkpoint string length implausible");
    std::string s(n, '\0');
    if (n && !is.read(s.data(), static_cast<std::streamsize>(n)))
        throw FormatError("checkpoint truncated");
    return s;
}

constexpr uint32_t kCheckpointVersion = 1;

inline void put_config(std::ostream& os, const ModelConfig& c) {
    put_u64(os, static_cast<uint64_t>(c.input_channels));
    put_u64(os, static_cast<uint64_t>(c.deconv_layers));
    os.put(c.task == Task::classification ? 0 : 1);
    put_u64(os, static_cast<uint64_t>(c.output_width()));
    put_u64(os, c.seed);
    os.put(c.precision == Precision::single_prec ? 0 : 1);
}

inline ModelConfig get_config(std::istream& is) {
    ModelConfig c;
    c.input_channels = static_cast<int64_t>(get_u64(is));
    c.deconv_layers = static_cast<int64_t>(get_u64(is));
    int task = is.get();
    int64_t l = static_cast<int64_t>(get_u64(is));
    c.seed = get_u64(is);
    int prec = is.get();
    if (!is || task < 0 || task > 1 || prec < 0 || prec > 1)
        throw FormatError("checkpoint config block malformed");
    c.task = task == 0 ? Task::classification : Task::regression;
    c.num_classes = task == 0 ? l : 2;
    c.precision = prec == 0 ? Precision::single_prec : Precision::double_prec;
    if (task == 1 && l != 1) throw FormatError("regression checkpoint with width != 1");
    return c;
}

}  // namespace detail

// Binary layout: magic "DCN1", version u32, config block (channels, depth,
// task, head width, seed, precision), parameter count u64, then one record
// per parameter: id string, shape as 4 u64, raw little-endian scalars.
template <typename T>
void save_checkpoint(const Model<T>& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw InputError("cannot open checkpoint for writing: " + path);
    os.write("DCN1", 4);
    detail::put_u32(os, detail::kCheckpointVersion);
    detail::put_config(os, m.config);
    detail::put_u64(os, m.params.size());
    for (const auto& p : m.params) {
        detail::put_str(os, p.id);
        const Shape4& s = p.value.shape();
        for (int64_t d : {s.b, s.h, s.w, s.c}) detail::put_u64(os, static_cast<uint64_t>(d));
        os.write(reinterpret_cast<const char*>(p.value.data()),
                 static_cast<std::streamsize>(sizeof(T) * p.value.size()));
    }
    if (!os) throw StateError("checkpoint write failed: " + path);
}

// Reads only the header; used to pick the precision before a typed load.
inline ModelConfig peek_checkpoint_config(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open checkpoint: " + path);
    char magic[4] = {};
    if (!is.read(magic, 4) || std::string(magic, 4) != "DCN1")
        throw FormatError("not a checkpoint file: " + path);
    uint32_t version = detail::get_u32(is);
    if (version != detail::kCheckpointVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    return detail::get_config(is);
}

// Rebuilds the stack from the stored config, then overwrites every parameter
// with the stored scalars. Round-trips bit-exactly; velocities reset to zero.
template <typename T>
Model<T> load_checkpoint(const std::string& path) {
    ModelConfig config = peek_checkpoint_config(path);
    if ((config.precision == Precision::double_prec) != std::is_same_v<T, double>)
        throw FormatError("checkpoint precision does not match requested scalar type");
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open checkpoint: " + path);
    is.seekg(4 + sizeof(uint32_t));
    (void)detail::get_config(is);
    Model<T> m = build<T>(config);
    uint64_t n = detail::get_u64(is);
    if (n != m.params.size())
        throw FormatError("checkpoint parameter count " + std::to_string(n) +
                          " does not match rebuilt model (" +
                          std::to_string(m.params.size()) + ")");
    for (auto& p : m.params) {
        std::string id = detail::get_str(is);
        if (id != p.id)
            throw FormatError("checkpoint parameter order mismatch: expected " + p.id +
                              ", found " + id);
        Shape4 s;
        s.b = static_cast<int64_t>(detail::get_u64(is));
        s.h = static_cast<int64_t>(detail::get_u64(is));
        s.w = static_cast<int64_t>(detail::get_u64(is));
        s.c = static_cast<int64_t>(detail::get_u64(is));
        if (!(s == p.value.shape()))
            throw FormatError("checkpoint shape mismatch for " + p.id + ": stored " +
                              s.str() + ", expected " + p.value.shape().str());
        if (!is.read(reinterpret_cast<char*>(p.value.data()),
                     static_cast<std::streamsize>(sizeof(T) * p.value.size())))
            throw FormatError("checkpoint truncated in " + p.id);
        std::fill(p.velocity.data(), p.velocity.data() + p.velocity.size(), T(0));
    }
    return m;
}

}  // namespace dcnet
