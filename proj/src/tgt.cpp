#include "d2dpa/tgt.hpp"

#include <cmath>
#include <stdexcept>

#include "d2dpa/io.hpp"

namespace d2dpa {

namespace {
constexpr char kCkptMagic[] = "D2DCKPT1";
constexpr std::uint32_t kCkptVersion = 1;

std::uint64_t fnv_mix(std::uint64_t h, const void* p, std::size_t len) {
    const unsigned char* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= c[i];
        h *= 1099511628211ULL;
    }
    return h;
}

Tensor uniform_tensor(std::vector<int> shape, double bound, Rng& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = rng.uniform(-bound, bound);
    return t;
}
}  // namespace

void TgtConfig::validate() const {
    if (layers < 1) throw std::invalid_argument("TgtConfig: layers must be >= 1");
    if (heads < 1 || d < 1 || d % heads != 0)
        throw std::invalid_argument("TgtConfig: d must be a positive multiple of heads");
    if (!(pmax > 0.0)) throw std::invalid_argument("TgtConfig: pmax must be > 0");
}

std::uint64_t TgtConfig::hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    h = fnv_mix(h, &d, sizeof d);
    h = fnv_mix(h, &heads, sizeof heads);
    h = fnv_mix(h, &layers, sizeof layers);
    h = fnv_mix(h, &leaky_slope, sizeof leaky_slope);
    int s = share_qkv ? 1 : 0;
    h = fnv_mix(h, &s, sizeof s);
    h = fnv_mix(h, &pmax, sizeof pmax);
    return h;
}

std::vector<Tensor*> TgtParams::trainable() {
    std::vector<Tensor*> out = {&node_w,       &node_b,       &node_bn_gain, &node_bn_bias,
                                &edge_w,       &edge_b,       &edge_bn_gain, &edge_bn_bias};
    for (std::size_t s = 0; s < q.size(); ++s) {
        out.push_back(&q[s]);
        out.push_back(&k[s]);
        out.push_back(&v[s]);
    }
    for (std::size_t l = 0; l < ln_gain.size(); ++l) {
        out.push_back(&ln_gain[l]);
        out.push_back(&ln_bias[l]);
    }
    return out;
}

std::vector<const Tensor*> TgtParams::trainable() const {
    auto mut = const_cast<TgtParams*>(this)->trainable();
    return std::vector<const Tensor*>(mut.begin(), mut.end());
}

std::vector<std::string> TgtParams::trainable_names() const {
    std::vector<std::string> out = {"node_w",       "node_b",       "node_bn_gain", "node_bn_bias",
                                    "edge_w",       "edge_b",       "edge_bn_gain", "edge_bn_bias"};
    for (std::size_t s = 0; s < q.size(); ++s) {
        std::string tag = "s" + std::to_string(s);
        out.push_back("q_" + tag);
        out.push_back("k_" + tag);
        out.push_back("v_" + tag);
    }
    for (std::size_t l = 0; l < ln_gain.size(); ++l) {
        out.push_back("ln_gain_l" + std::to_string(l));
        out.push_back("ln_bias_l" + std::to_string(l));
    }
    return out;
}

std::vector<Tensor*> TgtParams::buffers() {
    return {&node_bn_mean, &node_bn_var, &edge_bn_mean, &edge_bn_var};
}

std::vector<std::string> TgtParams::buffer_names() const {
    return {"node_bn_mean", "node_bn_var", "edge_bn_mean", "edge_bn_var"};
}

GraphEncoding encode_graph(const ChannelInstance& inst) {
    const int n = inst.n;
    double hmax = 0.0;
    for (double v : inst.H) hmax = std::max(hmax, v);
    if (!(hmax > 0.0)) throw std::invalid_argument("encode_graph: all-zero channel matrix");

    GraphEncoding enc;
    enc.n = n;
    enc.norm_scale = hmax;
    enc.node_feats = Tensor::zeros({n, 2});
    enc.edge_feats = Tensor::zeros({n * n, 2});
    for (int i = 0; i < n; ++i) {
        enc.node_feats.at(i, 0) = inst.gain(i, i) / hmax;
        enc.node_feats.at(i, 1) = inst.weights[i];
        for (int j = 0; j < n; ++j) {
            enc.edge_feats.at(i * n + j, 0) = inst.gain(i, j) / hmax;
            enc.edge_feats.at(i * n + j, 1) = inst.gain(j, i) / hmax;
        }
    }
    return enc;
}

TgtParams init_params(const TgtConfig& cfg, Rng& rng) {
    cfg.validate();
    const int d = cfg.d, dh = cfg.head_dim();
    const int sets = cfg.share_qkv ? 1 : cfg.layers;
    const double embed_bound = 1.0 / std::sqrt(2.0);
    const double qkv_bound = 1.0 / std::sqrt(static_cast<double>(d));

    TgtParams p;
    p.node_w = uniform_tensor({d, 2}, embed_bound, rng);
    p.node_b = uniform_tensor({d}, embed_bound, rng);
    p.node_bn_gain = Tensor::full({d}, 1.0);
    p.node_bn_bias = Tensor::zeros({d});
    p.node_bn_mean = Tensor::zeros({d});
    p.node_bn_var = Tensor::full({d}, 1.0);
    p.edge_w = uniform_tensor({d, 2}, embed_bound, rng);
    p.edge_b = uniform_tensor({d}, embed_bound, rng);
    p.edge_bn_gain = Tensor::full({d}, 1.0);
    p.edge_bn_bias = Tensor::zeros({d});
    p.edge_bn_mean = Tensor::zeros({d});
    p.edge_bn_var = Tensor::full({d}, 1.0);
    for (int s = 0; s < sets; ++s) {
        p.q.push_back(uniform_tensor({d, d}, qkv_bound, rng));
        p.k.push_back(uniform_tensor({d, d}, qkv_bound, rng));
        p.v.push_back(uniform_tensor({d, d}, qkv_bound, rng));
    }
    for (int l = 0; l < cfg.layers; ++l) {
        p.ln_gain.push_back(Tensor::full({d}, 1.0));
        p.ln_bias.push_back(Tensor::zeros({d}));
    }
    return p;
}

std::int64_t num_params(const TgtConfig& cfg) {
    cfg.validate();
    const std::int64_t d = cfg.d;
    const std::int64_t sets = cfg.share_qkv ? 1 : cfg.layers;
    std::int64_t embed = 2 * (2 * d + d + d + d);        // W, b, bn gain, bn bias (node + edge)
    std::int64_t qkv = sets * 3 * d * d;
    std::int64_t ln = 2 * d * cfg.layers;
    return embed + qkv + ln;
}

TgtParamVars bind_params(Tape& tape, const TgtParams& params, bool requires_grad) {
    TgtParamVars vars;
    for (const Tensor* t : params.trainable()) vars.order.push_back(tape.leaf(*t, requires_grad));
    return vars;
}

Tape::Var tgt_forward_tape(Tape& tape, const GraphEncoding& enc, const TgtParamVars& vars,
                           const TgtParams& params, const TgtConfig& cfg, bool training,
                           BnBatchStats* stats_out, std::vector<Tensor>* attn_capture) {
    cfg.validate();
    const int n = enc.n, d = cfg.d, H = cfg.heads, dh = cfg.head_dim();
    if (vars.order.size() != params.trainable().size())
        throw std::invalid_argument("tgt_forward_tape: bound variables do not match params");

    std::size_t vi = 0;
    auto next = [&]() { return vars.order[vi++]; };
    Tape::Var node_w = next(), node_b = next(), node_bn_gain = next(), node_bn_bias = next();
    Tape::Var edge_w = next(), edge_b = next(), edge_bn_gain = next(), edge_bn_bias = next();
    const int sets = cfg.share_qkv ? 1 : cfg.layers;
    std::vector<Tape::Var> qv(sets), kv(sets), vv(sets);
    for (int s = 0; s < sets; ++s) {
        qv[s] = next();
        kv[s] = next();
        vv[s] = next();
    }
    std::vector<Tape::Var> lng(cfg.layers), lnb(cfg.layers);
    for (int l = 0; l < cfg.layers; ++l) {
        lng[l] = next();
        lnb[l] = next();
    }

    Tape::Var node_in = tape.leaf(enc.node_feats, false);
    Tape::Var edge_in = tape.leaf(enc.edge_feats, false);

    Tensor* nm = stats_out ? &stats_out->node_mean : nullptr;
    Tensor* nv = stats_out ? &stats_out->node_var : nullptr;
    Tensor* em = stats_out ? &stats_out->edge_mean : nullptr;
    Tensor* ev = stats_out ? &stats_out->edge_var : nullptr;

    Tape::Var x = tape.add_rowvec(tape.matmul_nt(node_in, node_w), node_b);
    x = tape.batch_norm_cols(x, node_bn_gain, node_bn_bias, params.node_bn_mean,
                             params.node_bn_var, training, nm, nv);
    Tape::Var e = tape.add_rowvec(tape.matmul_nt(edge_in, edge_w), edge_b);
    e = tape.batch_norm_cols(e, edge_bn_gain, edge_bn_bias, params.edge_bn_mean,
                             params.edge_bn_var, training, em, ev);

    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    for (int l = 0; l < cfg.layers; ++l) {
        const int s = cfg.share_qkv ? 0 : l;
        // one stacked projection per matrix; heads are column groups afterwards
        Tape::Var qall = tape.matmul_nt(x, qv[s]);  // row i = Q x_i, heads side by side
        Tape::Var kall = tape.matmul_nt(x, kv[s]);
        Tape::Var vall = tape.matmul_nt(x, vv[s]);
        std::vector<Tape::Var> head_out(H);
        for (int h = 0; h < H; ++h) {
            Tape::Var ek = tape.slice_cols(e, h * dh, (h + 1) * dh);       // n^2 x dh
            Tape::Var qrows = tape.slice_cols(qall, h * dh, (h + 1) * dh);  // n x dh
            Tape::Var krows = tape.slice_cols(kall, h * dh, (h + 1) * dh);
            Tape::Var keys = tape.add(tape.repeat_rows_tile(krows, n), ek);
            Tape::Var qrep = tape.repeat_rows_interleave(qrows, n);
            Tape::Var logits = tape.sum_axis(tape.mul(qrep, keys), 1);     // [n^2]
            Tape::Var scaled =
                tape.scale(tape.reshape(logits, {n, n}), inv_sqrt_d);
            for (double vval : tape.value(scaled).data)
                if (!std::isfinite(vval))
                    throw std::runtime_error("tgt_forward: non-finite attention logit");
            Tape::Var attn = tape.softmax_rows(tape.leaky_relu(scaled, cfg.leaky_slope));
            if (attn_capture) attn_capture->push_back(tape.value(attn));
            Tape::Var vrows = tape.slice_cols(vall, h * dh, (h + 1) * dh);  // row j = V x_j
            head_out[h] = tape.matmul(attn, vrows);                         // n x dh
        }
        Tape::Var ho = tape.concat_cols(head_out);
        x = tape.layer_norm_rows(tape.add(ho, x), lng[l], lnb[l]);
    }

    Tape::Var score = tape.sum_axis(x, 1);  // sum along feature dimension
    return tape.scale(tape.sigmoid(score), cfg.pmax);
}

PowerAllocation tgt_forward(const ChannelInstance& inst, const TgtParams& params,
                            const TgtConfig& cfg, std::vector<Tensor>* attn_capture) {
    Tape tape;
    GraphEncoding enc = encode_graph(inst);
    TgtParamVars vars = bind_params(tape, params, false);
    // Per-instance node-axis statistics at inference, matching what the model
    // saw in training. Global running stats mis-normalize individual
    // instances (each is scaled by its own max gain) and measurably hurt
    // sum-rate; instance stats keep inference deterministic, batching
    // invariant, and permutation equivariant.
    Tape::Var p = tgt_forward_tape(tape, enc, vars, params, cfg, /*training=*/true, nullptr,
                                   attn_capture);
    PowerAllocation out;
    out.p = tape.value(p).data;
    out.rates = pair_rates(inst, out.p);
    return out;
}

void update_running_stats(TgtParams& params, const std::vector<BnBatchStats>& batch,
                          double momentum) {
    if (batch.empty()) return;
    auto fold = [&](Tensor& running, const Tensor& (*pick)(const BnBatchStats&)) {
        Tensor avg = Tensor::zeros(running.shape);
        for (const BnBatchStats& s : batch) {
            const Tensor& t = pick(s);
            if (!t.same_shape(avg)) throw std::invalid_argument("update_running_stats: shape mismatch");
            for (std::size_t i = 0; i < avg.data.size(); ++i) avg.data[i] += t.data[i];
        }
        for (std::size_t i = 0; i < avg.data.size(); ++i)
            running.data[i] = (1.0 - momentum) * running.data[i] +
                              momentum * avg.data[i] / static_cast<double>(batch.size());
    };
    fold(params.node_bn_mean, +[](const BnBatchStats& s) -> const Tensor& { return s.node_mean; });
    fold(params.node_bn_var, +[](const BnBatchStats& s) -> const Tensor& { return s.node_var; });
    fold(params.edge_bn_mean, +[](const BnBatchStats& s) -> const Tensor& { return s.edge_mean; });
    fold(params.edge_bn_var, +[](const BnBatchStats& s) -> const Tensor& { return s.edge_var; });
}

void save_checkpoint(const TgtParams& params, const TgtConfig& cfg, std::uint64_t seed, int epoch,
                     const std::string& path) {
    BinaryWriter w;
    w.magic(kCkptMagic, sizeof(kCkptMagic) - 1);
    w.u32(kCkptVersion);
    w.u64(cfg.hash());
    w.u64(seed);
    w.u32(static_cast<std::uint32_t>(epoch));

    auto tensors = params.trainable();
    auto names = params.trainable_names();
    auto bufs = const_cast<TgtParams&>(params).buffers();
    auto buf_names = params.buffer_names();
    w.u32(static_cast<std::uint32_t>(tensors.size() + bufs.size()));
    auto emit = [&w](const std::string& name, const Tensor& t) {
        w.bytes(name);
        w.u32(static_cast<std::uint32_t>(t.shape.size()));
        for (int dim : t.shape) w.u32(static_cast<std::uint32_t>(dim));
        w.f64s(t.data);
    };
    for (std::size_t i = 0; i < tensors.size(); ++i) emit(names[i], *tensors[i]);
    for (std::size_t i = 0; i < bufs.size(); ++i) emit(buf_names[i], *bufs[i]);
    w.write_with_crc(path);
}

TgtParams load_checkpoint(const std::string& path, const TgtConfig& cfg, std::uint64_t* seed,
                          int* epoch) {
    BinaryReader r(path);
    r.expect_magic(kCkptMagic, sizeof(kCkptMagic) - 1);
    if (r.u32() != kCkptVersion) throw std::runtime_error("checkpoint version mismatch");
    if (r.u64() != cfg.hash())
        throw std::runtime_error("checkpoint was produced with a different model config");
    std::uint64_t s = r.u64();
    int e = static_cast<int>(r.u32());
    if (seed) *seed = s;
    if (epoch) *epoch = e;

    Rng dummy(0);
    TgtParams params = init_params(cfg, dummy);
    std::uint32_t count = r.u32();

    auto tensors = params.trainable();
    auto names = params.trainable_names();
    auto bufs = params.buffers();
    auto buf_names = params.buffer_names();
    if (count != tensors.size() + bufs.size())
        throw std::runtime_error("checkpoint tensor count mismatch");

    auto read_into = [&r](const std::string& expect, Tensor& t) {
        std::string name = r.bytes();
        if (name != expect) throw std::runtime_error("checkpoint tensor order mismatch: " + name);
        std::uint32_t rank = r.u32();
        std::vector<int> shape(rank);
        for (auto& dim : shape) dim = static_cast<int>(r.u32());
        if (shape != t.shape) throw std::runtime_error("checkpoint tensor shape mismatch: " + name);
        r.f64s(t.data, t.data.size());
    };
    for (std::size_t i = 0; i < tensors.size(); ++i) read_into(names[i], *tensors[i]);
    for (std::size_t i = 0; i < bufs.size(); ++i) read_into(buf_names[i], *bufs[i]);
    return params;
}

}  // namespace d2dpa
