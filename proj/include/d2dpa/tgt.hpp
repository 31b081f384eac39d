#pragma once

#include <string>
#include <vector>

#include "d2dpa/netgen.hpp"
#include "d2dpa/objective.hpp"
#include "d2dpa/rng.hpp"
#include "d2dpa/tensor.hpp"

namespace d2dpa {

struct TgtConfig {
    int d = 64;               // embedding width
    int heads = 32;
    int layers = 3;
    double leaky_slope = 0.2;
    bool share_qkv = true;    // one Q/K/V set reused by every layer
    double pmax = 1.0;

    int head_dim() const { return d / heads; }
    void validate() const;
    std::uint64_t hash() const;
};

// All tensors of the model. Q/K/V are d x d matrices whose rows are grouped
// by head (head h owns rows [h*dh, (h+1)*dh)); with share_qkv there is
// exactly one set, otherwise one per layer. The batch-norm running
// statistics are buffers, not trainable parameters.
struct TgtParams {
    Tensor node_w, node_b;                    // 2 -> d affine
    Tensor node_bn_gain, node_bn_bias;
    Tensor node_bn_mean, node_bn_var;         // running stats
    Tensor edge_w, edge_b;
    Tensor edge_bn_gain, edge_bn_bias;
    Tensor edge_bn_mean, edge_bn_var;
    std::vector<Tensor> q, k, v;               // [set], d x d stacked heads
    std::vector<Tensor> ln_gain, ln_bias;      // per layer

    std::vector<Tensor*> trainable();
    std::vector<const Tensor*> trainable() const;
    std::vector<std::string> trainable_names() const;
    std::vector<Tensor*> buffers();           // running stats
    std::vector<std::string> buffer_names() const;
};

struct GraphEncoding {
    int n = 0;
    Tensor node_feats;   // n x 2: [h'_ii, w_i]
    Tensor edge_feats;   // n^2 x 2, row i*n+j: [h'_ij, h'_ji]
    double norm_scale = 1.0;  // max |h| divided out of H
};

// Fresh batch statistics produced by a training-mode forward; the caller
// folds them into the running stats (momentum 0.1) in a fixed order.
struct BnBatchStats {
    Tensor node_mean, node_var;
    Tensor edge_mean, edge_var;
};

GraphEncoding encode_graph(const ChannelInstance& inst);

TgtParams init_params(const TgtConfig& cfg, Rng& rng);

std::int64_t num_params(const TgtConfig& cfg);

// Builds the full forward pass on the tape and returns the power vector
// (shape [n], values strictly inside (0, pmax)). `vars` must come from
// bind_params on the same tape. attn_capture, when set, receives the
// attention matrix (n x n) of every head of every layer in order.
struct TgtParamVars {
    std::vector<Tape::Var> order;  // same order as TgtParams::trainable()
};

TgtParamVars bind_params(Tape& tape, const TgtParams& params, bool requires_grad);

Tape::Var tgt_forward_tape(Tape& tape, const GraphEncoding& enc, const TgtParamVars& vars,
                           const TgtParams& params, const TgtConfig& cfg, bool training,
                           BnBatchStats* stats_out = nullptr,
                           std::vector<Tensor>* attn_capture = nullptr);

// Inference convenience: no gradients; batch norm uses this instance's own
// node-axis statistics (the running-stat buffers are kept in checkpoints but
// do not affect inference).
PowerAllocation tgt_forward(const ChannelInstance& inst, const TgtParams& params,
                            const TgtConfig& cfg, std::vector<Tensor>* attn_capture = nullptr);

void update_running_stats(TgtParams& params, const std::vector<BnBatchStats>& batch,
                          double momentum = 0.1);

void save_checkpoint(const TgtParams& params, const TgtConfig& cfg, std::uint64_t seed, int epoch,
                     const std::string& path);
TgtParams load_checkpoint(const std::string& path, const TgtConfig& cfg, std::uint64_t* seed = nullptr,
                          int* epoch = nullptr);

}  // namespace d2dpa
