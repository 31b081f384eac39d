#pragma once

#include <string>
#include <vector>

#include "d2dpa/netgen.hpp"
#include "d2dpa/optim.hpp"
#include "d2dpa/tgt.hpp"

namespace d2dpa {

struct TrainConfig {
    int epochs = 50;
    double lr = 5e-4;
    int batch_size = 64;
    std::uint64_t seed = 1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.01;
    double val_fraction = 0.05;  // held-out training topologies for checkpoint selection
    bool cosine_decay = false;   // anneal lr to lr_final over the run; off by default
    double lr_final = 0.0;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_sum_rate = 0.0;
};

struct TrainResult {
    TgtParams params;       // best-validation checkpoint
    TgtParams last_params;  // state after the final epoch
    std::vector<EpochRecord> history;
    int best_epoch = 0;
};

struct EvalSummary {
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<double> per_instance;
};

// Negative mean weighted sum-rate of the batch, differentiable through the
// model output. Rates use the true (unnormalized) channel and sigma2.
Tape::Var instance_neg_wsr(Tape& tape, const ChannelInstance& inst, Tape::Var p);

// Loss of a batch at the current parameters; fills `grads` (same order as
// TgtParams::trainable) when non-null. Gradients are reduced over instances
// in index order. Training-mode batch norm; `stats`, when non-null, receives
// one entry per instance for the running-stat update.
double batch_loss(const std::vector<const ChannelInstance*>& batch, const TgtParams& params,
                  const TgtConfig& cfg, std::vector<Tensor>* grads,
                  std::vector<BnBatchStats>* stats = nullptr);

TrainResult train(const TrainConfig& tc, const TgtConfig& cfg, const Dataset& dataset);

EvalSummary evaluate(const TgtParams& params, const TgtConfig& cfg, const Dataset& dataset);

void write_history_csv(const std::vector<EpochRecord>& history, const std::string& path);

}  // namespace d2dpa
