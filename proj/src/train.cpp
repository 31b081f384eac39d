#include "d2dpa/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace d2dpa {

Tape::Var instance_neg_wsr(Tape& tape, const ChannelInstance& inst, Tape::Var p) {
    const int n = inst.n;
    // c_i = (log(sigma2 + sum_j g_ij p_j) - log(sigma2 + sum_{j!=i} g_ij p_j)) / ln 2
    Tensor G = Tensor::zeros({n, n});
    Tensor diag = Tensor::zeros({n});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double h = inst.gain(i, j);
            G.at(i, j) = h * h;
            if (i == j) diag.data[i] = h * h;
        }
    Tape::Var g_leaf = tape.leaf(std::move(G), false);
    Tape::Var diag_leaf = tape.leaf(std::move(diag), false);
    Tape::Var w_leaf = tape.leaf(Tensor::vec(inst.weights), false);

    Tape::Var p_col = tape.reshape(p, {n, 1});
    Tape::Var gp = tape.reshape(tape.matmul(g_leaf, p_col), {n});
    Tape::Var signal = tape.mul(diag_leaf, p);
    Tape::Var total = tape.add_scalar(gp, inst.sigma2);
    Tape::Var denom = tape.sub(total, signal);
    Tape::Var rates = tape.scale(tape.sub(tape.log_op(total), tape.log_op(denom)),
                                 1.0 / std::log(2.0));
    return tape.scale(tape.sum_all(tape.mul(w_leaf, rates)), -1.0);
}

double batch_loss(const std::vector<const ChannelInstance*>& batch, const TgtParams& params,
                  const TgtConfig& cfg, std::vector<Tensor>* grads,
                  std::vector<BnBatchStats>* stats) {
    if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
    const bool want_grads = grads != nullptr;
    const double inv_b = 1.0 / static_cast<double>(batch.size());

    if (want_grads) {
        grads->clear();
        for (const Tensor* t : params.trainable()) grads->push_back(Tensor::zeros(t->shape));
    }

    double loss = 0.0;
    Tape tape;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const ChannelInstance& inst = *batch[b];
        tape.clear();
        GraphEncoding enc = encode_graph(inst);
        TgtParamVars vars = bind_params(tape, params, want_grads);
        BnBatchStats inst_stats;
        Tape::Var p = tgt_forward_tape(tape, enc, vars, params, cfg, /*training=*/true,
                                       stats ? &inst_stats : nullptr);
        Tape::Var l = tape.scale(instance_neg_wsr(tape, inst, p), inv_b);
        double lv = tape.value(l).data[0];
        if (!std::isfinite(lv))
            throw std::runtime_error("batch_loss: non-finite loss at batch slot " +
                                     std::to_string(b));
        loss += lv;
        if (stats) stats->push_back(std::move(inst_stats));
        if (want_grads) {
            tape.backward(l);
            for (std::size_t k = 0; k < vars.order.size(); ++k) {
                const Tensor& g = tape.grad(vars.order[k]);
                Tensor& acc = (*grads)[k];
                for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += g.data[i];
            }
        }
    }
    return loss;
}

TrainResult train(const TrainConfig& tc, const TgtConfig& cfg, const Dataset& dataset) {
    if (dataset.instances.empty()) throw std::invalid_argument("train: empty dataset");
    if (tc.epochs < 1 || !(tc.lr >= 0.0)) throw std::invalid_argument("train: bad config");
    cfg.validate();

    // hold out the last val_fraction of topologies for checkpoint selection
    std::set<std::uint32_t> topo_ids(dataset.topology_ids.begin(), dataset.topology_ids.end());
    std::size_t n_topo = topo_ids.size();
    std::size_t n_val_topo =
        n_topo >= 2 ? std::max<std::size_t>(1, static_cast<std::size_t>(tc.val_fraction * n_topo))
                    : 0;
    std::vector<std::uint32_t> sorted_ids(topo_ids.begin(), topo_ids.end());
    std::set<std::uint32_t> val_ids(sorted_ids.end() - n_val_topo, sorted_ids.end());

    std::vector<std::size_t> train_idx, val_idx;
    for (std::size_t i = 0; i < dataset.instances.size(); ++i) {
        if (val_ids.count(dataset.topology_ids[i]))
            val_idx.push_back(i);
        else
            train_idx.push_back(i);
    }
    if (train_idx.empty()) throw std::invalid_argument("train: no training instances left");

    Rng init_rng(tc.seed);
    TgtParams params = init_params(cfg, init_rng);
    AdamW opt(AdamWConfig{tc.lr, tc.beta1, tc.beta2, tc.adam_eps, tc.weight_decay});

    TrainResult result;
    result.params = params;
    double best_val = -1e300;

    Dataset val_view;
    for (std::size_t i : val_idx) {
        val_view.instances.push_back(dataset.instances[i]);
        val_view.topology_ids.push_back(dataset.topology_ids[i]);
    }

    std::vector<Tensor> grads;
    std::vector<BnBatchStats> stats;
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        if (tc.cosine_decay) {
            double t = tc.epochs > 1 ? static_cast<double>(epoch) / (tc.epochs - 1) : 0.0;
            opt.set_lr(tc.lr_final +
                       0.5 * (tc.lr - tc.lr_final) * (1.0 + std::cos(t * 3.14159265358979323846)));
        }
        // deterministic shuffle: fixed seed per epoch
        Rng shuffle_rng = Rng(tc.seed).split(0x5u).split(static_cast<std::uint64_t>(epoch));
        std::vector<std::size_t> order = train_idx;
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.next_u64() % i]);

        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
            std::size_t end = std::min(order.size(), start + tc.batch_size);
            std::vector<const ChannelInstance*> batch;
            for (std::size_t i = start; i < end; ++i) batch.push_back(&dataset.instances[order[i]]);
            stats.clear();
            double loss;
            try {
                loss = batch_loss(batch, params, cfg, &grads, &stats);
            } catch (const std::runtime_error& err) {
                throw std::runtime_error(std::string(err.what()) + " (epoch " +
                                         std::to_string(epoch) + ", instance id " +
                                         std::to_string(order[start]) + ")");
            }
            epoch_loss += loss;
            ++n_batches;

            auto ptrs = params.trainable();
            std::vector<const Tensor*> gptrs;
            for (const Tensor& g : grads) gptrs.push_back(&g);
            opt.step(ptrs, gptrs);
            update_running_stats(params, stats);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = epoch_loss / static_cast<double>(n_batches);
        if (!val_view.instances.empty()) {
            rec.val_sum_rate = evaluate(params, cfg, val_view).mean;
            if (rec.val_sum_rate > best_val) {
                best_val = rec.val_sum_rate;
                result.params = params;
                result.best_epoch = epoch;
            }
        } else {
            result.params = params;
            result.best_epoch = epoch;
        }
        result.history.push_back(rec);
    }
    result.last_params = params;
    return result;
}

EvalSummary evaluate(const TgtParams& params, const TgtConfig& cfg, const Dataset& dataset) {
    if (dataset.instances.empty()) throw std::invalid_argument("evaluate: empty dataset");
    EvalSummary s;
    s.per_instance.reserve(dataset.instances.size());
    for (const ChannelInstance& inst : dataset.instances) {
        PowerAllocation a = tgt_forward(inst, params, cfg);
        s.per_instance.push_back(weighted_sum_rate(inst, a.p));
    }
    double sum = 0.0;
    for (double v : s.per_instance) sum += v;
    s.mean = sum / static_cast<double>(s.per_instance.size());
    double var = 0.0;
    for (double v : s.per_instance) var += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(var / static_cast<double>(s.per_instance.size()));
    return s;
}

void write_history_csv(const std::vector<EpochRecord>& history, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    std::fprintf(f, "epoch,loss,val_sum_rate\n");
    for (const EpochRecord& r : history)
        std::fprintf(f, "%d,%.17g,%.17g\n", r.epoch, r.train_loss, r.val_sum_rate);
    std::fclose(f);
}

}  // namespace d2dpa
