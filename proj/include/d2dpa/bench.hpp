#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "d2dpa/train.hpp"

namespace d2dpa {

inline constexpr const char* kToolVersion = "d2dpa 1.0.0";

// Common experiment knobs. Every run writes its outputs plus a manifest
// (seeds, dataset hashes, checkpoint hashes) sufficient to rerun it.
struct BenchSpec {
    std::string name;
    std::string out_dir = ".";
    std::uint64_t seed = 1;
    int eval_topologies = 50;
    int eval_fades = 50;
    ChannelParams channel;
    TgtConfig model;
};

struct MethodMeans {
    std::string method;
    std::vector<double> means;  // one per sweep point
};

struct SweepResult {
    std::vector<double> sweep_values;
    std::vector<MethodMeans> rows;
};

double mean_of(const std::vector<double>& v);

// Mean sum-rate of a method over a dataset; also emits per-instance rows
// (id, sum_rate, method) when csv is non-null.
double eval_max_power(const Dataset& ds, std::FILE* csv = nullptr);
double eval_wmmse(const Dataset& ds, std::FILE* csv = nullptr, int iterations = 100);
double eval_tgt(const Dataset& ds, const TgtParams& params, const TgtConfig& cfg,
                const std::string& method_name = "tgt", std::FILE* csv = nullptr);

// Table II: mean sum-rate per method per network size. Checkpoints are keyed
// by the size they were trained at; multinode_ckpt is optional.
SweepResult run_table2(const BenchSpec& spec, const std::vector<int>& sizes,
                       const std::map<int, std::string>& checkpoints,
                       const std::optional<std::string>& multinode_ckpt);

// Fig. 3: TGT mean normalized by WMMSE mean across network sizes.
SweepResult run_size_sweep(const BenchSpec& spec, const std::vector<int>& sizes,
                           const std::vector<std::pair<std::string, std::string>>& named_ckpts,
                           int topologies = 100, int fades = 10);

// Table III: generalization across Rayleigh scales at n = 50.
SweepResult run_fading_sweep(const BenchSpec& spec, const std::vector<double>& scales,
                             const std::string& checkpoint);

// Table IV: generalization across field half-widths at n = 50.
SweepResult run_density_sweep(const BenchSpec& spec, const std::vector<double>& half_widths,
                              const std::string& checkpoint);

struct HistogramResult {
    std::vector<double> tgt;
    std::vector<double> wmmse;
    double mean_diff = 0.0;  // mean(tgt - wmmse), paired
};

// Fig. 2: one topology, many fading draws, paired TGT/WMMSE sum-rates.
HistogramResult run_histogram(const BenchSpec& spec, const std::string& checkpoint,
                              int n = 50, int draws = 32000);

// Table I: mean weighted homophily of WMMSE labels per noise level.
std::vector<std::pair<double, double>> run_homophily_table(
    const BenchSpec& spec, const std::vector<double>& sigma2_grid, int n = 50,
    int instances = 300);

struct ScalingPoint {
    int d = 0;
    std::int64_t params = 0;
    double mean_sum_rate = 0.0;
    std::vector<double> size_generalization;  // per eval size, normalized by WMMSE
};

// Figs. 4-5: trains TGT at several widths on n = 30 and reports sum-rate vs
// parameter count plus each model's size-generalization curve.
std::vector<ScalingPoint> run_scaling_study(const BenchSpec& spec, const std::vector<int>& widths,
                                            const TrainConfig& tc, int train_topologies,
                                            int train_fades, const std::vector<int>& eval_sizes);

// Forward wall-time at each n; used for the quadratic-cost probe.
std::vector<std::pair<int, double>> run_complexity_probe(const TgtConfig& cfg,
                                                         const std::vector<int>& sizes,
                                                         int reps = 3, std::uint64_t seed = 1);

void write_sweep_csv(const SweepResult& r, const std::string& sweep_name, const std::string& path);
void write_svg_lines(const std::string& path, const std::vector<double>& xs,
                     const std::vector<MethodMeans>& series, const std::string& x_label,
                     const std::string& y_label);
void write_svg_histogram(const std::string& path, const std::vector<double>& a,
                         const std::vector<double>& b, const std::string& label_a,
                         const std::string& label_b, int bins = 60);

// Manifest capturing everything needed to rerun the experiment bit-for-bit.
void write_manifest(const BenchSpec& spec, const std::vector<std::string>& dataset_notes,
                    const std::vector<std::uint64_t>& dataset_hashes,
                    const std::vector<std::string>& checkpoint_paths,
                    const std::string& path);

std::uint32_t file_crc32(const std::string& path);

}  // namespace d2dpa
