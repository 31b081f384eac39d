#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "d2dpa/baselines.hpp"
#include "d2dpa/bench.hpp"
#include "d2dpa/optim.hpp"
#include "d2dpa/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace d2dpa;

namespace {

struct CliState {
    std::uint64_t seed = 1;
    std::string config_path;
    std::string out_dir = "out";
    std::string checkpoint;
    int threads = 1;
    json cfg = json::object();
};

json load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw CLI::ValidationError("--config", "cannot open " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw CLI::ValidationError("--config", std::string("parse error: ") + e.what());
    }
    return j;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (j.contains(key)) return j.at(key).get<T>();
    return fallback;
}

ChannelParams channel_from(const json& cfg) {
    ChannelParams p;
    if (!cfg.contains("channel")) return p;
    const json& c = cfg.at("channel");
    p.sigma2 = get_or(c, "sigma2", p.sigma2);
    p.pmax = get_or(c, "pmax", p.pmax);
    p.fading_scale = get_or(c, "fading_scale", p.fading_scale);
    p.weight = get_or(c, "weight", p.weight);
    p.half_width = get_or(c, "half_width", p.half_width);
    p.rx_min = get_or(c, "rx_min", p.rx_min);
    p.rx_max = get_or(c, "rx_max", p.rx_max);
    p.pathloss_exponent = get_or(c, "pathloss_exponent", p.pathloss_exponent);
    return p;
}

TgtConfig model_from(const json& cfg) {
    TgtConfig m;
    if (!cfg.contains("model")) return m;
    const json& c = cfg.at("model");
    m.d = get_or(c, "d", m.d);
    m.heads = get_or(c, "heads", m.heads);
    m.layers = get_or(c, "layers", m.layers);
    m.leaky_slope = get_or(c, "leaky_slope", m.leaky_slope);
    m.share_qkv = get_or(c, "share_qkv", m.share_qkv);
    m.pmax = get_or(c, "pmax", m.pmax);
    m.validate();
    return m;
}

TrainConfig train_from(const json& cfg, std::uint64_t seed) {
    TrainConfig t;
    t.seed = seed;
    if (!cfg.contains("train")) return t;
    const json& c = cfg.at("train");
    t.epochs = get_or(c, "epochs", t.epochs);
    t.lr = get_or(c, "lr", t.lr);
    t.batch_size = get_or(c, "batch_size", t.batch_size);
    t.beta1 = get_or(c, "beta1", t.beta1);
    t.beta2 = get_or(c, "beta2", t.beta2);
    t.adam_eps = get_or(c, "adam_eps", t.adam_eps);
    t.weight_decay = get_or(c, "weight_decay", t.weight_decay);
    t.val_fraction = get_or(c, "val_fraction", t.val_fraction);
    t.cosine_decay = get_or(c, "cosine_decay", t.cosine_decay);
    t.lr_final = get_or(c, "lr_final", t.lr_final);
    return t;
}

BenchSpec spec_from(const CliState& st, const std::string& name) {
    BenchSpec spec;
    spec.name = name;
    spec.out_dir = st.out_dir;
    spec.seed = st.seed;
    spec.channel = channel_from(st.cfg);
    spec.model = model_from(st.cfg);
    if (st.cfg.contains("eval")) {
        spec.eval_topologies = get_or(st.cfg.at("eval"), "topologies", spec.eval_topologies);
        spec.eval_fades = get_or(st.cfg.at("eval"), "fades", spec.eval_fades);
    }
    fs::create_directories(spec.out_dir);
    return spec;
}

std::string outpath(const BenchSpec& spec, const std::string& file) {
    return (fs::path(spec.out_dir) / file).string();
}

std::string require_checkpoint(const CliState& st, const json& section, const char* what) {
    if (!st.checkpoint.empty()) return st.checkpoint;
    if (section.contains("checkpoint")) return section.at("checkpoint").get<std::string>();
    throw CLI::ValidationError("--checkpoint", std::string("required for ") + what);
}

json section(const CliState& st, const char* name) {
    return st.cfg.contains(name) ? st.cfg.at(name) : json::object();
}

void print_sweep(const SweepResult& r, const std::string& sweep_name) {
    std::printf("%-16s", "method");
    for (double v : r.sweep_values) std::printf(" %s=%-10g", sweep_name.c_str(), v);
    std::printf("\n");
    for (const MethodMeans& row : r.rows) {
        std::printf("%-16s", row.method.c_str());
        for (double m : row.means) std::printf(" %-14.4f", m);
        std::printf("\n");
    }
}

int cmd_gen_data(const CliState& st) {
    BenchSpec spec = spec_from(st, "gen-data");
    json d = section(st, "data");
    std::vector<int> sizes = get_or(d, "sizes", std::vector<int>{50});
    int topologies = get_or(d, "topologies", 500);
    int fades = get_or(d, "fades", 20);

    Dataset ds = gen_dataset(sizes, topologies, fades, spec.channel, st.seed);
    std::string bin = outpath(spec, "dataset.bin");
    save_dataset(ds, bin);
    export_dataset_csv(ds, outpath(spec, "dataset.csv"));
    write_manifest(spec, {"dataset.bin"}, {dataset_hash(ds)}, {}, outpath(spec, "manifest.json"));
    std::printf("wrote %s (%zu instances, hash %016llx)\n", bin.c_str(), ds.instances.size(),
                static_cast<unsigned long long>(dataset_hash(ds)));
    return 0;
}

int cmd_train(const CliState& st, const std::string& data_path) {
    BenchSpec spec = spec_from(st, "train");
    Dataset ds;
    if (!data_path.empty()) {
        ds = load_dataset(data_path);
    } else {
        json d = section(st, "data");
        ds = gen_dataset(get_or(d, "sizes", std::vector<int>{50}), get_or(d, "topologies", 500),
                         get_or(d, "fades", 20), spec.channel, st.seed);
    }
    TrainConfig tc = train_from(st.cfg, st.seed);
    std::printf("training on %zu instances, %d epochs, %lld parameters\n", ds.instances.size(),
                tc.epochs, static_cast<long long>(num_params(spec.model)));
    TrainResult res = train(tc, spec.model, ds);

    std::string ckpt = st.checkpoint.empty() ? outpath(spec, "model.ckpt") : st.checkpoint;
    save_checkpoint(res.params, spec.model, st.seed, res.best_epoch, ckpt);
    write_history_csv(res.history, outpath(spec, "history.csv"));
    write_manifest(spec, {"training data"}, {dataset_hash(ds)}, {ckpt},
                   outpath(spec, "manifest.json"));
    std::printf("best epoch %d (val sum-rate %.4f), checkpoint %s\n", res.best_epoch,
                res.history[res.best_epoch].val_sum_rate, ckpt.c_str());
    return 0;
}

int cmd_eval(const CliState& st, const std::string& data_path, int n) {
    BenchSpec spec = spec_from(st, "eval");
    Dataset ds;
    if (!data_path.empty())
        ds = load_dataset(data_path);
    else
        ds = gen_dataset({n}, spec.eval_topologies, spec.eval_fades, spec.channel, st.seed);

    std::FILE* csv = std::fopen(outpath(spec, "eval.csv").c_str(), "w");
    if (!csv) throw std::runtime_error("cannot open eval.csv for writing");
    std::fprintf(csv, "instance,sum_rate,method\n");
    std::printf("max_power  %.4f\n", eval_max_power(ds, csv));
    std::printf("wmmse      %.4f\n", eval_wmmse(ds, csv));
    std::vector<std::string> ckpts;
    if (!st.checkpoint.empty()) {
        TgtParams params = load_checkpoint(st.checkpoint, spec.model);
        std::printf("tgt        %.4f\n", eval_tgt(ds, params, spec.model, "tgt", csv));
        ckpts.push_back(st.checkpoint);
    }
    std::fclose(csv);
    write_manifest(spec, {"evaluation data"}, {dataset_hash(ds)}, ckpts,
                   outpath(spec, "manifest.json"));
    return 0;
}

int cmd_table1(const CliState& st) {
    BenchSpec spec = spec_from(st, "table1");
    json t = section(st, "table1");
    std::vector<double> grid =
        get_or(t, "sigma2_grid", std::vector<double>{1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0});
    int n = get_or(t, "n", 50);
    int instances = get_or(t, "instances", 300);

    auto rows = run_homophily_table(spec, grid, n, instances);
    std::string path = outpath(spec, "table1.csv");
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    std::fprintf(f, "sigma2,homophily\n");
    for (auto& [s2, h] : rows) {
        std::fprintf(f, "%.17g,%.17g\n", s2, h);
        std::printf("sigma2=%-10g h=%.4f\n", s2, h);
    }
    std::fclose(f);
    write_manifest(spec, {"homophily channels"}, {}, {}, outpath(spec, "manifest.json"));
    return 0;
}

int cmd_table2(const CliState& st) {
    BenchSpec spec = spec_from(st, "table2");
    json t = section(st, "table2");
    std::vector<int> sizes = get_or(t, "sizes", std::vector<int>{20, 30, 40, 50});
    std::map<int, std::string> ckpts;
    if (t.contains("checkpoints"))
        for (auto& [k, v] : t.at("checkpoints").items())
            ckpts[std::stoi(k)] = v.get<std::string>();
    std::optional<std::string> multinode;
    if (t.contains("multinode")) multinode = t.at("multinode").get<std::string>();
    if (ckpts.empty() && !st.checkpoint.empty())
        for (int n : sizes) ckpts[n] = st.checkpoint;

    SweepResult r = run_table2(spec, sizes, ckpts, multinode);
    write_sweep_csv(r, "n", outpath(spec, "table2.csv"));
    print_sweep(r, "n");
    std::vector<std::string> used;
    for (auto& [n, p] : ckpts) used.push_back(p);
    if (multinode) used.push_back(*multinode);
    write_manifest(spec, {"table2 eval sets"}, {}, used, outpath(spec, "manifest.json"));
    return 0;
}

int cmd_table3(const CliState& st) {
    BenchSpec spec = spec_from(st, "table3");
    json t = section(st, "table3");
    std::vector<double> scales = get_or(t, "scales", std::vector<double>{0.5, 1, 2, 3, 4});
    std::string ckpt = require_checkpoint(st, t, "table3");
    SweepResult r = run_fading_sweep(spec, scales, ckpt);
    write_sweep_csv(r, "scale", outpath(spec, "table3.csv"));
    print_sweep(r, "scale");
    write_manifest(spec, {"fading sweep eval sets"}, {}, {ckpt}, outpath(spec, "manifest.json"));
    return 0;
}

int cmd_table4(const CliState& st) {
    BenchSpec spec = spec_from(st, "table4");
    json t = section(st, "table4");
    std::vector<double> widths =
        get_or(t, "half_widths", std::vector<double>{200, 150, 100, 50, 25, 50.0 / 3.0, 12.5});
    std::string ckpt = require_checkpoint(st, t, "table4");
    SweepResult r = run_density_sweep(spec, widths, ckpt);
    write_sweep_csv(r, "half_width", outpath(spec, "table4.csv"));
    print_sweep(r, "half_width");
    write_manifest(spec, {"density sweep eval sets"}, {}, {ckpt}, outpath(spec, "manifest.json"));
    return 0;
}

int cmd_fig2(const CliState& st) {
    BenchSpec spec = spec_from(st, "fig2");
    json t = section(st, "fig2");
    int n = get_or(t, "n", 50);
    int draws = get_or(t, "draws", 32000);
    std::string ckpt = require_checkpoint(st, t, "fig2");

    HistogramResult hr = run_histogram(spec, ckpt, n, draws);
    std::string path = outpath(spec, "fig2.csv");
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    std::fprintf(f, "instance,tgt,wmmse\n");
    for (std::size_t i = 0; i < hr.tgt.size(); ++i)
        std::fprintf(f, "%zu,%.17g,%.17g\n", i, hr.tgt[i], hr.wmmse[i]);
    std::fclose(f);
    write_svg_histogram(outpath(spec, "fig2.svg"), hr.tgt, hr.wmmse, "tgt", "wmmse");
    write_manifest(spec, {"histogram channels"}, {}, {ckpt}, outpath(spec, "manifest.json"));
    std::printf("tgt mean %.4f, wmmse mean %.4f, paired diff %.4f over %zu draws\n",
                mean_of(hr.tgt), mean_of(hr.wmmse), hr.mean_diff, hr.tgt.size());
    return 0;
}

int cmd_fig3(const CliState& st) {
    BenchSpec spec = spec_from(st, "fig3");
    json t = section(st, "fig3");
    std::vector<int> sizes =
        get_or(t, "sizes", std::vector<int>{20, 30, 40, 50, 60, 70, 80, 90, 100});
    std::vector<std::pair<std::string, std::string>> ckpts;
    if (t.contains("checkpoints"))
        for (auto& [k, v] : t.at("checkpoints").items()) ckpts.emplace_back(k, v.get<std::string>());
    if (ckpts.empty() && !st.checkpoint.empty()) ckpts.emplace_back("tgt", st.checkpoint);
    if (ckpts.empty()) throw CLI::ValidationError("--checkpoint", "required for fig3");

    SweepResult r = run_size_sweep(spec, sizes, ckpts, get_or(t, "topologies", 100),
                              get_or(t, "fades", 10));
    write_sweep_csv(r, "n", outpath(spec, "fig3.csv"));
    write_svg_lines(outpath(spec, "fig3.svg"), r.sweep_values, r.rows, "network size",
                    "normalized sum rate");
    print_sweep(r, "n");
    std::vector<std::string> used;
    for (auto& [name, p] : ckpts) used.push_back(p);
    write_manifest(spec, {"size sweep eval sets"}, {}, used, outpath(spec, "manifest.json"));
    return 0;
}

int cmd_scaling(const CliState& st, bool with_complexity) {
    BenchSpec spec = spec_from(st, with_complexity ? "fig5" : "fig4");
    json t = section(st, "scaling");
    std::vector<int> widths = get_or(t, "widths", std::vector<int>{4, 8, 16, 32, 64, 104});
    std::vector<int> eval_sizes = get_or(t, "eval_sizes", std::vector<int>{20, 30, 40, 50});
    TrainConfig tc = train_from(st.cfg, st.seed);

    auto points = run_scaling_study(spec, widths, tc, get_or(t, "train_topologies", 100),
                                    get_or(t, "train_fades", 20), eval_sizes);

    std::string path = outpath(spec, with_complexity ? "fig5.csv" : "fig4.csv");
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    std::fprintf(f, "d,params,sum_rate_n30");
    for (int n : eval_sizes) std::fprintf(f, ",norm_n%d", n);
    std::fprintf(f, "\n");
    std::vector<double> xs;
    std::vector<MethodMeans> series{{"sum_rate_n30", {}}};
    for (const ScalingPoint& p : points) {
        std::fprintf(f, "%d,%lld,%.17g", p.d, static_cast<long long>(p.params), p.mean_sum_rate);
        for (double g : p.size_generalization) std::fprintf(f, ",%.17g", g);
        std::fprintf(f, "\n");
        std::printf("d=%-4d params=%-8lld sum-rate@n30=%.4f\n", p.d,
                    static_cast<long long>(p.params), p.mean_sum_rate);
        xs.push_back(static_cast<double>(p.params));
        series[0].means.push_back(p.mean_sum_rate);
    }
    std::fclose(f);
    write_svg_lines(outpath(spec, with_complexity ? "fig5.svg" : "fig4.svg"), xs, series,
                    "parameter count", "mean sum rate (n=30)");

    if (with_complexity) {
        std::vector<int> probe_sizes = get_or(t, "complexity_sizes", std::vector<int>{16, 32, 64, 128});
        auto times = run_complexity_probe(spec.model, probe_sizes, 3, st.seed);
        std::string cpath = outpath(spec, "complexity.csv");
        std::FILE* cf = std::fopen(cpath.c_str(), "w");
        if (!cf) throw std::runtime_error("cannot open for writing: " + cpath);
        std::fprintf(cf, "n,forward_seconds\n");
        for (auto& [n, sec] : times) {
            std::fprintf(cf, "%d,%.17g\n", n, sec);
            std::printf("forward n=%-4d %.6fs\n", n, sec);
        }
        std::fclose(cf);
    }
    write_manifest(spec, {"scaling study"}, {}, {}, outpath(spec, "manifest.json"));
    return 0;
}

int cmd_gradcheck(const CliState& st) {
    TgtConfig cfg;
    cfg.d = 8;
    cfg.heads = 4;
    cfg.layers = 2;
    if (st.cfg.contains("gradcheck") && st.cfg.at("gradcheck").contains("model")) {
        json wrap;
        wrap["model"] = st.cfg.at("gradcheck").at("model");
        cfg = model_from(wrap);
    }
    Rng rng(st.seed);
    TgtParams params = init_params(cfg, rng);
    ChannelParams cp;
    Dataset ds = gen_dataset({4}, 1, 1, cp, st.seed ^ 0x6c0de);
    const ChannelInstance& inst = ds.instances[0];

    auto ptrs = params.trainable();
    LossClosure closure = [&](const std::vector<Tensor*>&, std::vector<Tensor>* grads) {
        if (grads) return batch_loss({&inst}, params, cfg, grads);
        return batch_loss({&inst}, params, cfg, nullptr);
    };
    GradCheckReport report = grad_check(closure, ptrs, params.trainable_names(), 1e-4);
    for (const GradCheckEntry& e : report.entries)
        std::printf("%-14s max rel error %.3g\n", e.name.c_str(), e.max_rel_error);
    std::printf("worst %.3g (%lld parameters)\n", report.max_rel_error,
                static_cast<long long>(num_params(cfg)));
    if (!report.ok(1e-4)) {
        std::fprintf(stderr, "gradcheck FAILED (tolerance 1e-4)\n");
        return 1;
    }
    std::printf("gradcheck OK\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string(kToolVersion) +
                 " - TGT power-allocation workbench for D2D interference channels"};
    app.require_subcommand(1);

    CliState st;
    app.add_option("--seed", st.seed, "master seed for datasets and training");
    app.add_option("--config", st.config_path, "JSON config file (schema in README)")
        ->check(CLI::ExistingFile);
    app.add_option("--out", st.out_dir, "output directory");
    app.add_option("--checkpoint", st.checkpoint, "model checkpoint path");
    app.add_option("--threads", st.threads, "worker thread cap (evaluation is deterministic "
                                            "regardless)")
        ->check(CLI::PositiveNumber);

    std::string data_path;
    int eval_n = 50;
    auto* gen = app.add_subcommand("gen-data", "sample channel instances to a dataset file");
    auto* tr = app.add_subcommand("train", "train the model on a dataset");
    tr->add_option("--data", data_path, "dataset file (generated from config when omitted)");
    auto* ev = app.add_subcommand("eval", "score max-power/WMMSE/TGT on a dataset");
    ev->add_option("--data", data_path, "dataset file (generated when omitted)");
    ev->add_option("--n", eval_n, "network size for the generated evaluation set");
    auto* t1 = app.add_subcommand("table1", "homophily of WMMSE labels vs noise level");
    auto* t2 = app.add_subcommand("table2", "mean sum-rate per method per network size");
    auto* t3 = app.add_subcommand("table3", "generalization across fading scales");
    auto* t4 = app.add_subcommand("table4", "generalization across field sizes");
    auto* f2 = app.add_subcommand("fig2", "paired TGT/WMMSE sum-rate histogram");
    auto* f3 = app.add_subcommand("fig3", "normalized sum-rate across network sizes");
    auto* f4 = app.add_subcommand("fig4", "sum-rate vs parameter count scaling study");
    auto* f5 = app.add_subcommand("fig5", "scaling study plus forward-time complexity probe");
    auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the model gradient");
    for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (!st.config_path.empty()) st.cfg = load_config(st.config_path);
        if (gen->parsed()) return cmd_gen_data(st);
        if (tr->parsed()) return cmd_train(st, data_path);
        if (ev->parsed()) return cmd_eval(st, data_path, eval_n);
        if (t1->parsed()) return cmd_table1(st);
        if (t2->parsed()) return cmd_table2(st);
        if (t3->parsed()) return cmd_table3(st);
        if (t4->parsed()) return cmd_table4(st);
        if (f2->parsed()) return cmd_fig2(st);
        if (f3->parsed()) return cmd_fig3(st);
        if (f4->parsed()) return cmd_scaling(st, false);
        if (f5->parsed()) return cmd_scaling(st, true);
        if (gc->parsed()) return cmd_gradcheck(st);
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
