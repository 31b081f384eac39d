#include "d2dpa/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "d2dpa/baselines.hpp"
#include "d2dpa/io.hpp"

#include "json.hpp"

namespace d2dpa {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

namespace {

Dataset eval_dataset(const BenchSpec& spec, int n, std::uint64_t salt) {
    return gen_dataset({n}, spec.eval_topologies, spec.eval_fades, spec.channel,
                       spec.seed ^ salt);
}

void emit_rows(std::FILE* csv, const char* method, const std::vector<double>& vals) {
    if (!csv) return;
    for (std::size_t i = 0; i < vals.size(); ++i)
        std::fprintf(csv, "%zu,%.17g,%s\n", i, vals[i], method);
}

}  // namespace

double eval_max_power(const Dataset& ds, std::FILE* csv) {
    std::vector<double> vals;
    vals.reserve(ds.instances.size());
    for (const auto& inst : ds.instances)
        vals.push_back(weighted_sum_rate(inst, max_power(inst).p));
    emit_rows(csv, "max_power", vals);
    return mean_of(vals);
}

double eval_wmmse(const Dataset& ds, std::FILE* csv, int iterations) {
    std::vector<double> vals;
    vals.reserve(ds.instances.size());
    WmmseOptions opts;
    opts.iterations = iterations;
    for (const auto& inst : ds.instances)
        vals.push_back(weighted_sum_rate(inst, wmmse(inst, opts).p));
    emit_rows(csv, "wmmse", vals);
    return mean_of(vals);
}

double eval_tgt(const Dataset& ds, const TgtParams& params, const TgtConfig& cfg,
                const std::string& method_name, std::FILE* csv) {
    std::vector<double> vals;
    vals.reserve(ds.instances.size());
    for (const auto& inst : ds.instances)
        vals.push_back(weighted_sum_rate(inst, tgt_forward(inst, params, cfg).p));
    emit_rows(csv, method_name.c_str(), vals);
    return mean_of(vals);
}

SweepResult run_table2(const BenchSpec& spec, const std::vector<int>& sizes,
                       const std::map<int, std::string>& checkpoints,
                       const std::optional<std::string>& multinode_ckpt) {
    SweepResult r;
    MethodMeans mp{"max_power", {}}, wm{"wmmse", {}}, tg{"tgt", {}}, mn{"tgt_multinode", {}};
    for (int n : sizes) {
        r.sweep_values.push_back(n);
        Dataset ds = eval_dataset(spec, n, 0xe7a1u);
        mp.means.push_back(eval_max_power(ds));
        wm.means.push_back(eval_wmmse(ds));
        auto it = checkpoints.find(n);
        if (it != checkpoints.end()) {
            TgtParams params = load_checkpoint(it->second, spec.model);
            tg.means.push_back(eval_tgt(ds, params, spec.model));
        } else {
            tg.means.push_back(std::nan(""));
        }
        if (multinode_ckpt) {
            TgtParams params = load_checkpoint(*multinode_ckpt, spec.model);
            mn.means.push_back(eval_tgt(ds, params, spec.model, "tgt_multinode"));
        }
    }
    r.rows = {mp, wm, tg};
    if (multinode_ckpt) r.rows.push_back(mn);
    return r;
}

SweepResult run_size_sweep(const BenchSpec& spec, const std::vector<int>& sizes,
                           const std::vector<std::pair<std::string, std::string>>& named_ckpts,
                           int topologies, int fades) {
    SweepResult r;
    std::vector<MethodMeans> rows;
    rows.push_back({"wmmse_normalized", {}});
    for (const auto& [name, path] : named_ckpts) rows.push_back({name, {}});
    for (int n : sizes) {
        r.sweep_values.push_back(n);
        Dataset ds = gen_dataset({n}, topologies, fades, spec.channel, spec.seed ^ 0xf193);
        double wm = eval_wmmse(ds);
        rows[0].means.push_back(1.0);
        for (std::size_t k = 0; k < named_ckpts.size(); ++k) {
            TgtParams params = load_checkpoint(named_ckpts[k].second, spec.model);
            rows[k + 1].means.push_back(eval_tgt(ds, params, spec.model) / wm);
        }
    }
    r.rows = std::move(rows);
    return r;
}

SweepResult run_fading_sweep(const BenchSpec& spec, const std::vector<double>& scales,
                             const std::string& checkpoint) {
    TgtParams params = load_checkpoint(checkpoint, spec.model);
    SweepResult r;
    MethodMeans mp{"max_power", {}}, wm{"wmmse", {}}, tg{"tgt", {}};
    for (double s : scales) {
        r.sweep_values.push_back(s);
        ChannelParams cp = spec.channel;
        cp.fading_scale = s;
        Dataset ds = gen_dataset({50}, spec.eval_topologies, spec.eval_fades, cp,
                                 spec.seed ^ 0xfade);
        mp.means.push_back(eval_max_power(ds));
        wm.means.push_back(eval_wmmse(ds));
        tg.means.push_back(eval_tgt(ds, params, spec.model));
    }
    r.rows = {mp, wm, tg};
    return r;
}

SweepResult run_density_sweep(const BenchSpec& spec, const std::vector<double>& half_widths,
                              const std::string& checkpoint) {
    TgtParams params = load_checkpoint(checkpoint, spec.model);
    SweepResult r;
    MethodMeans mp{"max_power", {}}, wm{"wmmse", {}}, tg{"tgt", {}};
    for (double hw : half_widths) {
        r.sweep_values.push_back(hw);
        ChannelParams cp = spec.channel;
        cp.half_width = hw;
        Dataset ds = gen_dataset({50}, spec.eval_topologies, spec.eval_fades, cp,
                                 spec.seed ^ 0xde52);
        mp.means.push_back(eval_max_power(ds));
        wm.means.push_back(eval_wmmse(ds));
        tg.means.push_back(eval_tgt(ds, params, spec.model));
    }
    r.rows = {mp, wm, tg};
    return r;
}

HistogramResult run_histogram(const BenchSpec& spec, const std::string& checkpoint, int n,
                              int draws) {
    TgtParams params = load_checkpoint(checkpoint, spec.model);
    Dataset ds = gen_dataset({n}, 1, draws, spec.channel, spec.seed ^ 0xf162);
    HistogramResult hr;
    hr.tgt.reserve(draws);
    hr.wmmse.reserve(draws);
    for (const auto& inst : ds.instances) {
        hr.tgt.push_back(weighted_sum_rate(inst, tgt_forward(inst, params, spec.model).p));
        hr.wmmse.push_back(weighted_sum_rate(inst, wmmse(inst).p));
    }
    for (std::size_t i = 0; i < hr.tgt.size(); ++i) hr.mean_diff += hr.tgt[i] - hr.wmmse[i];
    hr.mean_diff /= static_cast<double>(hr.tgt.size());
    return hr;
}

std::vector<std::pair<double, double>> run_homophily_table(const BenchSpec& spec,
                                                           const std::vector<double>& sigma2_grid,
                                                           int n, int instances) {
    // paired design: the same channels are relabeled at every noise level
    ChannelParams cp = spec.channel;
    int fades = 10;
    int topologies = (instances + fades - 1) / fades;
    Dataset ds = gen_dataset({n}, topologies, fades, cp, spec.seed ^ 0x4001);
    std::vector<std::pair<double, double>> out;
    for (double s2 : sigma2_grid) {
        double acc = 0.0;
        for (const auto& base : ds.instances) {
            ChannelInstance inst = base;
            inst.sigma2 = s2;
            auto labels = wmmse(inst).p;
            acc += channel_homophily(inst, labels).h;
        }
        out.emplace_back(s2, acc / static_cast<double>(ds.instances.size()));
    }
    return out;
}

std::vector<ScalingPoint> run_scaling_study(const BenchSpec& spec, const std::vector<int>& widths,
                                            const TrainConfig& tc, int train_topologies,
                                            int train_fades, const std::vector<int>& eval_sizes) {
    std::vector<ScalingPoint> out;
    Dataset train_ds = gen_dataset({30}, train_topologies, train_fades, spec.channel,
                                   spec.seed ^ 0x5ca1e);
    std::vector<Dataset> eval_sets;
    std::vector<double> wmmse_means;
    for (int n : eval_sizes) {
        eval_sets.push_back(eval_dataset(spec, n, 0x5ca1e ^ static_cast<std::uint64_t>(n)));
        wmmse_means.push_back(eval_wmmse(eval_sets.back()));
    }
    for (int d : widths) {
        TgtConfig cfg = spec.model;
        cfg.d = d;
        // keep head width 2 as in the default model
        cfg.heads = std::max(1, d / 2);
        ScalingPoint pt;
        pt.d = d;
        pt.params = num_params(cfg);
        TrainResult res = train(tc, cfg, train_ds);
        for (std::size_t k = 0; k < eval_sets.size(); ++k) {
            double m = eval_tgt(eval_sets[k], res.params, cfg);
            if (eval_sizes[k] == 30) pt.mean_sum_rate = m;
            pt.size_generalization.push_back(m / wmmse_means[k]);
        }
        out.push_back(std::move(pt));
    }
    return out;
}

std::vector<std::pair<int, double>> run_complexity_probe(const TgtConfig& cfg,
                                                         const std::vector<int>& sizes, int reps,
                                                         std::uint64_t seed) {
    Rng rng(seed);
    TgtParams params = init_params(cfg, rng);
    std::vector<std::pair<int, double>> out;
    // pre-warm at the largest size so the allocator reaches peak footprint
    // before any timing; first-touch page faults otherwise skew small sizes
    {
        int n_max = *std::max_element(sizes.begin(), sizes.end());
        ChannelParams cp;
        Dataset warm = gen_dataset({n_max}, 1, 1, cp, seed ^ 0xabcdull);
        tgt_forward(warm.instances[0], params, cfg);
        tgt_forward(warm.instances[0], params, cfg);
    }
    for (int n : sizes) {
        ChannelParams cp;
        Dataset ds = gen_dataset({n}, 1, 1, cp, seed ^ static_cast<std::uint64_t>(n));
        const ChannelInstance& inst = ds.instances[0];
        tgt_forward(inst, params, cfg);  // warm-up
        double best = 1e300;
        for (int r = 0; r < reps; ++r) {
            auto t0 = std::chrono::steady_clock::now();
            tgt_forward(inst, params, cfg);
            auto t1 = std::chrono::steady_clock::now();
            best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
        }
        out.emplace_back(n, best);
    }
    return out;
}

void write_sweep_csv(const SweepResult& r, const std::string& sweep_name,
                     const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    std::fprintf(f, "method");
    for (double v : r.sweep_values) std::fprintf(f, ",%s=%.17g", sweep_name.c_str(), v);
    std::fprintf(f, "\n");
    for (const MethodMeans& row : r.rows) {
        std::fprintf(f, "%s", row.method.c_str());
        for (double m : row.means) std::fprintf(f, ",%.17g", m);
        std::fprintf(f, "\n");
    }
    std::fclose(f);
}

namespace {
struct SvgFrame {
    double x0, x1, y0, y1;
    static constexpr int W = 640, H = 420, M = 50;
    double px(double x) const { return M + (x - x0) / (x1 - x0) * (W - 2 * M); }
    double py(double y) const { return H - M - (y - y0) / (y1 - y0) * (H - 2 * M); }
};
const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
}  // namespace

void write_svg_lines(const std::string& path, const std::vector<double>& xs,
                     const std::vector<MethodMeans>& series, const std::string& x_label,
                     const std::string& y_label) {
    double ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (double v : s.means)
            if (std::isfinite(v)) {
                ymin = std::min(ymin, v);
                ymax = std::max(ymax, v);
            }
    if (ymin > ymax) {
        ymin = 0;
        ymax = 1;
    }
    if (ymin == ymax) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    SvgFrame fr{xs.front(), xs.back(), ymin, ymax};
    if (fr.x0 == fr.x1) fr.x1 = fr.x0 + 1;
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    std::fprintf(f,
                 "<svg xmlns='http://www.w3.org/2000/svg' width='%d' height='%d' "
                 "font-family='sans-serif' font-size='12'>\n",
                 SvgFrame::W, SvgFrame::H);
    std::fprintf(f, "<rect width='%d' height='%d' fill='white'/>\n", SvgFrame::W, SvgFrame::H);
    std::fprintf(f,
                 "<line x1='%d' y1='%d' x2='%d' y2='%d' stroke='black'/>"
                 "<line x1='%d' y1='%d' x2='%d' y2='%d' stroke='black'/>\n",
                 SvgFrame::M, SvgFrame::H - SvgFrame::M, SvgFrame::W - SvgFrame::M,
                 SvgFrame::H - SvgFrame::M, SvgFrame::M, SvgFrame::M, SvgFrame::M,
                 SvgFrame::H - SvgFrame::M);
    std::fprintf(f, "<text x='%d' y='%d'>%s</text>\n", SvgFrame::W / 2, SvgFrame::H - 10,
                 x_label.c_str());
    std::fprintf(f, "<text x='10' y='%d' transform='rotate(-90 14,%d)'>%s</text>\n", SvgFrame::H / 2,
                 SvgFrame::H / 2, y_label.c_str());
    for (std::size_t s = 0; s < series.size(); ++s) {
        std::fprintf(f, "<polyline fill='none' stroke='%s' stroke-width='2' points='",
                     kColors[s % 6]);
        for (std::size_t i = 0; i < xs.size() && i < series[s].means.size(); ++i) {
            if (!std::isfinite(series[s].means[i])) continue;
            std::fprintf(f, "%.1f,%.1f ", fr.px(xs[i]), fr.py(series[s].means[i]));
        }
        std::fprintf(f, "'/>\n");
        std::fprintf(f, "<text x='%d' y='%d' fill='%s'>%s</text>\n", SvgFrame::W - 170,
                     30 + 16 * static_cast<int>(s), kColors[s % 6], series[s].method.c_str());
    }
    std::fprintf(f, "</svg>\n");
    std::fclose(f);
}

void write_svg_histogram(const std::string& path, const std::vector<double>& a,
                         const std::vector<double>& b, const std::string& label_a,
                         const std::string& label_b, int bins) {
    double lo = 1e300, hi = -1e300;
    for (double v : a) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (double v : b) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (lo >= hi) hi = lo + 1;
    std::vector<int> ha(bins, 0), hb(bins, 0);
    auto binof = [&](double v) {
        int k = static_cast<int>((v - lo) / (hi - lo) * bins);
        return std::min(bins - 1, std::max(0, k));
    };
    for (double v : a) ++ha[binof(v)];
    for (double v : b) ++hb[binof(v)];
    int hmax = 1;
    for (int k = 0; k < bins; ++k) hmax = std::max({hmax, ha[k], hb[k]});
    SvgFrame fr{lo, hi, 0.0, static_cast<double>(hmax)};
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    std::fprintf(f,
                 "<svg xmlns='http://www.w3.org/2000/svg' width='%d' height='%d' "
                 "font-family='sans-serif' font-size='12'>\n",
                 SvgFrame::W, SvgFrame::H);
    std::fprintf(f, "<rect width='%d' height='%d' fill='white'/>\n", SvgFrame::W, SvgFrame::H);
    const double bw = (SvgFrame::W - 2.0 * SvgFrame::M) / bins;
    for (int k = 0; k < bins; ++k) {
        double x = SvgFrame::M + k * bw;
        double ya = fr.py(ha[k]), yb = fr.py(hb[k]);
        std::fprintf(f,
                     "<rect x='%.1f' y='%.1f' width='%.1f' height='%.1f' fill='#1f77b4' "
                     "fill-opacity='0.5'/>\n",
                     x, ya, bw, SvgFrame::H - SvgFrame::M - ya);
        std::fprintf(f,
                     "<rect x='%.1f' y='%.1f' width='%.1f' height='%.1f' fill='#d62728' "
                     "fill-opacity='0.5'/>\n",
                     x, yb, bw, SvgFrame::H - SvgFrame::M - yb);
    }
    std::fprintf(f, "<text x='%d' y='20' fill='#1f77b4'>%s</text>\n", SvgFrame::W - 170,
                 label_a.c_str());
    std::fprintf(f, "<text x='%d' y='36' fill='#d62728'>%s</text>\n", SvgFrame::W - 170,
                 label_b.c_str());
    std::fprintf(f, "</svg>\n");
    std::fclose(f);
}

void write_manifest(const BenchSpec& spec, const std::vector<std::string>& dataset_notes,
                    const std::vector<std::uint64_t>& dataset_hashes,
                    const std::vector<std::string>& checkpoint_paths, const std::string& path) {
    nlohmann::json j;
    j["tool_version"] = kToolVersion;
    j["name"] = spec.name;
    j["seed"] = spec.seed;
    j["eval_topologies"] = spec.eval_topologies;
    j["eval_fades"] = spec.eval_fades;
    j["channel"] = {{"sigma2", spec.channel.sigma2},
                    {"pmax", spec.channel.pmax},
                    {"fading_scale", spec.channel.fading_scale},
                    {"weight", spec.channel.weight},
                    {"half_width", spec.channel.half_width},
                    {"rx_min", spec.channel.rx_min},
                    {"rx_max", spec.channel.rx_max},
                    {"pathloss_exponent", spec.channel.pathloss_exponent}};
    j["model"] = {{"d", spec.model.d},
                  {"heads", spec.model.heads},
                  {"layers", spec.model.layers},
                  {"leaky_slope", spec.model.leaky_slope},
                  {"share_qkv", spec.model.share_qkv},
                  {"pmax", spec.model.pmax}};
    j["datasets"] = nlohmann::json::array();
    for (std::size_t i = 0; i < dataset_notes.size(); ++i) {
        nlohmann::json d;
        d["note"] = dataset_notes[i];
        if (i < dataset_hashes.size()) d["hash"] = dataset_hashes[i];
        j["datasets"].push_back(d);
    }
    j["checkpoints"] = nlohmann::json::array();
    for (const std::string& c : checkpoint_paths) {
        nlohmann::json d;
        d["path"] = c;
        d["crc32"] = file_crc32(c);
        j["checkpoints"].push_back(d);
    }
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << j.dump(2) << "\n";
}

std::uint32_t file_crc32(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for reading: " + path);
    std::vector<char> buf{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
    return crc32(buf.data(), buf.size());
}

}  // namespace d2dpa
