#include "d2dpa/netgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "d2dpa/io.hpp"

namespace d2dpa {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr char kMagic[] = "D2DPA1";
constexpr std::uint32_t kVersion = 1;
}  // namespace

Topology sample_topology(int n, double half_width, double rx_min, double rx_max, Rng& rng) {
    if (n < 1) throw std::invalid_argument("sample_topology: n must be >= 1");
    if (!(rx_min > 0.0) || rx_max < rx_min)
        throw std::invalid_argument("sample_topology: need 0 < rx_min <= rx_max");
    if (!(half_width > 0.0)) throw std::invalid_argument("sample_topology: half_width must be > 0");

    Topology t;
    t.n = n;
    t.half_width = half_width;
    t.tx.resize(n);
    t.rx.resize(n);
    for (int i = 0; i < n; ++i) {
        t.tx[i] = {rng.uniform(-half_width, half_width), rng.uniform(-half_width, half_width)};
        // distance uniform in [rx_min, rx_max], direction uniform
        double r = rng.uniform(rx_min, rx_max);
        double theta = rng.uniform() * kTwoPi;
        t.rx[i] = {t.tx[i].x + r * std::cos(theta), t.tx[i].y + r * std::sin(theta)};
    }
    return t;
}

std::vector<double> pathloss_matrix(const Topology& topo, double alpha) {
    const int n = topo.n;
    std::vector<double> pl(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {      // receiver i
        for (int j = 0; j < n; ++j) {  // transmitter j
            double dx = topo.tx[j].x - topo.rx[i].x;
            double dy = topo.tx[j].y - topo.rx[i].y;
            double d = std::sqrt(dx * dx + dy * dy);
            if (d < 1e-9)
                throw std::runtime_error("pathloss_matrix: degenerate geometry (tx on top of rx)");
            pl[static_cast<std::size_t>(i) * n + j] = std::pow(d, -alpha);
        }
    }
    return pl;
}

std::vector<double> sample_fading(int n, double scale, Rng& rng) {
    if (!(scale > 0.0)) throw std::invalid_argument("sample_fading: scale must be > 0");
    std::vector<double> f(static_cast<std::size_t>(n) * n);
    for (auto& v : f) v = rng.rayleigh(scale);
    return f;
}

ChannelInstance build_channel(const Topology& topo, const std::vector<double>& fading,
                              double sigma2, const std::vector<double>& weights, double pmax,
                              double pathloss_exponent) {
    const int n = topo.n;
    if (fading.size() != static_cast<std::size_t>(n) * n)
        throw std::invalid_argument("build_channel: fading shape mismatch");
    if (weights.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("build_channel: weights shape mismatch");
    if (!(sigma2 > 0.0)) throw std::invalid_argument("build_channel: sigma2 must be > 0");
    if (!(pmax > 0.0)) throw std::invalid_argument("build_channel: pmax must be > 0");

    ChannelInstance inst;
    inst.n = n;
    inst.sigma2 = sigma2;
    inst.weights = weights;
    inst.pmax = pmax;
    inst.H = pathloss_matrix(topo, pathloss_exponent);
    for (std::size_t k = 0; k < inst.H.size(); ++k) inst.H[k] *= fading[k];
    return inst;
}

Dataset gen_dataset(const std::vector<int>& n_list, int topologies, int fades_per_topology,
                    const ChannelParams& params, std::uint64_t seed) {
    if (n_list.empty()) throw std::invalid_argument("gen_dataset: n_list empty");
    if (topologies < 1 || fades_per_topology < 1)
        throw std::invalid_argument("gen_dataset: need topologies >= 1 and fades >= 1");

    Dataset ds;
    ds.seed = seed;
    ds.instances.reserve(static_cast<std::size_t>(topologies) * fades_per_topology);
    Rng root(seed);
    for (int t = 0; t < topologies; ++t) {
        Rng stream = root.split(static_cast<std::uint64_t>(t));
        int n = n_list[t % n_list.size()];
        double hw = params.half_width > 0 ? params.half_width : static_cast<double>(n);
        double rx_max = params.rx_max > 0 ? params.rx_max : std::max(params.rx_min, n / 4.0);
        Topology topo = sample_topology(n, hw, params.rx_min, rx_max, stream);
        std::vector<double> w(n, params.weight);
        for (int f = 0; f < fades_per_topology; ++f) {
            auto fading = sample_fading(n, params.fading_scale, stream);
            ds.instances.push_back(build_channel(topo, fading, params.sigma2, w, params.pmax,
                                                 params.pathloss_exponent));
            ds.topology_ids.push_back(static_cast<std::uint32_t>(t));
        }
    }
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    BinaryWriter w;
    w.magic(kMagic, sizeof(kMagic) - 1);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(ds.instances.size()));
    w.u64(ds.seed);
    for (std::size_t k = 0; k < ds.instances.size(); ++k) {
        const ChannelInstance& inst = ds.instances[k];
        w.u32(static_cast<std::uint32_t>(inst.n));
        w.f64s(inst.H);
        w.f64(inst.sigma2);
        w.f64s(inst.weights);
        w.f64(inst.pmax);
        w.u32(ds.topology_ids[k]);
    }
    w.write_with_crc(path);
}

Dataset load_dataset(const std::string& path) {
    BinaryReader r(path);
    r.expect_magic(kMagic, sizeof(kMagic) - 1);
    std::uint32_t version = r.u32();
    if (version != kVersion)
        throw std::runtime_error("dataset version mismatch: " + std::to_string(version));
    std::uint32_t count = r.u32();
    Dataset ds;
    ds.seed = r.u64();
    ds.instances.reserve(count);
    ds.topology_ids.reserve(count);
    for (std::uint32_t k = 0; k < count; ++k) {
        ChannelInstance inst;
        inst.n = static_cast<int>(r.u32());
        r.f64s(inst.H, static_cast<std::size_t>(inst.n) * inst.n);
        inst.sigma2 = r.f64();
        r.f64s(inst.weights, static_cast<std::size_t>(inst.n));
        inst.pmax = r.f64();
        ds.topology_ids.push_back(r.u32());
        ds.instances.push_back(std::move(inst));
    }
    return ds;
}

void export_dataset_csv(const Dataset& ds, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    std::fprintf(f, "instance,topology,rx,tx,h,sigma2,pmax\n");
    for (std::size_t k = 0; k < ds.instances.size(); ++k) {
        const ChannelInstance& inst = ds.instances[k];
        for (int i = 0; i < inst.n; ++i)
            for (int j = 0; j < inst.n; ++j)
                std::fprintf(f, "%zu,%u,%d,%d,%.17g,%.17g,%.17g\n", k, ds.topology_ids[k], i, j,
                             inst.gain(i, j), inst.sigma2, inst.pmax);
    }
    std::fclose(f);
}

std::uint64_t dataset_hash(const Dataset& ds) {
    // FNV-1a over the serialized numeric content
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* p, std::size_t len) {
        const unsigned char* c = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= c[i];
            h *= 1099511628211ULL;
        }
    };
    mix(&ds.seed, sizeof ds.seed);
    for (std::size_t k = 0; k < ds.instances.size(); ++k) {
        const ChannelInstance& inst = ds.instances[k];
        mix(&inst.n, sizeof inst.n);
        mix(inst.H.data(), inst.H.size() * sizeof(double));
        mix(&inst.sigma2, sizeof inst.sigma2);
        mix(inst.weights.data(), inst.weights.size() * sizeof(double));
        mix(&inst.pmax, sizeof inst.pmax);
        mix(&ds.topology_ids[k], sizeof ds.topology_ids[k]);
    }
    return h;
}

}  // namespace d2dpa
