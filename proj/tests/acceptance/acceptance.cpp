// Acceptance runner: one PASS/FAIL line per criterion.
//   grrail_acceptance [--only NAME] [--list]
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>
#include <vector>

#include "../oracles/graph_oracle.hpp"
#include "../oracles/haralick_oracle.hpp"
#include "../oracles/transport_oracle.hpp"
#include "grrail/descriptors.hpp"
#include "grrail/gmm.hpp"
#include "grrail/phantom.hpp"
#include "grrail/stats.hpp"
#include "grrail/tables.hpp"

using namespace grrail;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[failed: " << what << "] ";
        }
    }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

class WorkDir {
public:
    explicit WorkDir(const std::string& name)
        : path_(fs::temp_directory_path() / ("grrail_acceptance_" + name + "_" + std::to_string(::getpid()))) {
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~WorkDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    fs::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
    fs::path path_;
};

int cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(GRRAIL_CLI_PATH) + " " + args + " >>'" + log.string() + "' 2>&1";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::string slurp(const fs::path& p) {
    try {
        return detail::read_file(p);
    } catch (const Error&) {
        return {};
    }
}

// ---------------------------------------------------------------------------

void dimensional_contract(Outcome& o) {
    // canonical names written out independently of the library tables
    const std::vector<std::string> maps{"energy", "entropy", "contrast", "correlation", "homogeneity",
                                        "sum_average", "sum_variance", "sum_entropy", "difference_entropy",
                                        "difference_average", "difference_variance", "icm1", "icm2"};
    const std::vector<std::string> metrics{"size", "density", "diameter", "avg_path_length", "clustering_coefficient",
                                           "modularity", "small_worldness", "connected_components", "assortativity",
                                           "radius", "global_efficiency", "network_entropy", "num_hubs", "randomness",
                                           "resilience"};
    const std::vector<std::string> stats{"mean", "median", "std", "kurtosis", "skewness"};
    std::vector<std::string> g, r, i;
    for (const auto& m : maps)
        for (const auto& k : metrics) g.push_back(m + "_" + k);
    for (const auto& m : maps)
        for (const auto& s : stats) r.push_back(m + "_" + s);
    for (const auto& k : metrics) i.push_back("intensity_" + k);

    PhantomSpec spec = cohort_member_spec(1, 1, PhantomClass::heterogeneous, {{24, 24, 24}, 2.0});
    const auto ph = generate_phantom(spec);
    DescriptorConfig cfg;
    cfg.seed = 1;
    const auto gd = grrail_descriptor(ph.volume, ph.mask, cfg);
    const auto rd = radiomics_aggregate(ph.volume, ph.mask, cfg);
    const auto id = intensity_graph(ph.volume, ph.mask, cfg);
    o.require(gd.values.size() == 195 && gd.names == g, "grrail descriptor is 195 canonical values");
    o.require(rd.values.size() == 65 && rd.names == r, "radiomics baseline is 65 canonical values");
    o.require(id.values.size() == 15 && id.names == i, "intensity graph is 15 canonical values");
    o.detail << "lengths " << gd.values.size() << "/" << rd.values.size() << "/" << id.values.size();
}

void z_anchor(Outcome& o) {
    const auto t0 = Clock::now();
    const auto z = two_proportion_z(36.0 / 46, 46, 27.0 / 46, 46);
    const double dt = seconds_since(t0);
    o.require(std::abs(z.z - 2.019) <= 0.005, "z within 2.019 +- 0.005");
    o.require(z.p >= 0.040 && z.p <= 0.047, "p in [0.040, 0.047]");
    o.require(dt < 1e-3, "runtime < 1 ms");
    o.detail << "z=" << z.z << " p=" << z.p << " runtime=" << dt * 1e3 << "ms";
}

void glcm_suite(Outcome& o) {
    const auto t0 = Clock::now();
    // constant ROI
    const Dims d{10, 9, 8};
    VoxelGrid g{d, {1, 1, 1}, std::vector<double>(d.count(), 17.0)};
    RoiMask m{d, std::vector<std::uint8_t>(d.count(), 0)};
    for (std::size_t k = 0; k < d.count(); ++k) {
        const auto c = d.coords(k);
        m.flags[k] = (c[0] + c[1] + c[2]) % 7 != 0;
    }
    const auto maps = extract_feature_maps(g, m, 16);
    bool constant_ok = maps[0].values.size() == m.count();
    for (std::size_t k = 0; k < maps[0].values.size(); ++k) {
        constant_ok = constant_ok && maps[static_cast<int>(Feature::energy)].values[k] == 1.0 &&
                      maps[static_cast<int>(Feature::entropy)].values[k] == 0.0 &&
                      maps[static_cast<int>(Feature::contrast)].values[k] == 0.0 &&
                      maps[static_cast<int>(Feature::homogeneity)].values[k] == 1.0;
    }
    o.require(constant_ok, "constant ROI gives energy 1, entropy 0, contrast 0, homogeneity 1");

    // two-cell matrix: P(0,1) = P(1,0) = 1/2
    CoocMatrix two(2);
    two.p = {0.0, 0.5, 0.5, 0.0};
    const auto h = haralick13(two);
    const double closed[] = {0.5, 1.0, 1.0, -1.0, 0.5};
    bool closed_ok = true;
    for (int k = 0; k < 5; ++k) closed_ok = closed_ok && std::abs(h[static_cast<std::size_t>(k)] - closed[k]) <= 1e-12;
    o.require(closed_ok, "two-cell closed forms to 1e-12");

    // random matrices against the straight-line oracle
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> u(0, 1);
    double worst = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 2 + trial % 15;
        std::vector<double> p(static_cast<std::size_t>(n * n));
        double s = 0;
        for (auto& v : p) s += v = u(rng);
        for (auto& v : p) v /= s;
        CoocMatrix cm(n);
        cm.p = p;
        const auto got = haralick13(cm);
        const auto want = oracle::haralick(p, n);
        for (std::size_t f = 0; f < kFeatureCount; ++f) worst = std::max(worst, std::abs(got[f] - want[f]));
    }
    o.require(worst <= 1e-10, "1000 random matrices within 1e-10");
    const double dt = seconds_since(t0);
    o.require(dt < 10.0, "runtime < 10 s");
    o.detail << "max oracle deviation " << worst << " runtime=" << dt << "s";
}

void graph_metric_oracle(Outcome& o) {
    const auto t0 = Clock::now();
    std::size_t graphs = 0, mismatches = 0;
    double worst = 0;
    for (int n = 1; n <= 5; ++n) {
        for (const auto& s : oracle::nonisomorphic_graphs(n)) {
            ++graphs;
            WeightedGraph wg{static_cast<std::size_t>(n), {}};
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j)
                    if (s.adj(i, j)) wg.edges.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), 1.0});
            const auto got = graph_features(wg);
            const auto want = oracle::metrics(s);
            for (std::size_t k = 0; k < kMetricCount; ++k) {
                const auto m = static_cast<Metric>(k);
                const bool integer = m == Metric::size || m == Metric::connected_components || m == Metric::num_hubs;
                const double diff = std::abs(got[k] - want[k]);
                if (integer ? got[k] != want[k] : diff > 1e-9) ++mismatches;
                if (!integer) worst = std::max(worst, diff);
            }
        }
    }
    const double dt = seconds_since(t0);
    o.require(graphs == 52, "52 non-isomorphic graphs on <= 5 nodes");
    o.require(mismatches == 0, "every metric matches the brute-force oracle");
    o.require(dt < 60.0, "runtime < 60 s");
    o.detail << graphs << " graphs, " << mismatches << " mismatches, max deviation " << worst << " runtime=" << dt << "s";
}

void emd_oracle(Outcome& o) {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0, 1);
    std::uniform_int_distribution<int> bins_d(1, 16);
    auto hist = [&](int bins) {
        std::vector<double> h(static_cast<std::size_t>(bins));
        double s = 0;
        for (auto& v : h) s += v = u(rng);
        for (auto& v : h) v /= s;
        return h;
    };
    double worst = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int bins = bins_d(rng);
        const double width = 0.05 + 2.0 * u(rng);
        const auto a = hist(bins), b = hist(bins);
        worst = std::max(worst, std::abs(emd_1d(a, b, width) - oracle::emd_transport(a, b, width)));
    }
    std::size_t violations = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const int bins = bins_d(rng);
        const auto a = hist(bins), b = hist(bins), c = hist(bins);
        if (emd_1d(a, c, 1.0) > emd_1d(a, b, 1.0) + emd_1d(b, c, 1.0) + 1e-12) ++violations;
    }
    const double dt = seconds_since(t0);
    o.require(worst <= 1e-9, "1000 pairs within 1e-9 of the transportation LP");
    o.require(violations == 0, "triangle inequality on 1e4 triples");
    o.require(dt < 30.0, "runtime < 30 s");
    o.detail << "max deviation " << worst << ", " << violations << " triangle violations, runtime=" << dt << "s";
}

void gmm_bic_recovery(Outcome& o) {
    const auto t0 = Clock::now();
    for (int components : {2, 3}) {
        int hits = 0;
        for (std::uint64_t trial = 0; trial < 100; ++trial) {
            std::mt19937_64 rng(derive_seed(trial, static_cast<std::uint64_t>(components)));
            std::uniform_int_distribution<int> pick(0, components - 1);
            std::normal_distribution<double> noise(0, 1);
            std::vector<double> x(2000);
            for (auto& v : x) v = 4.0 * pick(rng) + noise(rng);
            std::vector<std::size_t> voxels(x.size());
            std::iota(voxels.begin(), voxels.end(), 0);
            hits += cluster_values({x.size(), 1, 1}, voxels, x, 5, trial).selected_components == components;
        }
        o.require(hits >= 90, std::to_string(components) + "-component recovery >= 90/100");
        o.detail << components << "-component " << hits << "/100; ";
    }
    std::mt19937_64 rng(5);
    std::gamma_distribution<double> g(3.0, 2.0);
    std::vector<double> x(2000);
    for (auto& v : x) v = g(rng);
    double mean = 0, var = 0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size());
    const auto m1 = fit_gmm(x, 1, 3);
    o.require(m1.means[0] == mean && m1.variances[0] == var && m1.weights[0] == 1.0, "M=1 equals the analytic MLE");
    const double dt = seconds_since(t0);
    o.require(dt < 120.0, "runtime < 120 s");
    o.detail << "M=1 mean " << m1.means[0] << " var " << m1.variances[0] << " runtime=" << dt << "s";
}

std::vector<double> column(const FeatureTable& t, const std::string& name) {
    const auto it = std::find(t.features.begin(), t.features.end(), name);
    if (it == t.features.end()) throw Error("missing column", name);
    const auto c = static_cast<std::size_t>(it - t.features.begin());
    std::vector<double> out;
    for (const auto& row : t.values) out.push_back(row[c]);
    return out;
}

void qualitative_claim(Outcome& o) {
    const auto t0 = Clock::now();
    WorkDir w("qualitative");
    const auto log = w / "log.txt";
    const unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    const std::string th = " --threads " + std::to_string(threads);
    bool ok = cli("phantom-cohort --n 80 --size 48 --seed 2024 --test-fraction 0.25 --out " + q(w / "cohort") + th, log) == 0;
    ok = ok && cli("descriptor --kind grrail --seed 2024 --manifest " + q(w / "cohort/manifest.csv") + " --out " +
                       q(w / "grrail.csv") + th,
                   log) == 0;
    ok = ok && cli("classify --seed 2024 --features " + q(w / "grrail.csv") + " --manifest " +
                       q(w / "cohort/manifest.csv") + " --out " + q(w / "report") + th,
                   log) == 0;
    o.require(ok, "pipeline commands succeed");
    if (!ok) {
        o.detail << slurp(log);
        return;
    }
    const auto table = read_feature_table(w / "grrail.csv");
    const auto manifest = read_manifest(w / "cohort/manifest.csv");
    std::map<std::string, int> label;
    std::size_t train = 0, test = 0;
    for (const auto& e : manifest) {
        label[e.id] = e.label;
        (e.test ? test : train) += 1;
    }
    std::vector<double> nodes(table.ids.size(), 0.0), edges(table.ids.size(), 0.0);
    for (auto map : kFeatureNames) {
        const auto size = column(table, std::string(map) + "_size");
        const auto density = column(table, std::string(map) + "_density");
        for (std::size_t r = 0; r < size.size(); ++r) {
            nodes[r] += size[r] / kFeatureCount;
            edges[r] += std::round(density[r] * size[r] * (size[r] - 1) / 2) / kFeatureCount;
        }
    }
    std::vector<double> n0, n1, e0, e1;
    for (std::size_t r = 0; r < table.ids.size(); ++r) {
        (label.at(table.ids[r]) ? n1 : n0).push_back(nodes[r]);
        (label.at(table.ids[r]) ? e1 : e0).push_back(edges[r]);
    }
    auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); };
    const auto mw_nodes = mann_whitney_u(n1, n0), mw_edges = mann_whitney_u(e1, e0);
    o.require(n0.size() == 40 && n1.size() == 40, "40 + 40 subjects");
    o.require(train == 60 && test == 20, "60/20 split");
    o.require(mean(n1) > mean(n0) && mw_nodes.p < 0.01, "heterogeneous node count greater, p < 0.01");
    o.require(mean(e1) > mean(e0) && mw_edges.p < 0.01, "heterogeneous edge count greater, p < 0.01");
    const auto report = nlohmann::json::parse(detail::read_file(w / "report/report.json"));
    const double auc = report.at("auc").get<double>();
    o.require(report.at("auc_source") == "test" && auc >= 0.90, "held-out AUC >= 0.90");
    const double dt = seconds_since(t0);
    o.require(dt < 1800.0, "runtime < 30 min");
    o.detail << "nodes " << mean(n0) << " vs " << mean(n1) << " (p=" << mw_nodes.p << "), edges " << mean(e0) << " vs "
             << mean(e1) << " (p=" << mw_edges.p << "), held-out AUC " << auc << ", cv AUC "
             << report.at("cv_auc").get<double>() << ", runtime=" << dt << "s";
}

void determinism(Outcome& o) {
    const auto t0 = Clock::now();
    WorkDir w("determinism");
    const auto log = w / "log.txt";
    std::vector<std::string> files;
    for (int threads : {1, 4}) {
        const auto dir = w / ("run" + std::to_string(threads));
        const std::string th = " --threads " + std::to_string(threads);
        const auto manifest = q(dir / "cohort/manifest.csv");
        bool ok = cli("phantom-cohort --n 24 --size 24 --seed 99 --out " + q(dir / "cohort") + th, log) == 0;
        ok = ok && cli("descriptor --seed 99 --manifest " + manifest + " --out " + q(dir / "grrail.csv") + th, log) == 0;
        ok = ok && cli("classify --seed 99 --trees 100 --features " + q(dir / "grrail.csv") + " --manifest " + manifest +
                           " --out " + q(dir / "report") + th,
                       log) == 0;
        o.require(ok, "pipeline with " + std::to_string(threads) + " workers succeeds");
        if (!ok) {
            o.detail << slurp(log);
            return;
        }
    }
    for (const char* f : {"cohort/manifest.csv", "cohort/cohort.json", "grrail.csv", "grrail.run.json", "report/report.json",
                          "report/report.csv"}) {
        const auto a = slurp(w / "run1" / f), b = slurp(w / "run4" / f);
        o.require(!a.empty() && a == b, std::string(f) + " byte-identical");
    }
    o.detail << "1 vs 4 workers, 6 artefacts compared, runtime=" << seconds_since(t0) << "s";
}

void performance(Outcome& o) {
    const Dims d{64, 64, 64};
    VoxelGrid g{d, {1, 1, 1}, std::vector<double>(d.count())};
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(100, 15);
    for (auto& v : g.values) v = n(rng);
    const RoiMask m{d, std::vector<std::uint8_t>(d.count(), 1)};
    auto timed = [&](unsigned threads) {
        const auto t0 = Clock::now();
        const auto maps = extract_feature_maps(g, m, 16, threads);
        const double dt = seconds_since(t0);
        if (maps[0].values.size() != d.count()) throw Error("performance", "incomplete map");
        return dt;
    };
    const double t1 = timed(1), t8 = timed(8);
    const double speedup = t1 / t8;
    o.require(t1 <= 120.0, "single-thread extraction <= 120 s");
    o.require(speedup >= 4.0, "8-thread speed-up >= 4x");
    o.detail << "1 thread " << t1 << "s, 8 threads " << t8 << "s, speed-up " << speedup << "x on "
             << std::thread::hardware_concurrency() << " hardware threads";
}

struct Criterion {
    const char* name;
    std::function<void(Outcome&)> run;
};

const std::vector<Criterion> kCriteria{
    {"dimensional_contract", dimensional_contract}, {"z_anchor", z_anchor},
    {"glcm_suite", glcm_suite},                     {"graph_metric_oracle", graph_metric_oracle},
    {"emd_oracle", emd_oracle},                     {"gmm_bic_recovery", gmm_bic_recovery},
    {"qualitative_claim", qualitative_claim},       {"determinism", determinism},
    {"performance", performance},
};

}  // namespace

int main(int argc, char** argv) {
    std::string only;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--only" && i + 1 < argc) {
            only = argv[++i];
        } else if (a == "--list") {
            for (const auto& c : kCriteria) std::cout << c.name << "\n";
            return 0;
        } else {
            std::cerr << "usage: grrail_acceptance [--only NAME] [--list]\n";
            return 2;
        }
    }
    int failures = 0, ran = 0;
    for (const auto& c : kCriteria) {
        if (!only.empty() && only != c.name) continue;
        ++ran;
        Outcome o;
        try {
            c.run(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "exception: " << e.what();
        }
        std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail.str() << std::endl;
        failures += !o.pass;
    }
    if (ran == 0) {
        std::cerr << "unknown criterion " << only << "\n";
        return 2;
    }
    return failures ? 1 : 0;
}
