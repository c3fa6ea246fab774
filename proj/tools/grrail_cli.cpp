// grrail: batch command-line front end.
//
//   grrail phantom-cohort --n 40 --seed 1 --out cohort
//   grrail descriptor --manifest cohort/manifest.csv --kind grrail --out grrail.csv
//   grrail classify --features grrail.csv --manifest cohort/manifest.csv --out report
//
// Any long option may also come from a key=value file given with --config
// (keys are option names without the leading dashes); flags on the command
// line win. Failures print one JSON object on stderr and exit nonzero.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "grrail/pipeline.hpp"
#include "grrail/plot.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace grrail;

namespace {

void write_json(const fs::path& path, const ordered_json& j) { detail::write_file(path, j.dump(2) + "\n"); }

unsigned resolve_threads(int t) {
    if (t < 0) throw Error("invalid config", "threads must be >= 0");
    if (t == 0) return std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(t);
}

std::map<std::string, std::string> header_keys(const fs::path& path) {
    std::map<std::string, std::string> out;
    const std::string text = detail::read_file(path);
    if (text.rfind("format=", 0) != 0) return out;  // NIfTI: no sidecar keys
    for (auto& [k, v] : parse_key_values(text)) out[k] = v;
    return out;
}

// ---------------------------------------------------------------------------

struct ResampleArgs {
    std::string manifest, out, interp = "trilinear";
    double spacing = 1.0;
    int threads = 1;
};

void run_resample(const ResampleArgs& a) {
    const Interpolation mode = parse_interpolation(a.interp);
    if (!(a.spacing > 0.0)) throw Error("invalid config", "spacing must be positive");
    const auto manifest = read_manifest(a.manifest);
    std::vector<ManifestEntry> out(manifest.size());
    ordered_json subjects = ordered_json::array();
    std::vector<std::array<std::uint64_t, 2>> hashes(manifest.size());
    parallel_for(manifest.size(), resolve_threads(a.threads), [&](std::size_t s) {
        const auto& e = manifest[s];
        const auto [grid, mask] = resample_isotropic(load_volume(e.volume), load_mask(e.mask), a.spacing, mode);
        out[s] = e;
        out[s].volume = fs::path(a.out) / (e.id + "_volume.hdr");
        out[s].mask = fs::path(a.out) / (e.id + "_mask.hdr");
        write_raw(out[s].volume, grid);
        write_mask(out[s].mask, mask, grid.spacing_mm);
        hashes[s] = {grid_hash(grid), static_cast<std::uint64_t>(mask.count())};
    });
    for (std::size_t s = 0; s < manifest.size(); ++s)
        subjects.push_back({{"subject_id", manifest[s].id}, {"volume_hash", hex64(hashes[s][0])}, {"roi_voxels", hashes[s][1]}});
    write_manifest(fs::path(a.out) / "manifest.csv", out);
    write_json(fs::path(a.out) / "resample.json",
               {{"format", "grrail-run-1"},
                {"command", "resample"},
                {"config", {{"spacing", a.spacing}, {"interp", a.interp}}},
                {"subjects", subjects}});
}

// ---------------------------------------------------------------------------

struct ExtractArgs {
    std::string volume, mask, out;
    int bins = 16, threads = 1;
};

void run_extract(const ExtractArgs& a) {
    const VoxelGrid grid = load_volume(a.volume);
    const RoiMask mask = load_mask(a.mask);
    validate_pair(grid, mask);
    const auto maps = extract_feature_maps(grid, mask, a.bins, resolve_threads(a.threads));
    const std::string source = hex64(grid_hash(grid));
    ordered_json listing = ordered_json::array();
    for (const auto& m : maps) {
        const std::string name(m.name());
        write_raw(fs::path(a.out) / (name + ".hdr"), m.to_grid(grid.spacing_mm), DType::f64,
                  {{"feature", name}, {"bins", std::to_string(m.bins)}, {"window", "3"}, {"source_hash", source}});
        listing.push_back(name + ".hdr");
    }
    write_mask(fs::path(a.out) / "mask.hdr", mask, grid.spacing_mm);
    write_json(fs::path(a.out) / "maps.json", {{"format", "grrail-maps-1"},
                                                {"bins", a.bins},
                                                {"window", 3},
                                                {"source_hash", source},
                                                {"roi_voxels", mask.count()},
                                                {"mask", "mask.hdr"},
                                                {"maps", listing}});
}

// ---------------------------------------------------------------------------

struct ClusterArgs {
    std::string map, mask, out;
    int u_max = 5;
    std::uint64_t seed = 0;
};

void run_cluster(const ClusterArgs& a) {
    const VoxelGrid grid = load_volume(a.map);
    const RoiMask mask = load_mask(a.mask);
    validate_pair(grid, mask);
    if (a.u_max < 1 || a.u_max > 12) throw Error("invalid config", "u-max must lie in [1, 12]");
    const auto keys = header_keys(a.map);
    const auto feature = keys.find("feature");
    // Same stream as the descriptor pipeline when the map names its feature.
    const std::uint64_t seed = feature != keys.end() ? map_seed(a.seed, parse_feature(feature->second)) : a.seed;
    const auto voxels = mask.voxels();
    std::vector<double> values(voxels.size());
    for (std::size_t k = 0; k < voxels.size(); ++k) values[k] = grid.values[voxels[k]];
    const ClusterMap cm = cluster_values(grid.dims, voxels, values, a.u_max, seed);

    VoxelGrid labels{grid.dims, grid.spacing_mm, std::vector<double>(grid.dims.count(), -1.0)};
    for (std::size_t k = 0; k < voxels.size(); ++k) labels.values[voxels[k]] = cm.labels[k];
    write_raw(fs::path(a.out) / "labels.hdr", labels, DType::i16, {{"source_hash", hex64(grid_hash(grid))}});
    ordered_json bic = ordered_json::array();
    for (const auto& [M, b] : cm.bic_table) bic.push_back({{"components", M}, {"bic", b}});
    write_json(fs::path(a.out) / "clusters.json",
               {{"format", "grrail-clusters-1"},
                {"feature", feature != keys.end() ? feature->second : std::string()},
                {"u_max", a.u_max},
                {"master_seed", a.seed},
                {"seed", seed},
                {"selected_components", cm.selected_components},
                {"clusters", cm.clusters()},
                {"cluster_means", cm.cluster_means},
                {"member_counts", cm.member_counts},
                {"bic", bic},
                {"labels", "labels.hdr"}});
}

// ---------------------------------------------------------------------------

struct GraphArgs {
    std::string map, labels, out, edges = "rag26", weights = "emd";
    int hist_bins = 32;
};

void run_graph(const GraphArgs& a) {
    GraphOptions opt;
    opt.edges = parse_edge_policy(a.edges);
    opt.weights = parse_weight_policy(a.weights);
    opt.histogram_bins = a.hist_bins;
    if (opt.histogram_bins < 1) throw Error("invalid config", "hist-bins must be >= 1");
    const VoxelGrid map = load_volume(a.map);
    const VoxelGrid lab = load_volume(a.labels);
    if (!(map.dims == lab.dims)) throw Error("dims mismatch", "map and label volume differ");
    std::vector<std::size_t> voxels;
    std::vector<int> labels;
    std::vector<double> values;
    for (std::size_t i = 0; i < lab.values.size(); ++i) {
        if (lab.values[i] < 0) continue;
        voxels.push_back(i);
        labels.push_back(static_cast<int>(std::lround(lab.values[i])));
        values.push_back(map.values[i]);
    }
    const ClusterMap cm = cluster_map_from_labels(map.dims, voxels, labels, values);
    const ClusterGraph g = build_graph(cm, values, opt);
    ordered_json j = to_json(g);
    j["edge_policy"] = to_string(opt.edges);
    j["weight_policy"] = to_string(opt.weights);
    const auto feats = graph_features(g);
    ordered_json metrics;
    for (std::size_t k = 0; k < kMetricCount; ++k) metrics[std::string(kMetricNames[k])] = feats[k];
    j["metrics"] = metrics;
    write_json(a.out, j);
}

// ---------------------------------------------------------------------------

struct DescriptorArgs {
    std::string manifest, out, run_manifest, kind = "grrail", edges = "rag26", weights = "emd";
    int bins = 16, u_max = 5, intensity_u_max = 5, hist_bins = 32, threads = 1;
    std::uint64_t seed = 0;
};

void run_descriptor(const DescriptorArgs& a) {
    const DescriptorKind kind = parse_descriptor_kind(a.kind);
    DescriptorConfig cfg;
    cfg.bins = a.bins;
    cfg.u_max = a.u_max;
    cfg.intensity_u_max = a.intensity_u_max;
    cfg.graph.edges = parse_edge_policy(a.edges);
    cfg.graph.weights = parse_weight_policy(a.weights);
    cfg.graph.histogram_bins = a.hist_bins;
    cfg.seed = a.seed;
    cfg.validate();
    const unsigned threads = resolve_threads(a.threads);
    const auto manifest = read_manifest(a.manifest);
    const DescriptorRun run = descriptor_table(manifest, kind, cfg, threads);
    write_feature_table(a.out, run.table);
    fs::path rm = a.run_manifest;
    if (rm.empty()) rm = fs::path(a.out).replace_extension(".run.json");
    write_json(rm, run_manifest(run, kind, cfg));
}

// ---------------------------------------------------------------------------

struct ClassifyArgs {
    std::string features, manifest, out;
    int trees = 500, folds = 5, target_k = 20, repeats = 20, min_leaf = 2, threads = 1;
    double corr = 0.95, drop = 0.10;
    std::uint64_t seed = 0;
};

void run_classify(const ClassifyArgs& a) {
    if (a.target_k < 1 || a.trees < 1 || a.repeats < 0 || a.min_leaf < 1) throw Error("invalid config", "classifier parameters");
    if (!(a.drop > 0.0 && a.drop < 1.0)) throw Error("invalid config", "drop must lie in (0, 1)");
    if (!(a.corr > 0.0 && a.corr <= 1.0)) throw Error("invalid config", "corr must lie in (0, 1]");
    const CohortTable t = join_cohort(read_feature_table(a.features), read_manifest(a.manifest));
    CvParams p;
    p.folds = a.folds;
    p.seed = a.seed;
    p.permutation_repeats = a.repeats;
    p.forest.trees = a.trees;
    p.forest.min_leaf = a.min_leaf;
    p.forest.threads = resolve_threads(a.threads);
    p.selection.target_k = static_cast<std::size_t>(a.target_k);
    p.selection.correlation_threshold = a.corr;
    p.selection.drop_fraction = a.drop;
    const EvalReport r = cross_validate(t, p);
    write_json(fs::path(a.out) / "report.json", report_json(r, t, p));
    write_feature_table(fs::path(a.out) / "report.csv", report_rows(r, t));
}

// ---------------------------------------------------------------------------

struct StatsArgs {
    std::string features, manifest, out;
    double acc1 = -1, acc2 = -1;
    int n1 = 0, n2 = 0;
};

void run_stats(const StatsArgs& a) {
    const bool z_mode = a.n1 > 0 || a.n2 > 0 || a.acc1 >= 0 || a.acc2 >= 0;
    const bool table_mode = !a.features.empty();
    if (z_mode == table_mode) throw Error("invalid arguments", "give either --acc1/--n1/--acc2/--n2 or --features/--manifest");
    if (z_mode) {
        if (a.n1 < 1 || a.n2 < 1) throw Error("invalid sample size", "n1 and n2 must be positive");
        const ZTest z = two_proportion_z(a.acc1, static_cast<std::size_t>(a.n1), a.acc2, static_cast<std::size_t>(a.n2));
        const ordered_json j{{"test", "two_proportion_z"}, {"acc1", a.acc1}, {"n1", a.n1}, {"acc2", a.acc2},
                             {"n2", a.n2},                 {"z", z.z},       {"p", z.p},       {"degenerate", z.degenerate}};
        if (a.out.empty()) std::cout << j.dump(2) << "\n";
        else write_json(a.out, j);
        return;
    }
    if (a.manifest.empty() || a.out.empty()) throw Error("invalid arguments", "--features needs --manifest and --out");
    const CohortTable t = join_cohort(read_feature_table(a.features), read_manifest(a.manifest));
    FeatureTable out;
    out.key = "feature";
    out.features = {"u", "z", "p", "mean_label1", "mean_label0"};
    for (std::size_t c = 0; c < t.features.size(); ++c) {
        std::vector<double> x, y;
        for (const auto& r : t.rows) (r.label == 1 ? x : y).push_back(r.x[c]);
        if (x.empty() || y.empty()) throw Error("single class", "both labels are needed for rank tests");
        const MannWhitney m = mann_whitney_u(x, y);
        double mx = 0, my = 0;
        for (double v : x) mx += v / static_cast<double>(x.size());
        for (double v : y) my += v / static_cast<double>(y.size());
        out.ids.push_back(t.features[c]);
        out.values.push_back({m.u, m.z, m.p, mx, my});
    }
    write_feature_table(a.out, out);
}

// ---------------------------------------------------------------------------

struct CohortArgs {
    std::string out, format = "raw";
    int n = 40, size = 48, threads = 1;
    double noise = 2.0, test_fraction = 0.25;
    std::uint64_t seed = 0;
};

void run_phantom_cohort(const CohortArgs& a) {
    if (a.n < 2) throw Error("invalid cohort size", "n must be >= 2");
    if (a.size < 8) throw Error("invalid config", "size must be >= 8");
    if (a.format != "raw" && a.format != "nifti") throw Error("invalid config", "format must be raw or nifti");
    CohortPlan plan;
    plan.n = static_cast<std::size_t>(a.n);
    plan.seed = a.seed;
    plan.test_fraction = a.test_fraction;
    plan.phantom.dims = {static_cast<std::size_t>(a.size), static_cast<std::size_t>(a.size), static_cast<std::size_t>(a.size)};
    plan.phantom.noise = a.noise;
    std::vector<PhantomSpec> specs;
    auto manifest = plan_cohort(plan, &specs);
    const std::string ext = a.format == "raw" ? ".hdr" : ".nii";
    parallel_for(manifest.size(), resolve_threads(a.threads), [&](std::size_t s) {
        const Phantom ph = generate_phantom(specs[s]);
        auto& e = manifest[s];
        e.volume = fs::path(a.out) / "volumes" / (e.id + ext);
        e.mask = fs::path(a.out) / "masks" / (e.id + ext);
        VoxelGrid m{ph.mask.dims, ph.volume.spacing_mm, std::vector<double>(ph.mask.flags.begin(), ph.mask.flags.end())};
        if (a.format == "raw") {
            write_raw(e.volume, ph.volume, DType::f32);
            write_mask(e.mask, ph.mask);
        } else {
            write_nifti(e.volume, ph.volume, DType::f32);
            write_nifti(e.mask, m, DType::u8);
        }
    });
    write_manifest(fs::path(a.out) / "manifest.csv", manifest);
    ordered_json subjects = ordered_json::array();
    for (std::size_t s = 0; s < manifest.size(); ++s) {
        ordered_json j = spec_json(specs[s]);
        j["subject_id"] = manifest[s].id;
        j["label"] = manifest[s].label;
        j["split"] = manifest[s].test ? "test" : "train";
        subjects.push_back(std::move(j));
    }
    write_json(fs::path(a.out) / "cohort.json", {{"format", "grrail-cohort-1"},
                                                  {"config",
                                                   {{"n", a.n},
                                                    {"seed", a.seed},
                                                    {"size", a.size},
                                                    {"noise", a.noise},
                                                    {"test_fraction", a.test_fraction},
                                                    {"format", a.format}}},
                                                  {"subjects", subjects}});
}

// ---------------------------------------------------------------------------

struct PlotArgs {
    std::string input, mask, graph, out;
    bool categorical = false;
    long slice = -1;
    int zoom = 4, size = 512;
};

void run_plot(const PlotArgs& a) {
    if (a.input.empty() == a.graph.empty()) throw Error("invalid arguments", "give exactly one of --input or --graph");
    if (!a.graph.empty()) {
        if (a.size < 16) throw Error("invalid config", "size must be >= 16");
        const auto j = nlohmann::json::parse(detail::read_file(a.graph), nullptr, false);
        if (j.is_discarded()) throw Error("malformed graph document", "not JSON");
        write_ppm(a.out, render_graph(graph_from_json(j), a.size));
        return;
    }
    if (a.zoom < 1 || a.zoom > 64) throw Error("invalid config", "zoom must lie in [1, 64]");
    const VoxelGrid g = load_volume(a.input);
    RoiMask m;
    if (!a.mask.empty()) {
        m = load_mask(a.mask);
    } else {
        m.dims = g.dims;
        m.flags.resize(g.values.size());
        for (std::size_t i = 0; i < g.values.size(); ++i) m.flags[i] = a.categorical ? g.values[i] >= 0 : 1;
    }
    write_ppm(a.out, render_slice(g, m, a.slice, a.zoom, a.categorical));
}

// ---------------------------------------------------------------------------

void fail(const std::string& code, const std::string& message, int status) {
    std::cerr << ordered_json{{"error", code}, {"message", message}}.dump() << "\n";
    std::exit(status);
}

/// Splices key=value pairs from --config into the argument list for every
/// option of the chosen subcommand that the command line leaves unset.
std::vector<std::string> apply_config(std::vector<std::string> args, CLI::App& app) {
    std::string config;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw Error("missing input", "--config needs a file");
            config = args[i + 1];
            args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            config = args[i].substr(9);
            args.erase(args.begin() + static_cast<long>(i));
            break;
        }
    }
    if (config.empty()) return args;
    if (args.empty()) throw Error("invalid arguments", "no command given");
    CLI::App* sub = app.get_subcommand_no_throw(args[0]);
    if (!sub) return args;  // CLI11 reports the unknown command
    for (const auto& [key, value] : read_config(config)) {
        const std::string flag = "--" + key;
        if (key == "config" || !sub->get_option_no_throw(flag)) throw Error("unknown config key", key);
        bool given = false;
        for (const auto& s : args) given = given || s == flag || s.rfind(flag + "=", 0) == 0;
        if (!given) args.push_back(flag + "=" + value);
    }
    return args;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GrRAiL radiomic graph descriptors"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");
    app.footer("Options of any command can also be read from a key=value file with --config FILE.");

    ResampleArgs ra;
    auto* resample = app.add_subcommand("resample", "resample every manifest subject to isotropic spacing");
    resample->add_option("--manifest", ra.manifest, "input manifest CSV")->required();
    resample->add_option("--out", ra.out, "output directory")->required();
    resample->add_option("--spacing", ra.spacing, "target spacing in mm")->capture_default_str();
    resample->add_option("--interp", ra.interp, "trilinear or nearest")->capture_default_str();
    resample->add_option("--threads", ra.threads, "worker count, 0 = all cores")->capture_default_str();

    ExtractArgs ea;
    auto* extract = app.add_subcommand("extract", "write the 13 texture maps of one volume");
    extract->add_option("--volume", ea.volume)->required();
    extract->add_option("--mask", ea.mask)->required();
    extract->add_option("--out", ea.out, "output directory")->required();
    extract->add_option("--bins", ea.bins, "grey levels")->capture_default_str();
    extract->add_option("--threads", ea.threads)->capture_default_str();

    ClusterArgs ca;
    auto* cluster = app.add_subcommand("cluster", "GMM/BIC clustering of one feature map");
    cluster->add_option("--map", ca.map)->required();
    cluster->add_option("--mask", ca.mask)->required();
    cluster->add_option("--out", ca.out, "output directory")->required();
    cluster->add_option("--u-max", ca.u_max, "largest component count tried")->capture_default_str();
    cluster->add_option("--seed", ca.seed, "subject seed")->capture_default_str();

    GraphArgs ga;
    auto* graph = app.add_subcommand("graph", "cluster graph and its metrics");
    graph->add_option("--map", ga.map)->required();
    graph->add_option("--labels", ga.labels, "label volume from `cluster`")->required();
    graph->add_option("--out", ga.out, "graph JSON")->required();
    graph->add_option("--edges", ga.edges, "rag26 or complete")->capture_default_str();
    graph->add_option("--weights", ga.weights, "emd or centroid")->capture_default_str();
    graph->add_option("--hist-bins", ga.hist_bins)->capture_default_str();

    DescriptorArgs da;
    auto* descriptor = app.add_subcommand("descriptor", "descriptor table for a manifest");
    descriptor->add_option("--manifest", da.manifest)->required();
    descriptor->add_option("--out", da.out, "feature CSV")->required();
    descriptor->add_option("--run-manifest", da.run_manifest, "run manifest JSON (default: --out with a .run.json extension)");
    descriptor->add_option("--kind", da.kind, "grrail, radiomics or intensity")->capture_default_str();
    descriptor->add_option("--bins", da.bins)->capture_default_str();
    descriptor->add_option("--u-max", da.u_max)->capture_default_str();
    descriptor->add_option("--intensity-u-max", da.intensity_u_max)->capture_default_str();
    descriptor->add_option("--edges", da.edges)->capture_default_str();
    descriptor->add_option("--weights", da.weights)->capture_default_str();
    descriptor->add_option("--hist-bins", da.hist_bins)->capture_default_str();
    descriptor->add_option("--seed", da.seed, "master seed")->capture_default_str();
    descriptor->add_option("--threads", da.threads)->capture_default_str();

    ClassifyArgs cla;
    auto* classify = app.add_subcommand("classify", "feature selection, cross-validation and held-out test");
    classify->add_option("--features", cla.features)->required();
    classify->add_option("--manifest", cla.manifest)->required();
    classify->add_option("--out", cla.out, "output directory")->required();
    classify->add_option("--trees", cla.trees)->capture_default_str();
    classify->add_option("--folds", cla.folds)->capture_default_str();
    classify->add_option("--target-k", cla.target_k, "features kept by elimination")->capture_default_str();
    classify->add_option("--corr", cla.corr, "correlation filter threshold")->capture_default_str();
    classify->add_option("--drop", cla.drop, "fraction dropped per elimination round")->capture_default_str();
    classify->add_option("--min-leaf", cla.min_leaf)->capture_default_str();
    classify->add_option("--repeats", cla.repeats, "permutation-importance repeats")->capture_default_str();
    classify->add_option("--seed", cla.seed)->capture_default_str();
    classify->add_option("--threads", cla.threads)->capture_default_str();

    StatsArgs sa;
    auto* stats = app.add_subcommand("stats", "two-proportion z-test or per-feature rank tests");
    stats->add_option("--acc1", sa.acc1);
    stats->add_option("--n1", sa.n1);
    stats->add_option("--acc2", sa.acc2);
    stats->add_option("--n2", sa.n2);
    stats->add_option("--features", sa.features);
    stats->add_option("--manifest", sa.manifest);
    stats->add_option("--out", sa.out, "output file (z-test prints to stdout without it)");

    CohortArgs pa;
    auto* cohort = app.add_subcommand("phantom-cohort", "synthetic homogeneous/heterogeneous cohort");
    cohort->add_option("--n", pa.n, "subjects, split evenly between the classes")->capture_default_str();
    cohort->add_option("--seed", pa.seed)->capture_default_str();
    cohort->add_option("--out", pa.out, "output directory")->required();
    cohort->add_option("--size", pa.size, "grid edge length in voxels")->capture_default_str();
    cohort->add_option("--noise", pa.noise)->capture_default_str();
    cohort->add_option("--test-fraction", pa.test_fraction)->capture_default_str();
    cohort->add_option("--format", pa.format, "raw or nifti")->capture_default_str();
    cohort->add_option("--threads", pa.threads)->capture_default_str();

    PlotArgs pl;
    auto* plot = app.add_subcommand("plot", "PPM heatmap slice or graph drawing");
    plot->add_option("--input", pl.input, "volume, feature map or label volume");
    plot->add_option("--mask", pl.mask);
    plot->add_flag("--categorical", pl.categorical, "colour by label");
    plot->add_option("--slice", pl.slice, "axial slice, default middle");
    plot->add_option("--zoom", pl.zoom)->capture_default_str();
    plot->add_option("--graph", pl.graph, "graph JSON");
    plot->add_option("--size", pl.size, "graph canvas edge in pixels")->capture_default_str();
    plot->add_option("--out", pl.out, "PPM file")->required();

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = apply_config(std::move(args), app);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        fail("usage error", e.what(), 2);
    } catch (const Error& e) {
        fail(e.code(), e.what(), 2);
    }

    try {
        if (*resample) run_resample(ra);
        else if (*extract) run_extract(ea);
        else if (*cluster) run_cluster(ca);
        else if (*graph) run_graph(ga);
        else if (*descriptor) run_descriptor(da);
        else if (*classify) run_classify(cla);
        else if (*stats) run_stats(sa);
        else if (*cohort) run_phantom_cohort(pa);
        else if (*plot) run_plot(pl);
    } catch (const Error& e) {
        fail(e.code(), e.what(), 1);
    } catch (const std::exception& e) {
        fail("internal error", e.what(), 1);
    }
    return 0;
}
