// Cohort-level stages shared by the command-line tool and the tests:
// descriptor tables over a manifest, cohort assembly, and report documents.
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "grrail/descriptors.hpp"
#include "grrail/ml.hpp"
#include "grrail/phantom.hpp"
#include "grrail/stats.hpp"
#include "grrail/tables.hpp"

namespace grrail {

enum class DescriptorKind { grrail, radiomics, intensity };

inline DescriptorKind parse_descriptor_kind(const std::string& s) {
    if (s == "grrail") return DescriptorKind::grrail;
    if (s == "radiomics") return DescriptorKind::radiomics;
    if (s == "intensity") return DescriptorKind::intensity;
    throw Error("unknown descriptor kind", s);
}

inline const char* to_string(DescriptorKind k) {
    switch (k) {
        case DescriptorKind::grrail: return "grrail";
        case DescriptorKind::radiomics: return "radiomics";
        case DescriptorKind::intensity: return "intensity";
    }
    return "?";
}

inline std::vector<std::string> descriptor_names(DescriptorKind k) {
    switch (k) {
        case DescriptorKind::grrail: return grrail_names();
        case DescriptorKind::radiomics: return radiomics_names();
        case DescriptorKind::intensity: return intensity_graph_names();
    }
    return {};
}

inline NamedVector compute_descriptor(DescriptorKind k, const VoxelGrid& volume, const RoiMask& mask,
                                      const DescriptorConfig& cfg) {
    switch (k) {
        case DescriptorKind::grrail: return grrail_descriptor(volume, mask, cfg);
        case DescriptorKind::radiomics: return radiomics_aggregate(volume, mask, cfg);
        case DescriptorKind::intensity: return intensity_graph(volume, mask, cfg);
    }
    return {};
}

/// Seed of one subject's descriptor run.
inline std::uint64_t subject_seed(std::uint64_t master, const std::string& id) { return derive_seed(master, id); }

struct SubjectRecord {
    std::string id;
    std::uint64_t seed = 0;
    std::uint64_t volume_hash = 0;
    std::uint64_t mask_hash = 0;
    std::size_t roi_voxels = 0;
};

struct DescriptorRun {
    FeatureTable table;
    std::vector<SubjectRecord> subjects;
};

/// One descriptor row per manifest entry, subjects spread over `threads`
/// workers (each subject runs single-threaded). Row order follows the manifest.
inline DescriptorRun descriptor_table(const std::vector<ManifestEntry>& manifest, DescriptorKind kind,
                                      const DescriptorConfig& base, unsigned threads) {
    base.validate();
    DescriptorRun run;
    run.table.features = descriptor_names(kind);
    run.table.ids.resize(manifest.size());
    run.table.values.resize(manifest.size());
    run.subjects.resize(manifest.size());
    parallel_for(manifest.size(), threads, [&](std::size_t s) {
        const auto& e = manifest[s];
        const VoxelGrid volume = load_volume(e.volume);
        const RoiMask mask = load_mask(e.mask);
        DescriptorConfig cfg = base;
        cfg.seed = subject_seed(base.seed, e.id);
        cfg.threads = 1;
        NamedVector v;
        try {
            v = compute_descriptor(kind, volume, mask, cfg);
        } catch (const Error& err) {
            throw Error(err.code(), "subject " + e.id + ": " + err.what());
        }
        run.table.ids[s] = e.id;
        run.table.values[s] = std::move(v.values);
        VoxelGrid mg{mask.dims, volume.spacing_mm, std::vector<double>(mask.flags.begin(), mask.flags.end())};
        run.subjects[s] = {e.id, cfg.seed, grid_hash(volume), grid_hash(mg), mask.count()};
    });
    return run;
}

inline std::uint64_t row_hash(const std::vector<double>& row) {
    std::string text;
    for (double v : row) text += format_number(v) + ",";
    return fnv1a64(text);
}

inline nlohmann::ordered_json config_json(const DescriptorConfig& c) {
    return {{"bins", c.bins},
            {"window", 3},
            {"u_max", c.u_max},
            {"intensity_u_max", c.intensity_u_max},
            {"edges", to_string(c.graph.edges)},
            {"weights", to_string(c.graph.weights)},
            {"hist_bins", c.graph.histogram_bins},
            {"min_roi_voxels", c.min_roi_voxels},
            {"seed", c.seed}};
}

/// Run manifest: resolved config, seeds and per-subject input hashes.
inline nlohmann::ordered_json run_manifest(const DescriptorRun& run, DescriptorKind kind, const DescriptorConfig& cfg) {
    nlohmann::ordered_json j;
    j["format"] = "grrail-run-1";
    j["command"] = "descriptor";
    j["kind"] = to_string(kind);
    j["config"] = config_json(cfg);
    j["columns"] = run.table.features.size() + 1;
    auto& subjects = j["subjects"] = nlohmann::ordered_json::array();
    for (std::size_t s = 0; s < run.subjects.size(); ++s) {
        const auto& r = run.subjects[s];
        subjects.push_back({{"subject_id", r.id},
                            {"seed", r.seed},
                            {"roi_voxels", r.roi_voxels},
                            {"volume_hash", hex64(r.volume_hash)},
                            {"mask_hash", hex64(r.mask_hash)},
                            {"row_hash", hex64(row_hash(run.table.values[s]))}});
    }
    return j;
}

/// Joins a feature table with the manifest's labels and splits by subject id.
/// Every manifest subject must have a row.
inline CohortTable join_cohort(const FeatureTable& features, const std::vector<ManifestEntry>& manifest) {
    std::map<std::string, std::size_t> row_of;
    for (std::size_t r = 0; r < features.ids.size(); ++r)
        if (!row_of.emplace(features.ids[r], r).second) throw Error("malformed feature table", "duplicate subject " + features.ids[r]);
    CohortTable t;
    t.features = features.features;
    for (const auto& e : manifest) {
        const auto it = row_of.find(e.id);
        if (it == row_of.end()) throw Error("missing subject", e.id + " is in the manifest but not in the feature table");
        t.rows.push_back({e.id, features.values[it->second], e.label, e.test});
    }
    return t;
}

inline nlohmann::ordered_json report_json(const EvalReport& r, const CohortTable& t, const CvParams& p) {
    nlohmann::ordered_json j;
    j["format"] = "grrail-report-1";
    j["auc"] = r.auc;
    j["auc_source"] = r.test_auc >= 0.0 ? "test" : "cv";
    j["cv_auc"] = r.cv_auc;
    j["test_auc"] = r.test_auc >= 0.0 ? nlohmann::ordered_json(r.test_auc) : nlohmann::ordered_json(nullptr);
    j["cv_accuracy_mean"] = r.cv_accuracy_mean;
    j["cv_accuracy_std"] = r.cv_accuracy_std;
    j["fold_accuracies"] = r.fold_accuracies;
    j["test_accuracy"] = r.test_count ? nlohmann::ordered_json(r.test_accuracy) : nlohmann::ordered_json(nullptr);
    j["train_count"] = t.rows_where(false).size();
    j["test_count"] = r.test_count;
    j["feature_count"] = t.features.size();
    auto& sel = j["selected"] = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < r.selected.size(); ++k)
        sel.push_back({{"feature", r.selected[k]}, {"permutation_importance", r.importances[k]}});
    j["fold_selections"] = r.fold_selections;
    j["warnings"] = r.warnings;
    j["config"] = {{"folds", p.folds},
                   {"trees", p.forest.trees},
                   {"min_leaf", p.forest.min_leaf},
                   {"max_depth", p.forest.max_depth},
                   {"features_per_split", p.forest.features_per_split},
                   {"target_k", p.selection.target_k},
                   {"correlation_threshold", p.selection.correlation_threshold},
                   {"drop_fraction", p.selection.drop_fraction},
                   {"permutation_repeats", p.permutation_repeats},
                   {"seed", p.seed}};
    return j;
}

/// Per-subject rows: out-of-fold probability for training subjects, the
/// final model's probability for test subjects.
inline FeatureTable report_rows(const EvalReport& r, const CohortTable& t) {
    FeatureTable out;
    out.features = {"label", "test", "fold", "probability", "predicted"};
    std::map<std::string, const SubjectDecision*> decision;
    for (const auto& d : r.decisions) decision[d.id] = &d;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        double prob = r.oof_probability[i], fold = static_cast<double>(r.fold_of_row[i]);
        if (row.test) {
            prob = decision.at(row.id)->probability;
            fold = -1;
        }
        out.ids.push_back(row.id);
        out.values.push_back({static_cast<double>(row.label), row.test ? 1.0 : 0.0, fold, prob, prob > 0.5 ? 1.0 : 0.0});
    }
    return out;
}

struct CohortPlan {
    std::size_t n = 40;
    std::uint64_t seed = 0;
    double test_fraction = 0.25;
    CohortOptions phantom{};
};

/// Subject ids, classes and splits of a phantom cohort. The first half are
/// homogeneous, the rest heterogeneous; each class puts round(fraction * size)
/// seeded picks into the test split.
inline std::vector<ManifestEntry> plan_cohort(const CohortPlan& plan, std::vector<PhantomSpec>* specs = nullptr) {
    if (plan.n < 2) throw Error("invalid cohort size", "need at least one subject per class");
    if (!(plan.test_fraction >= 0.0 && plan.test_fraction < 1.0)) throw Error("invalid test fraction");
    std::vector<ManifestEntry> out(plan.n);
    const std::size_t homogeneous = plan.n / 2;
    char buf[32];
    for (std::size_t i = 0; i < plan.n; ++i) {
        std::snprintf(buf, sizeof buf, "sub-%03zu", i);
        out[i].id = buf;
        out[i].label = i < homogeneous ? 0 : 1;
    }
    for (int cls = 0; cls < 2; ++cls) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < plan.n; ++i)
            if (out[i].label == cls) members.push_back(i);
        std::mt19937_64 rng(derive_seed(plan.seed, "split-" + std::to_string(cls)));
        std::shuffle(members.begin(), members.end(), rng);
        const auto n_test = static_cast<std::size_t>(std::lround(plan.test_fraction * static_cast<double>(members.size())));
        for (std::size_t k = 0; k < n_test; ++k) out[members[k]].test = true;
    }
    if (specs) {
        specs->clear();
        for (std::size_t i = 0; i < plan.n; ++i)
            specs->push_back(cohort_member_spec(plan.seed, i, out[i].label ? PhantomClass::heterogeneous : PhantomClass::homogeneous,
                                                plan.phantom));
    }
    return out;
}

inline nlohmann::ordered_json spec_json(const PhantomSpec& s) {
    nlohmann::ordered_json regions = nlohmann::ordered_json::array();
    for (const auto& r : s.regions) regions.push_back({{"mean", r.mean}, {"stddev", r.stddev}, {"smoothing", r.smoothing}});
    return {{"class", to_string(s.cls)},
            {"dims", {s.dims.nx, s.dims.ny, s.dims.nz}},
            {"semi_axes", s.semi_axes},
            {"regions", regions},
            {"noise", s.noise},
            {"seed", s.seed}};
}

}  // namespace grrail
