// Per-subject descriptors: graph descriptors over the 13 texture maps
// (195 values), first-order statistics of the same maps (65 values), and
// the graph descriptor of the intensity clusters themselves (15 values).
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "grrail/common.hpp"
#include "grrail/glcm.hpp"
#include "grrail/gmm.hpp"
#include "grrail/graph.hpp"
#include "grrail/metrics.hpp"
#include "grrail/volume.hpp"

namespace grrail {

struct DescriptorConfig {
    int bins = 16;
    int u_max = 5;
    int intensity_u_max = 5;
    GraphOptions graph{};
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::size_t min_roi_voxels = 2;

    void validate() const {
        if (bins < 2) throw Error("invalid config", "bins must be >= 2");
        if (u_max < 1 || u_max > 12) throw Error("invalid config", "u_max must lie in [1, 12]");
        if (intensity_u_max < 1 || intensity_u_max > 12) throw Error("invalid config", "intensity_u_max must lie in [1, 12]");
        if (graph.histogram_bins < 1) throw Error("invalid config", "histogram bins must be >= 1");
    }
};

struct NamedVector {
    std::vector<std::string> names;
    std::vector<double> values;
};

inline constexpr std::size_t kGrrailLength = kFeatureCount * kMetricCount;  // 195
inline constexpr std::size_t kRadiomicsLength = kFeatureCount * 5;          // 65
inline constexpr std::size_t kIntensityGraphLength = kMetricCount;          // 15

inline constexpr std::array<std::string_view, 5> kStatisticNames{"mean", "median", "std", "kurtosis", "skewness"};

inline std::vector<std::string> grrail_names() {
    std::vector<std::string> out;
    for (auto map : kFeatureNames)
        for (auto metric : kMetricNames) out.push_back(std::string(map) + "_" + std::string(metric));
    return out;
}

inline std::vector<std::string> radiomics_names() {
    std::vector<std::string> out;
    for (auto map : kFeatureNames)
        for (auto stat : kStatisticNames) out.push_back(std::string(map) + "_" + std::string(stat));
    return out;
}

inline std::vector<std::string> intensity_graph_names() {
    std::vector<std::string> out;
    for (auto metric : kMetricNames) out.push_back("intensity_" + std::string(metric));
    return out;
}

inline void check_length(const NamedVector& v, std::size_t expected, const char* kind) {
    if (v.values.size() != expected || v.names.size() != expected)
        throw Error("descriptor length mismatch", std::string(kind) + " has " + std::to_string(v.values.size()) +
                                                      " values, expected " + std::to_string(expected));
}

/// Intermediate products of one map's sub-pipeline.
struct MapGraph {
    ClusterMap clusters;
    ClusterGraph graph;
    GraphFeatureVector features{};
};

inline MapGraph map_graph(const FeatureMap& map, const DescriptorConfig& cfg, std::uint64_t seed) {
    MapGraph out;
    out.clusters = cluster_feature_map(map, cfg.u_max, seed);
    out.graph = build_graph(out.clusters, map, cfg.graph);
    out.features = graph_features(out.graph);
    return out;
}

inline std::uint64_t map_seed(std::uint64_t seed, Feature f) { return derive_seed(seed, feature_name(f)); }

inline void check_roi_size(const VoxelGrid& volume, const RoiMask& mask, const DescriptorConfig& cfg) {
    const std::size_t n = validate_pair(volume, mask);
    if (n < cfg.min_roi_voxels)
        throw Error("ROI too small", std::to_string(n) + " voxels, at least " + std::to_string(cfg.min_roi_voxels) +
                                         " required for windowing");
}

/// Full per-map pipeline; `graphs` (optional) receives the intermediates.
inline NamedVector grrail_descriptor(const VoxelGrid& volume, const RoiMask& mask, const DescriptorConfig& cfg,
                          std::vector<MapGraph>* graphs = nullptr) {
    cfg.validate();
    check_roi_size(volume, mask, cfg);
    const FeatureMaps maps = extract_feature_maps(volume, mask, cfg.bins, cfg.threads);
    std::vector<MapGraph> per_map(kFeatureCount);
    parallel_for(kFeatureCount, cfg.threads, [&](std::size_t f) {
        per_map[f] = map_graph(maps[f], cfg, map_seed(cfg.seed, maps[f].feature));
    });
    NamedVector out{grrail_names(), {}};
    out.values.reserve(kGrrailLength);
    for (const auto& mg : per_map) out.values.insert(out.values.end(), mg.features.begin(), mg.features.end());
    check_length(out, kGrrailLength, "grrail");
    if (graphs) *graphs = std::move(per_map);
    return out;
}

struct Moments {
    double mean = 0, median = 0, std = 0, kurtosis = 0, skewness = 0;
};

/// Population moments; skewness and excess kurtosis are 0 at zero variance.
inline Moments moments(std::vector<double> v) {
    Moments m;
    if (v.empty()) return m;
    const double n = static_cast<double>(v.size());
    for (double x : v) m.mean += x;
    m.mean /= n;
    double m2 = 0, m3 = 0, m4 = 0;
    for (double x : v) {
        const double d = x - m.mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    m.std = std::sqrt(m2);
    if (m2 > 0.0) {
        m.skewness = m3 / std::pow(m2, 1.5);
        m.kurtosis = m4 / (m2 * m2) - 3.0;
    }
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    m.median = v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
    return m;
}

inline NamedVector radiomics_aggregate(const FeatureMaps& maps) {
    NamedVector out{radiomics_names(), {}};
    for (const auto& map : maps) {
        const Moments m = moments(map.values);
        out.values.insert(out.values.end(), {m.mean, m.median, m.std, m.kurtosis, m.skewness});
    }
    check_length(out, kRadiomicsLength, "radiomics");
    return out;
}

inline NamedVector radiomics_aggregate(const VoxelGrid& volume, const RoiMask& mask, const DescriptorConfig& cfg) {
    cfg.validate();
    check_roi_size(volume, mask, cfg);
    return radiomics_aggregate(extract_feature_maps(volume, mask, cfg.bins, cfg.threads));
}

/// Clusters the raw ROI intensities (no texture maps) and describes the
/// resulting cluster graph.
inline NamedVector intensity_graph(const VoxelGrid& volume, const RoiMask& mask, const DescriptorConfig& cfg,
                                   MapGraph* intermediate = nullptr) {
    cfg.validate();
    check_roi_size(volume, mask, cfg);
    const auto voxels = mask.voxels();
    std::vector<double> values(voxels.size());
    for (std::size_t k = 0; k < voxels.size(); ++k) values[k] = volume.values[voxels[k]];
    MapGraph mg;
    mg.clusters = cluster_values(volume.dims, voxels, values, cfg.intensity_u_max, derive_seed(cfg.seed, "intensity"));
    mg.graph = build_graph(mg.clusters, values, cfg.graph);
    mg.features = graph_features(mg.graph);
    NamedVector out{intensity_graph_names(), std::vector<double>(mg.features.begin(), mg.features.end())};
    check_length(out, kIntensityGraphLength, "intensity graph");
    if (intermediate) *intermediate = std::move(mg);
    return out;
}

}  // namespace grrail
