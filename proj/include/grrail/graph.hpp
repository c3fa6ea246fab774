// Cluster-centroid graphs: one node per cluster, edges between spatially
// touching clusters (or all pairs), weighted by the 1-D earth mover's
// distance between the clusters' value histograms.
#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "grrail/common.hpp"
#include "grrail/glcm.hpp"
#include "grrail/gmm.hpp"

namespace grrail {

enum class EdgePolicy { rag26, complete };
enum class WeightPolicy { emd, centroid_distance };

inline EdgePolicy parse_edge_policy(const std::string& s) {
    if (s == "rag26") return EdgePolicy::rag26;
    if (s == "complete") return EdgePolicy::complete;
    throw Error("invalid edge policy", s);
}
inline const char* to_string(EdgePolicy p) { return p == EdgePolicy::rag26 ? "rag26" : "complete"; }

inline WeightPolicy parse_weight_policy(const std::string& s) {
    if (s == "emd") return WeightPolicy::emd;
    if (s == "centroid") return WeightPolicy::centroid_distance;
    throw Error("invalid weight policy", s);
}
inline const char* to_string(WeightPolicy p) { return p == WeightPolicy::emd ? "emd" : "centroid"; }

using Centroid = std::array<double, 3>;

/// Per-cluster mean voxel coordinate (continuous, not snapped).
inline std::vector<Centroid> centroids(const ClusterMap& cm) {
    const std::size_t u = cm.clusters();
    std::vector<std::array<std::uint64_t, 3>> sums(u, {0, 0, 0});
    std::vector<std::uint64_t> counts(u, 0);
    for (std::size_t k = 0; k < cm.voxels.size(); ++k) {
        const auto c = cm.dims.coords(cm.voxels[k]);
        const auto l = static_cast<std::size_t>(cm.labels[k]);
        for (int a = 0; a < 3; ++a) sums[l][a] += c[a];
        ++counts[l];
    }
    std::vector<Centroid> out(u);
    for (std::size_t l = 0; l < u; ++l)
        for (int a = 0; a < 3; ++a) out[l][a] = static_cast<double>(sums[l][a]) / static_cast<double>(counts[l]);
    return out;
}

/// Equal-width bin grid over an ROI's value range.
struct HistogramGrid {
    double lo = 0.0, hi = 0.0;
    int bins = 32;

    double width() const { return (hi - lo) / bins; }
    int bin(double v) const {
        if (!(hi > lo)) return 0;
        const int b = static_cast<int>(std::floor((v - lo) / (hi - lo) * bins));
        return std::clamp(b, 0, bins - 1);
    }
    static HistogramGrid over(std::span<const double> values, int bins) {
        if (bins < 1) throw Error("invalid histogram bins", std::to_string(bins));
        HistogramGrid g;
        g.bins = bins;
        if (values.empty()) return g;
        const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
        g.lo = *mn;
        g.hi = *mx;
        return g;
    }
};

/// Normalised histogram of the values belonging to cluster `u`.
inline std::vector<double> cluster_histogram(const ClusterMap& cm, std::span<const double> values, int u,
                                             const HistogramGrid& grid) {
    std::vector<double> h(static_cast<std::size_t>(grid.bins), 0.0);
    std::size_t n = 0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (cm.labels[k] != u) continue;
        h[static_cast<std::size_t>(grid.bin(values[k]))] += 1.0;
        ++n;
    }
    if (n == 0) throw Error("empty cluster", std::to_string(u));
    for (double& v : h) v /= static_cast<double>(n);
    return h;
}

inline std::vector<double> cluster_histogram(const ClusterMap& cm, const FeatureMap& map, int u, int bins) {
    return cluster_histogram(cm, map.values, u, HistogramGrid::over(map.values, bins));
}

/// Closed-form 1-D optimal transport cost: bin_width * sum |CDF1 - CDF2|.
inline double emd_1d(std::span<const double> h1, std::span<const double> h2, double bin_width) {
    if (h1.size() != h2.size()) throw Error("bin count mismatch");
    double c1 = 0.0, c2 = 0.0, total = 0.0;
    for (std::size_t k = 0; k < h1.size(); ++k) {
        c1 += h1[k];
        c2 += h2[k];
        total += std::abs(c1 - c2);
    }
    return bin_width * total;
}

struct GraphNode {
    int cluster = 0;
    Centroid centroid{};
    std::size_t members = 0;
    double mean_value = 0.0;
    std::vector<double> histogram;
};

struct GraphEdge {
    std::size_t i = 0, j = 0;  // i < j
    double weight = 0.0;
};

/// Undirected weighted graph with an explicit 0/1 adjacency matrix.
struct ClusterGraph {
    std::vector<GraphNode> nodes;
    std::vector<GraphEdge> edges;  // sorted by (i, j)
    std::vector<std::uint8_t> adjacency;  // |V| x |V| row-major
    double bin_width = 0.0;

    std::size_t size() const { return nodes.size(); }
    bool adjacent(std::size_t i, std::size_t j) const { return adjacency[i * nodes.size() + j] != 0; }
};

struct GraphOptions {
    EdgePolicy edges = EdgePolicy::rag26;
    WeightPolicy weights = WeightPolicy::emd;
    int histogram_bins = 32;
};

/// Pairs of clusters with at least one 26-connected voxel pair inside the ROI.
inline std::vector<std::uint8_t> touching_clusters(const ClusterMap& cm) {
    const std::size_t u = cm.clusters();
    std::vector<std::uint8_t> touch(u * u, 0);
    std::vector<int> label(cm.dims.count(), -1);
    for (std::size_t k = 0; k < cm.voxels.size(); ++k) label[cm.voxels[k]] = cm.labels[k];
    for (std::size_t k = 0; k < cm.voxels.size(); ++k) {
        const auto [x, y, z] = cm.dims.coords(cm.voxels[k]);
        const int a = cm.labels[k];
        for (const auto& d : kHalfNeighbourhood) {
            const long bx = static_cast<long>(x) + d[0], by = static_cast<long>(y) + d[1], bz = static_cast<long>(z) + d[2];
            if (!cm.dims.contains(bx, by, bz)) continue;
            const int b = label[cm.dims.index(static_cast<std::size_t>(bx), static_cast<std::size_t>(by),
                                              static_cast<std::size_t>(bz))];
            if (b < 0 || b == a) continue;
            touch[static_cast<std::size_t>(a) * u + static_cast<std::size_t>(b)] = 1;
            touch[static_cast<std::size_t>(b) * u + static_cast<std::size_t>(a)] = 1;
        }
    }
    return touch;
}

inline ClusterGraph build_graph(const ClusterMap& cm, std::span<const double> values, const GraphOptions& opt = {}) {
    if (values.size() != cm.labels.size()) throw Error("map/cluster size mismatch");
    const std::size_t u = cm.clusters();
    const auto grid = HistogramGrid::over(values, opt.histogram_bins);
    const auto cents = centroids(cm);

    ClusterGraph g;
    g.bin_width = grid.width();
    g.nodes.resize(u);
    for (std::size_t c = 0; c < u; ++c) {
        g.nodes[c].cluster = static_cast<int>(c);
        g.nodes[c].centroid = cents[c];
        g.nodes[c].members = cm.member_counts[c];
        g.nodes[c].mean_value = cm.cluster_means[c];
        g.nodes[c].histogram = cluster_histogram(cm, values, static_cast<int>(c), grid);
    }
    std::vector<std::uint8_t> connect;
    if (opt.edges == EdgePolicy::rag26) connect = touching_clusters(cm);
    else {
        connect.assign(u * u, 1);
        for (std::size_t c = 0; c < u; ++c) connect[c * u + c] = 0;
    }
    g.adjacency.assign(u * u, 0);
    for (std::size_t i = 0; i < u; ++i)
        for (std::size_t j = i + 1; j < u; ++j) {
            if (!connect[i * u + j]) continue;
            double w = 0.0;
            if (opt.weights == WeightPolicy::emd) {
                w = emd_1d(g.nodes[i].histogram, g.nodes[j].histogram, g.bin_width);
            } else {
                double s = 0.0;
                for (int a = 0; a < 3; ++a) s += (cents[i][a] - cents[j][a]) * (cents[i][a] - cents[j][a]);
                w = std::sqrt(s);
            }
            g.edges.push_back({i, j, w});
            g.adjacency[i * u + j] = g.adjacency[j * u + i] = 1;
        }
    return g;
}

inline ClusterGraph build_graph(const ClusterMap& cm, const FeatureMap& map, const GraphOptions& opt = {}) {
    return build_graph(cm, map.values, opt);
}

inline nlohmann::ordered_json to_json(const ClusterGraph& g) {
    nlohmann::ordered_json j;
    j["format"] = "grrail-graph-1";
    j["bin_width"] = g.bin_width;
    auto& nodes = j["nodes"] = nlohmann::ordered_json::array();
    for (const auto& n : g.nodes) {
        nodes.push_back({{"cluster", n.cluster},
                         {"centroid", n.centroid},
                         {"members", n.members},
                         {"mean_value", n.mean_value},
                         {"histogram", n.histogram}});
    }
    auto& edges = j["edges"] = nlohmann::ordered_json::array();
    for (const auto& e : g.edges) edges.push_back({{"source", e.i}, {"target", e.j}, {"weight", e.weight}});
    auto& adj = j["adjacency"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < g.size(); ++i) {
        std::vector<int> row(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) row[k] = g.adjacent(i, k) ? 1 : 0;
        adj.push_back(row);
    }
    return j;
}

inline ClusterGraph graph_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "grrail-graph-1") throw Error("malformed graph document", "bad format tag");
    ClusterGraph g;
    g.bin_width = j.at("bin_width").get<double>();
    for (const auto& n : j.at("nodes")) {
        GraphNode node;
        node.cluster = n.at("cluster").get<int>();
        node.centroid = n.at("centroid").get<Centroid>();
        node.members = n.at("members").get<std::size_t>();
        node.mean_value = n.at("mean_value").get<double>();
        node.histogram = n.at("histogram").get<std::vector<double>>();
        g.nodes.push_back(std::move(node));
    }
    const std::size_t u = g.nodes.size();
    g.adjacency.assign(u * u, 0);
    for (const auto& e : j.at("edges")) {
        GraphEdge edge{e.at("source").get<std::size_t>(), e.at("target").get<std::size_t>(), e.at("weight").get<double>()};
        if (edge.i >= u || edge.j >= u || edge.i == edge.j) throw Error("malformed graph document", "bad edge endpoint");
        if (edge.i > edge.j) std::swap(edge.i, edge.j);
        g.adjacency[edge.i * u + edge.j] = g.adjacency[edge.j * u + edge.i] = 1;
        g.edges.push_back(edge);
    }
    return g;
}

}  // namespace grrail
