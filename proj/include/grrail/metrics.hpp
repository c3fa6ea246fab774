// The 15 global graph descriptors computed per cluster graph.
//
// Conventions (see docs/metrics.md for the full ledger):
//   * shortest-path quantities use edge weights as distances (Dijkstra);
//   * triangle/degree quantities use the unweighted topology;
//   * diameter and radius are taken over the largest connected component
//     (ties: the component holding the lowest node index).
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string_view>
#include <vector>

#include "grrail/common.hpp"
#include "grrail/graph.hpp"

namespace grrail {

enum class Metric : int {
    size,
    density,
    diameter,
    avg_path_length,
    clustering_coefficient,
    modularity,
    small_worldness,
    connected_components,
    assortativity,
    radius,
    global_efficiency,
    network_entropy,
    num_hubs,
    randomness,
    resilience,
};

inline constexpr std::size_t kMetricCount = 15;

inline constexpr std::array<std::string_view, kMetricCount> kMetricNames{
    "size",          "density",       "diameter",          "avg_path_length", "clustering_coefficient",
    "modularity",    "small_worldness", "connected_components", "assortativity", "radius",
    "global_efficiency", "network_entropy", "num_hubs",     "randomness",      "resilience",
};

using GraphFeatureVector = std::array<double, kMetricCount>;

/// Row emitted for a graph with a single node.
inline constexpr GraphFeatureVector kSingleNodeRow{1, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 10, 0};

/// Bare topology + weights; what the metrics actually consume.
struct WeightedGraph {
    std::size_t n = 0;
    std::vector<GraphEdge> edges;
};

inline WeightedGraph topology(const ClusterGraph& g) { return {g.size(), g.edges}; }

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Adjacency {
    std::size_t n = 0;
    std::vector<double> w;          // n*n, +inf where no edge
    std::vector<std::uint8_t> a;    // n*n 0/1
    std::vector<int> degree;

    explicit Adjacency(const WeightedGraph& g) : n(g.n), w(n * n, kInf), a(n * n, 0), degree(n, 0) {
        for (const auto& e : g.edges) {
            if (e.i == e.j || e.i >= n || e.j >= n) throw Error("invalid edge", "self-loop or out-of-range endpoint");
            if (a[e.i * n + e.j]) throw Error("invalid edge", "duplicate edge");
            a[e.i * n + e.j] = a[e.j * n + e.i] = 1;
            w[e.i * n + e.j] = w[e.j * n + e.i] = e.weight;
            ++degree[e.i];
            ++degree[e.j];
        }
    }
    bool adj(std::size_t i, std::size_t j) const { return a[i * n + j] != 0; }
};

/// All-pairs shortest distances, optionally counting hops instead of weights.
inline std::vector<double> all_pairs(const Adjacency& g, bool hops) {
    const std::size_t n = g.n;
    std::vector<double> dist(n * n, kInf);
    std::vector<std::uint8_t> done(n);
    for (std::size_t s = 0; s < n; ++s) {
        double* d = dist.data() + s * n;
        std::fill(done.begin(), done.end(), 0);
        d[s] = 0.0;
        for (std::size_t iter = 0; iter < n; ++iter) {
            std::size_t u = n;
            for (std::size_t v = 0; v < n; ++v)
                if (!done[v] && d[v] < kInf && (u == n || d[v] < d[u])) u = v;
            if (u == n) break;
            done[u] = 1;
            for (std::size_t v = 0; v < n; ++v) {
                if (!g.adj(u, v) || done[v]) continue;
                const double cand = d[u] + (hops ? 1.0 : g.w[u * n + v]);
                if (cand < d[v]) d[v] = cand;
            }
        }
    }
    return dist;
}

/// Component id per node (ids in order of lowest member index), optionally
/// ignoring one removed node (id -1).
inline std::vector<int> components(const Adjacency& g, std::size_t removed = static_cast<std::size_t>(-1)) {
    std::vector<int> comp(g.n, -1);
    int next = 0;
    std::vector<std::size_t> stack;
    for (std::size_t s = 0; s < g.n; ++s) {
        if (s == removed || comp[s] >= 0) continue;
        comp[s] = next;
        stack.push_back(s);
        while (!stack.empty()) {
            const std::size_t u = stack.back();
            stack.pop_back();
            for (std::size_t v = 0; v < g.n; ++v)
                if (v != removed && g.adj(u, v) && comp[v] < 0) {
                    comp[v] = next;
                    stack.push_back(v);
                }
        }
        ++next;
    }
    return comp;
}

inline std::vector<std::size_t> component_sizes(const std::vector<int>& comp) {
    std::vector<std::size_t> sizes;
    for (int c : comp) {
        if (c < 0) continue;
        if (static_cast<std::size_t>(c) >= sizes.size()) sizes.resize(static_cast<std::size_t>(c) + 1, 0);
        ++sizes[static_cast<std::size_t>(c)];
    }
    return sizes;
}

/// Weighted Newman modularity of one partition.
inline double partition_modularity(const Adjacency& g, const std::vector<int>& community, double total_weight) {
    const std::size_t n = g.n;
    std::vector<double> strength(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (g.adj(i, j)) strength[i] += g.w[i * n + j];
    const double two_m = 2.0 * total_weight;
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (community[i] != community[j]) continue;
            const double aij = g.adj(i, j) ? g.w[i * n + j] : 0.0;
            q += aij - strength[i] * strength[j] / two_m;
        }
    return q / two_m;
}

/// Exhaustive search over all set partitions (restricted growth strings).
inline double modularity_exhaustive(const Adjacency& g, double total_weight) {
    const std::size_t n = g.n;
    std::vector<int> rgs(n, 0), maxes(n, 0);
    double best = partition_modularity(g, rgs, total_weight);
    auto advance = [&] {
        for (std::size_t i = n; i-- > 1;) {
            if (rgs[i] > maxes[i - 1]) continue;
            ++rgs[i];
            maxes[i] = std::max(maxes[i - 1], rgs[i]);
            for (std::size_t k = i + 1; k < n; ++k) {
                rgs[k] = 0;
                maxes[k] = maxes[i];
            }
            return true;
        }
        return false;
    };
    while (advance()) best = std::max(best, partition_modularity(g, rgs, total_weight));
    return best;
}

/// Agglomerative greedy maximisation: repeatedly merge the community pair
/// with the largest gain (lowest index pair on ties) while the gain is
/// positive.
inline double modularity_greedy(const Adjacency& g, double total_weight) {
    const std::size_t n = g.n;
    const double two_m = 2.0 * total_weight;
    std::vector<std::vector<double>> e(n, std::vector<double>(n, 0.0));
    std::vector<double> a(n, 0.0);
    std::vector<std::uint8_t> alive(n, 1);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (g.adj(i, j)) {
                e[i][j] = g.w[i * n + j] / two_m;
                a[i] += e[i][j];
            }
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i) q -= a[i] * a[i];
    double best = q;
    while (true) {
        double gain = 0.0;
        std::size_t bi = n, bj = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (!alive[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (!alive[j]) continue;
                const double dq = 2.0 * (e[i][j] - a[i] * a[j]);
                if (dq > gain) {
                    gain = dq;
                    bi = i;
                    bj = j;
                }
            }
        }
        if (bi == n) break;
        for (std::size_t k = 0; k < n; ++k) {
            if (!alive[k] || k == bi || k == bj) continue;
            e[bi][k] += e[bj][k];
            e[k][bi] = e[bi][k];
        }
        a[bi] += a[bj];
        alive[bj] = 0;
        q += gain;
        best = std::max(best, q);
    }
    return best;
}

}  // namespace detail

/// Node count at or below which modularity is maximised exactly.
inline constexpr std::size_t kExactModularityNodes = 8;

inline double modularity(const WeightedGraph& graph) {
    const detail::Adjacency g(graph);
    double total = 0.0;
    for (const auto& e : graph.edges) total += e.weight;
    if (!(total > 0.0)) return 0.0;
    const double best = g.n <= kExactModularityNodes ? detail::modularity_exhaustive(g, total)
                                                     : detail::modularity_greedy(g, total);
    // the one-community partition always scores 0
    return std::max(best, 0.0);
}

inline GraphFeatureVector graph_features(const WeightedGraph& graph) {
    const std::size_t n = graph.n;
    if (n == 0) throw Error("empty graph");
    if (n == 1) return kSingleNodeRow;
    const detail::Adjacency g(graph);
    const double nd = static_cast<double>(n);
    const double m = static_cast<double>(graph.edges.size());
    GraphFeatureVector q{};

    q[static_cast<int>(Metric::size)] = nd;
    const double density = 2.0 * m / (nd * (nd - 1.0));
    q[static_cast<int>(Metric::density)] = density;

    const auto comp = detail::components(g);
    const auto sizes = detail::component_sizes(comp);
    q[static_cast<int>(Metric::connected_components)] = static_cast<double>(sizes.size());
    const int largest = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());

    const auto dist = detail::all_pairs(g, false);
    const auto hops = detail::all_pairs(g, true);
    double diameter = 0.0, radius = detail::kInf;
    double path_sum = 0.0, hop_sum = 0.0, eff_sum = 0.0;
    std::size_t connected_pairs = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double ecc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double d = dist[i * n + j];
            if (d == detail::kInf) continue;
            ecc = std::max(ecc, d);
            path_sum += d;
            hop_sum += hops[i * n + j];
            ++connected_pairs;
            if (d > 0.0) eff_sum += 1.0 / d;
        }
        if (comp[i] == largest) {
            diameter = std::max(diameter, ecc);
            radius = std::min(radius, ecc);
        }
    }
    q[static_cast<int>(Metric::diameter)] = diameter;
    q[static_cast<int>(Metric::radius)] = radius;
    const double apl = connected_pairs ? path_sum / static_cast<double>(connected_pairs) : 0.0;
    const double hop_apl = connected_pairs ? hop_sum / static_cast<double>(connected_pairs) : 0.0;
    q[static_cast<int>(Metric::avg_path_length)] = apl;
    q[static_cast<int>(Metric::global_efficiency)] = eff_sum / (nd * (nd - 1.0));

    // transitivity
    double triangles = 0.0, triplets = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = g.degree[i];
        triplets += d * (d - 1.0) / 2.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (!g.adj(i, j)) continue;
            for (std::size_t k = j + 1; k < n; ++k)
                if (g.adj(i, k) && g.adj(j, k)) triangles += 1.0;
        }
    }
    const double clustering = triplets > 0.0 ? 3.0 * triangles / triplets : 0.0;
    q[static_cast<int>(Metric::clustering_coefficient)] = clustering;

    q[static_cast<int>(Metric::modularity)] = modularity(graph);

    // small-worldness against an Erdos-Renyi baseline of equal density
    const double mean_degree = 2.0 * m / nd;
    double sigma = 0.0;
    if (density > 0.0 && hop_apl > 0.0 && mean_degree > 1.0) {
        const double l_random = std::log(nd) / std::log(mean_degree);
        sigma = (clustering / density) / (hop_apl / l_random);
    }
    q[static_cast<int>(Metric::small_worldness)] = sigma;

    // degree assortativity over both orientations of every edge
    double sx = 0, sxx = 0, sxy = 0, cnt = 0;
    for (const auto& e : graph.edges) {
        const double a = g.degree[e.i], b = g.degree[e.j];
        sx += a + b;
        sxx += a * a + b * b;
        sxy += 2.0 * a * b;
        cnt += 2.0;
    }
    double assort = 0.0;
    if (cnt > 0.0) {
        const double mean = sx / cnt;
        const double var = sxx / cnt - mean * mean;
        if (var > 1e-12) assort = (sxy / cnt - mean * mean) / var;
    }
    q[static_cast<int>(Metric::assortativity)] = assort;

    // Shannon entropy of the degree distribution; hubs above mean + 1 sd
    std::vector<std::size_t> hist(n, 0);
    double dsum = 0.0, dsq = 0.0;
    for (int d : g.degree) {
        ++hist[static_cast<std::size_t>(d)];
        dsum += d;
        dsq += static_cast<double>(d) * d;
    }
    double entropy = 0.0;
    for (std::size_t c : hist)
        if (c) {
            const double p = static_cast<double>(c) / nd;
            entropy -= p * std::log2(p);
        }
    q[static_cast<int>(Metric::network_entropy)] = entropy;
    const double dmean = dsum / nd;
    const double dsd = std::sqrt(std::max(0.0, dsq / nd - dmean * dmean));
    double hubs = 0.0;
    for (int d : g.degree)
        if (d > dmean + dsd + 1e-12) hubs += 1.0;
    q[static_cast<int>(Metric::num_hubs)] = hubs;

    q[static_cast<int>(Metric::randomness)] = clustering > 0.0 ? std::clamp(density / clustering, 0.0, 10.0) : 10.0;

    // largest component after deleting the highest-degree node
    const auto hub = static_cast<std::size_t>(std::max_element(g.degree.begin(), g.degree.end()) - g.degree.begin());
    const auto rest = detail::component_sizes(detail::components(g, hub));
    const double largest_rest = rest.empty() ? 0.0 : static_cast<double>(*std::max_element(rest.begin(), rest.end()));
    q[static_cast<int>(Metric::resilience)] = largest_rest / (nd - 1.0);
    return q;
}

inline GraphFeatureVector graph_features(const ClusterGraph& g) { return graph_features(topology(g)); }

}  // namespace grrail
