// One-dimensional Gaussian mixtures fitted by EM, BIC model-order
// selection, and hard clustering of feature maps.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "grrail/common.hpp"
#include "grrail/glcm.hpp"

namespace grrail {

struct GmmModel {
    std::vector<double> weights;
    std::vector<double> means;      // ascending
    std::vector<double> variances;  // each >= variance_floor
    double variance_floor = 0.0;
    double log_likelihood = 0.0;
    int iterations = 0;
    std::uint64_t seed = 0;
    std::vector<double> loglik_trace;  // one entry per E-step

    std::size_t components() const { return means.size(); }
};

struct EmOptions {
    int max_iterations = 300;
    double relative_tolerance = 1e-6;
};

namespace detail {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // ln(2*pi)

inline double log_normal(double x, double mean, double var) {
    const double d = x - mean;
    return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

/// Distinct sample values with multiplicities, ascending.
struct WeightedSamples {
    std::vector<double> values;
    std::vector<double> counts;
    double total = 0.0;
};

inline WeightedSamples compress(std::vector<double> sorted) {
    WeightedSamples w;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        w.values.push_back(sorted[i]);
        w.counts.push_back(static_cast<double>(j - i));
        i = j;
    }
    w.total = static_cast<double>(sorted.size());
    return w;
}

/// E-step: responsibilities into `resp` (row-major, values x M); returns the
/// total log-likelihood.
inline double e_step(const WeightedSamples& s, const GmmModel& m, std::vector<double>& resp) {
    const std::size_t M = m.components();
    resp.resize(s.values.size() * M);
    std::vector<double> logw(M), logv(M);
    for (std::size_t u = 0; u < M; ++u) {
        logw[u] = std::log(m.weights[u]);
        logv[u] = std::log(m.variances[u]);
    }
    double ll = 0.0;
    for (std::size_t t = 0; t < s.values.size(); ++t) {
        double* r = resp.data() + t * M;
        double peak = -std::numeric_limits<double>::infinity();
        for (std::size_t u = 0; u < M; ++u) {
            const double d = s.values[t] - m.means[u];
            r[u] = logw[u] - 0.5 * (kLog2Pi + logv[u] + d * d / m.variances[u]);
            peak = std::max(peak, r[u]);
        }
        double sum = 0.0;
        for (std::size_t u = 0; u < M; ++u) {
            r[u] = std::exp(r[u] - peak);
            sum += r[u];
        }
        for (std::size_t u = 0; u < M; ++u) r[u] /= sum;
        ll += s.counts[t] * (peak + std::log(sum));
    }
    return ll;
}

inline void canonicalise(GmmModel& m) {
    std::vector<std::size_t> order(m.components());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (m.means[a] != m.means[b]) return m.means[a] < m.means[b];
        return m.variances[a] < m.variances[b];
    });
    GmmModel out = m;
    for (std::size_t k = 0; k < order.size(); ++k) {
        out.weights[k] = m.weights[order[k]];
        out.means[k] = m.means[order[k]];
        out.variances[k] = m.variances[order[k]];
    }
    m = std::move(out);
}

}  // namespace detail

/// Maximum-likelihood M-component mixture via EM.
///
/// Initial means sit at evenly spaced sample quantiles (u + 1/2)/M plus a
/// seeded jitter of 1e-3 standard deviations; weights start equal and every
/// variance starts at the sample variance. Variances never drop below
/// 1e-6 * var(samples) + 1e-12. Iteration stops once the relative
/// log-likelihood change falls under the tolerance or after max_iterations.
inline GmmModel fit_gmm(std::span<const double> samples, int M, std::uint64_t seed, const EmOptions& opt = {}) {
    if (M < 1) throw Error("invalid component count", std::to_string(M));
    if (samples.size() < static_cast<std::size_t>(M))
        throw Error("too few samples", std::to_string(samples.size()) + " samples for " + std::to_string(M) + " components");
    const double n = static_cast<double>(samples.size());
    double mean = 0.0;
    for (double x : samples) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : samples) var += (x - mean) * (x - mean);
    var /= n;

    GmmModel m;
    m.seed = seed;
    m.variance_floor = 1e-6 * var + 1e-12;

    if (M == 1) {
        m.weights = {1.0};
        m.means = {mean};
        m.variances = {std::max(var, m.variance_floor)};
        double ll = 0.0;
        for (double x : samples) ll += detail::log_normal(x, mean, m.variances[0]);
        m.log_likelihood = ll;
        m.loglik_trace = {ll};
        m.iterations = 1;
        return m;
    }

    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const auto data = detail::compress(sorted);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> jitter(0.0, 1e-3 * std::sqrt(var));
    m.weights.assign(static_cast<std::size_t>(M), 1.0 / M);
    m.variances.assign(static_cast<std::size_t>(M), std::max(var, m.variance_floor));
    for (int u = 0; u < M; ++u) {
        const double q = (u + 0.5) / M;
        const auto idx = std::min(sorted.size() - 1, static_cast<std::size_t>(q * static_cast<double>(sorted.size())));
        m.means.push_back(sorted[idx] + (var > 0.0 ? jitter(rng) : 0.0));
    }

    std::vector<double> resp;
    double prev = detail::e_step(data, m, resp);
    m.loglik_trace.push_back(prev);
    const auto Mu = static_cast<std::size_t>(M);
    int it = 0;
    for (; it < opt.max_iterations; ++it) {
        // M-step
        for (std::size_t u = 0; u < Mu; ++u) {
            double nk = 0.0, sx = 0.0;
            for (std::size_t t = 0; t < data.values.size(); ++t) {
                const double w = data.counts[t] * resp[t * Mu + u];
                nk += w;
                sx += w * data.values[t];
            }
            if (nk <= 0.0) {
                m.weights[u] = std::numeric_limits<double>::min();
                continue;
            }
            const double mu = sx / nk;
            double sv = 0.0;
            for (std::size_t t = 0; t < data.values.size(); ++t) {
                const double d = data.values[t] - mu;
                sv += data.counts[t] * resp[t * Mu + u] * d * d;
            }
            m.means[u] = mu;
            m.variances[u] = std::max(sv / nk, m.variance_floor);
            m.weights[u] = nk / data.total;
        }
        double wsum = 0.0;
        for (double w : m.weights) wsum += w;
        for (double& w : m.weights) w /= wsum;

        const double ll = detail::e_step(data, m, resp);
        m.loglik_trace.push_back(ll);
        const double change = std::abs(ll - prev);
        prev = ll;
        if (change <= opt.relative_tolerance * std::abs(ll)) {
            ++it;
            break;
        }
    }
    m.log_likelihood = prev;
    m.iterations = it;
    detail::canonicalise(m);
    return m;
}

/// Responsibilities P(u | x) for every component; they sum to one.
inline std::vector<double> posterior(const GmmModel& m, double x) {
    const std::size_t M = m.components();
    std::vector<double> r(M);
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t u = 0; u < M; ++u) {
        r[u] = std::log(m.weights[u]) + detail::log_normal(x, m.means[u], m.variances[u]);
        peak = std::max(peak, r[u]);
    }
    double sum = 0.0;
    for (double& v : r) {
        v = std::exp(v - peak);
        sum += v;
    }
    for (double& v : r) v /= sum;
    return r;
}

/// -2 ln L + (3M - 1) ln n; lower is better.
inline double bic(const GmmModel& m, std::size_t n) {
    if (n < 1) throw Error("invalid sample count");
    const double params = 3.0 * static_cast<double>(m.components()) - 1.0;
    return -2.0 * m.log_likelihood + params * std::log(static_cast<double>(n));
}

inline double bic(double log_likelihood, int M, double n) {
    return -2.0 * log_likelihood + (3.0 * M - 1.0) * std::log(n);
}

/// Hard clustering of an ROI-restricted scalar field.
struct ClusterMap {
    Dims dims;
    std::vector<std::size_t> voxels;    // ROI linear indices, same order as labels
    std::vector<int> labels;            // in [0, clusters)
    std::vector<double> cluster_means;  // g per cluster
    std::vector<std::size_t> member_counts;
    std::vector<std::pair<int, double>> bic_table;  // (M, BIC) for every candidate
    int selected_components = 0;                    // M chosen by BIC before empty clusters are dropped
    std::uint64_t seed = 0;

    std::size_t clusters() const { return cluster_means.size(); }
};

/// Assigns labels by argmax posterior (ties to the lower component), drops
/// empty components, and computes per-cluster means.
inline ClusterMap assign_clusters(const GmmModel& model, const Dims& dims, std::span<const std::size_t> voxels,
                                  std::span<const double> values) {
    const std::size_t M = model.components();
    std::vector<int> raw(values.size());
    std::vector<std::size_t> counts(M, 0);
    for (std::size_t k = 0; k < values.size(); ++k) {
        const auto r = posterior(model, values[k]);
        std::size_t best = 0;
        for (std::size_t u = 1; u < M; ++u)
            if (r[u] > r[best]) best = u;
        raw[k] = static_cast<int>(best);
        ++counts[best];
    }
    std::vector<int> relabel(M, -1);
    int next = 0;
    for (std::size_t u = 0; u < M; ++u)
        if (counts[u] > 0) relabel[u] = next++;

    ClusterMap cm;
    cm.dims = dims;
    cm.voxels.assign(voxels.begin(), voxels.end());
    cm.labels.resize(values.size());
    cm.cluster_means.assign(static_cast<std::size_t>(next), 0.0);
    cm.member_counts.assign(static_cast<std::size_t>(next), 0);
    for (std::size_t k = 0; k < values.size(); ++k) {
        const int l = relabel[static_cast<std::size_t>(raw[k])];
        cm.labels[k] = l;
        cm.cluster_means[static_cast<std::size_t>(l)] += values[k];
        ++cm.member_counts[static_cast<std::size_t>(l)];
    }
    for (std::size_t c = 0; c < cm.cluster_means.size(); ++c)
        cm.cluster_means[c] /= static_cast<double>(cm.member_counts[c]);
    cm.selected_components = static_cast<int>(M);
    cm.seed = model.seed;
    return cm;
}

/// Fits M = 1..u_max (capped by the sample count) and keeps the BIC minimiser
/// (the smaller M on exact ties).
inline ClusterMap cluster_values(const Dims& dims, std::span<const std::size_t> voxels, std::span<const double> values,
                                 int u_max, std::uint64_t seed) {
    if (values.empty()) throw Error("empty ROI");
    if (u_max < 1) throw Error("invalid u_max", std::to_string(u_max));
    const int top = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(u_max), values.size()));
    std::vector<std::pair<int, double>> table;
    GmmModel best;
    double best_bic = std::numeric_limits<double>::infinity();
    for (int M = 1; M <= top; ++M) {
        GmmModel m = fit_gmm(values, M, derive_seed(seed, static_cast<std::uint64_t>(M)));
        const double b = bic(m, values.size());
        table.emplace_back(M, b);
        if (b < best_bic) {
            best_bic = b;
            best = std::move(m);
        }
    }
    ClusterMap cm = assign_clusters(best, dims, voxels, values);
    cm.bic_table = std::move(table);
    cm.seed = seed;
    return cm;
}

inline ClusterMap cluster_feature_map(const FeatureMap& map, int u_max, std::uint64_t seed) {
    return cluster_values(map.dims, map.voxels, map.values, u_max, seed);
}

/// Rebuilds a cluster map from stored labels (one per ROI voxel, in
/// [0, clusters), every label used).
inline ClusterMap cluster_map_from_labels(const Dims& dims, std::span<const std::size_t> voxels,
                                          std::span<const int> labels, std::span<const double> values) {
    if (labels.size() != voxels.size() || values.size() != voxels.size()) throw Error("map/cluster size mismatch");
    if (labels.empty()) throw Error("empty ROI");
    const int top = *std::max_element(labels.begin(), labels.end());
    if (*std::min_element(labels.begin(), labels.end()) < 0) throw Error("invalid label volume", "negative label inside the ROI");
    ClusterMap cm;
    cm.dims = dims;
    cm.voxels.assign(voxels.begin(), voxels.end());
    cm.labels.assign(labels.begin(), labels.end());
    cm.cluster_means.assign(static_cast<std::size_t>(top) + 1, 0.0);
    cm.member_counts.assign(static_cast<std::size_t>(top) + 1, 0);
    for (std::size_t k = 0; k < labels.size(); ++k) {
        cm.cluster_means[static_cast<std::size_t>(labels[k])] += values[k];
        ++cm.member_counts[static_cast<std::size_t>(labels[k])];
    }
    for (std::size_t c = 0; c < cm.cluster_means.size(); ++c) {
        if (cm.member_counts[c] == 0) throw Error("invalid label volume", "label " + std::to_string(c) + " is unused");
        cm.cluster_means[c] /= static_cast<double>(cm.member_counts[c]);
    }
    cm.selected_components = top + 1;
    return cm;
}

}  // namespace grrail
