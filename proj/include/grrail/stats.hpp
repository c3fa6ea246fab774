// Rank statistics and significance tests used by the evaluation harness.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "grrail/common.hpp"

namespace grrail {

/// Two-sided tail probability of a standard normal deviate.
inline double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

/// 1-based ranks with ties sharing their mid-rank.
inline std::vector<double> midranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> rank(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) rank[order[k]] = r;
        i = j;
    }
    return rank;
}

/// P(score+ > score-) + 1/2 P(score+ == score-).
inline double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw Error("size mismatch", "scores vs labels");
    const auto ranks = midranks(scores);
    double pos = 0, neg = 0, rank_sum = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1) {
            ++pos;
            rank_sum += ranks[i];
        } else {
            ++neg;
        }
    }
    if (pos == 0 || neg == 0) throw Error("single class", "AUC needs both classes");
    return (rank_sum - pos * (pos + 1) / 2) / (pos * neg);
}

struct MannWhitney {
    double u = 0.0;  // statistic of the first sample
    double z = 0.0;
    double p = 1.0;  // two-sided
};

/// Rank-sum test; normal approximation with tie and continuity corrections.
inline MannWhitney mann_whitney_u(std::span<const double> x, std::span<const double> y) {
    if (x.empty() || y.empty()) throw Error("empty sample");
    std::vector<double> pooled(x.begin(), x.end());
    pooled.insert(pooled.end(), y.begin(), y.end());
    const auto ranks = midranks(pooled);
    const double n1 = static_cast<double>(x.size()), n2 = static_cast<double>(y.size()), n = n1 + n2;
    double r1 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) r1 += ranks[i];
    MannWhitney out;
    out.u = r1 - n1 * (n1 + 1) / 2;

    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        i = j;
    }
    const double var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)));
    if (!(var > 0.0)) return out;
    const double dev = std::max(0.0, std::abs(out.u - n1 * n2 / 2) - 0.5);
    out.z = dev / std::sqrt(var) * (out.u < n1 * n2 / 2 ? -1.0 : 1.0);
    out.p = normal_two_sided_p(out.z);
    return out;
}

struct ZTest {
    double z = 0.0;
    double p = 1.0;
    bool degenerate = false;  // pooled proportion was 0 or 1
};

/// Pooled two-proportion z-test on accuracies acc1 (of n1) and acc2 (of n2).
inline ZTest two_proportion_z(double acc1, std::size_t n1, double acc2, std::size_t n2) {
    if (n1 < 1 || n2 < 1) throw Error("invalid sample size");
    if (acc1 < 0 || acc1 > 1 || acc2 < 0 || acc2 > 1) throw Error("invalid accuracy", "accuracies must lie in [0, 1]");
    const double a = static_cast<double>(n1), b = static_cast<double>(n2);
    const double c1 = std::round(acc1 * a), c2 = std::round(acc2 * b);
    const double pooled = (c1 + c2) / (a + b);
    ZTest out;
    if (pooled <= 0.0 || pooled >= 1.0) {
        out.degenerate = true;
        return out;
    }
    out.z = (acc1 - acc2) / std::sqrt(pooled * (1 - pooled) * (1 / a + 1 / b));
    out.p = normal_two_sided_p(out.z);
    return out;
}

}  // namespace grrail
