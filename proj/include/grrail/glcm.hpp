// Voxel-wise Haralick texture maps from gray-level co-occurrence matrices
// collected in a 3x3x3 window.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "grrail/common.hpp"
#include "grrail/volume.hpp"

namespace grrail {

/// The 13 texture features, in canonical map order.
enum class Feature : int {
    energy,
    entropy,
    contrast,
    correlation,
    homogeneity,
    sum_average,
    sum_variance,
    sum_entropy,
    difference_entropy,
    difference_average,
    difference_variance,
    icm1,
    icm2,
};

inline constexpr std::size_t kFeatureCount = 13;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{
    "energy",          "entropy",           "contrast",           "correlation",         "homogeneity",
    "sum_average",     "sum_variance",      "sum_entropy",        "difference_entropy",  "difference_average",
    "difference_variance", "icm1",          "icm2",
};

inline std::string_view feature_name(Feature f) { return kFeatureNames[static_cast<std::size_t>(f)]; }

inline Feature parse_feature(std::string_view name) {
    for (std::size_t i = 0; i < kFeatureCount; ++i)
        if (kFeatureNames[i] == name) return static_cast<Feature>(i);
    throw Error("unknown feature", std::string(name));
}

using HaralickVector = std::array<double, kFeatureCount>;

struct QuantizedRoi {
    static constexpr std::int16_t kOutside = -1;

    Dims dims;
    int bins = 0;
    std::vector<std::int16_t> levels;   // per voxel; kOutside outside the ROI
    std::vector<std::size_t> voxels;    // ROI linear indices, ascending
    double value_min = 0.0, value_max = 0.0;
};

/// Equal-width binning of [min, max] over the ROI. The maximum lands in the
/// top bin; a constant ROI maps to level 0.
inline QuantizedRoi quantize_roi(const VoxelGrid& grid, const RoiMask& mask, int bins) {
    if (bins < 2 || bins > 4096) throw Error("invalid bin count", std::to_string(bins));
    validate_pair(grid, mask);
    QuantizedRoi q;
    q.dims = grid.dims;
    q.bins = bins;
    q.voxels = mask.voxels();
    q.levels.assign(grid.dims.count(), QuantizedRoi::kOutside);
    double lo = grid.values[q.voxels.front()], hi = lo;
    for (std::size_t v : q.voxels) {
        lo = std::min(lo, grid.values[v]);
        hi = std::max(hi, grid.values[v]);
    }
    q.value_min = lo;
    q.value_max = hi;
    const double range = hi - lo;
    for (std::size_t v : q.voxels) {
        int level = 0;
        if (range > 0.0) {
            const double t = (grid.values[v] - lo) / range * static_cast<double>(bins);
            level = std::min(bins - 1, static_cast<int>(std::floor(t)));
        }
        q.levels[v] = static_cast<std::int16_t>(level);
    }
    return q;
}

/// Dense bins x bins joint distribution, row-major.
struct CoocMatrix {
    int bins = 0;
    std::vector<double> p;

    CoocMatrix() = default;
    explicit CoocMatrix(int b) : bins(b), p(static_cast<std::size_t>(b) * static_cast<std::size_t>(b), 0.0) {}
    double& at(int i, int j) { return p[static_cast<std::size_t>(i) * static_cast<std::size_t>(bins) + static_cast<std::size_t>(j)]; }
    double at(int i, int j) const { return p[static_cast<std::size_t>(i) * static_cast<std::size_t>(bins) + static_cast<std::size_t>(j)]; }
};

struct CoocEntry {
    int i = 0, j = 0;
    double p = 0.0;
};

namespace detail {

/// Visits every ordered co-occurrence (a, b) in the window around `center`:
/// both voxels inside the cropped 3x3x3 window and inside the ROI, along the
/// 13 half-neighbourhood offsets, emitted in both orientations.
template <class Visit>
void visit_window_pairs(const QuantizedRoi& q, std::size_t center, Visit&& visit) {
    const auto [cx, cy, cz] = q.dims.coords(center);
    const long x0 = static_cast<long>(cx) - 1, y0 = static_cast<long>(cy) - 1, z0 = static_cast<long>(cz) - 1;
    auto in_window = [&](long x, long y, long z) {
        return x >= x0 && x <= x0 + 2 && y >= y0 && y <= y0 + 2 && z >= z0 && z <= z0 + 2 && q.dims.contains(x, y, z);
    };
    for (long z = z0; z <= z0 + 2; ++z)
        for (long y = y0; y <= y0 + 2; ++y)
            for (long x = x0; x <= x0 + 2; ++x) {
                if (!q.dims.contains(x, y, z)) continue;
                const auto la = q.levels[q.dims.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y), static_cast<std::size_t>(z))];
                if (la == QuantizedRoi::kOutside) continue;
                for (const auto& d : kHalfNeighbourhood) {
                    const long bx = x + d[0], by = y + d[1], bz = z + d[2];
                    if (!in_window(bx, by, bz)) continue;
                    const auto lb = q.levels[q.dims.index(static_cast<std::size_t>(bx), static_cast<std::size_t>(by), static_cast<std::size_t>(bz))];
                    if (lb == QuantizedRoi::kOutside) continue;
                    visit(la, lb);
                    visit(lb, la);
                }
            }
}

inline double plogp(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

}  // namespace detail

/// Normalised symmetric co-occurrence matrix of the window around an ROI
/// voxel. A window with no in-ROI pair yields the delta matrix at the
/// centre's level.
inline CoocMatrix window_cooc(const QuantizedRoi& q, std::size_t center) {
    if (center >= q.levels.size() || q.levels[center] == QuantizedRoi::kOutside) throw Error("center outside ROI");
    CoocMatrix m(q.bins);
    std::vector<std::uint32_t> counts(m.p.size(), 0);
    std::uint64_t total = 0;
    detail::visit_window_pairs(q, center, [&](int a, int b) {
        ++counts[static_cast<std::size_t>(a) * static_cast<std::size_t>(q.bins) + static_cast<std::size_t>(b)];
        ++total;
    });
    if (total == 0) {
        m.at(q.levels[center], q.levels[center]) = 1.0;
        return m;
    }
    for (std::size_t k = 0; k < counts.size(); ++k)
        if (counts[k]) m.p[k] = static_cast<double>(counts[k]) / static_cast<double>(total);
    return m;
}

/// Scratch buffers for repeated feature evaluation.
struct HaralickWorkspace {
    std::vector<double> px, py, psum, pdiff;
    void reset(int bins) {
        const auto b = static_cast<std::size_t>(bins);
        px.assign(b, 0.0);
        py.assign(b, 0.0);
        psum.assign(2 * b - 1, 0.0);
        pdiff.assign(b, 0.0);
    }
};

/// Haralick features over the non-zero cells of a normalised matrix, given
/// in row-major order. Logs are base 2 with 0*log 0 = 0.
inline HaralickVector haralick_from_entries(std::span<const CoocEntry> cells, int bins, HaralickWorkspace& ws) {
    ws.reset(bins);
    double energy = 0, entropy = 0, contrast = 0, homogeneity = 0;
    for (const auto& c : cells) {
        const double d = static_cast<double>(c.i - c.j);
        energy += c.p * c.p;
        entropy -= detail::plogp(c.p);
        contrast += d * d * c.p;
        homogeneity += c.p / (1.0 + d * d);
        ws.px[static_cast<std::size_t>(c.i)] += c.p;
        ws.py[static_cast<std::size_t>(c.j)] += c.p;
        ws.psum[static_cast<std::size_t>(c.i + c.j)] += c.p;
        ws.pdiff[static_cast<std::size_t>(std::abs(c.i - c.j))] += c.p;
    }

    double mux = 0, muy = 0;
    for (int i = 0; i < bins; ++i) {
        mux += i * ws.px[static_cast<std::size_t>(i)];
        muy += i * ws.py[static_cast<std::size_t>(i)];
    }
    double varx = 0, vary = 0, hx = 0, hy = 0;
    for (int i = 0; i < bins; ++i) {
        const double a = ws.px[static_cast<std::size_t>(i)], b = ws.py[static_cast<std::size_t>(i)];
        varx += (i - mux) * (i - mux) * a;
        vary += (i - muy) * (i - muy) * b;
        hx -= detail::plogp(a);
        hy -= detail::plogp(b);
    }
    double cov = 0, hxy1 = 0;
    for (const auto& c : cells) {
        cov += (c.i - mux) * (c.j - muy) * c.p;
        hxy1 -= c.p * std::log2(ws.px[static_cast<std::size_t>(c.i)] * ws.py[static_cast<std::size_t>(c.j)]);
    }
    const double sd = std::sqrt(varx * vary);
    const double correlation = sd > 1e-12 ? cov / sd : 0.0;

    double hxy2 = 0;
    for (int i = 0; i < bins; ++i) {
        const double a = ws.px[static_cast<std::size_t>(i)];
        if (a <= 0.0) continue;
        for (int j = 0; j < bins; ++j) {
            const double b = ws.py[static_cast<std::size_t>(j)];
            if (b > 0.0) hxy2 -= detail::plogp(a * b);
        }
    }

    double sum_avg = 0, sum_ent = 0;
    for (std::size_t k = 0; k < ws.psum.size(); ++k) {
        sum_avg += static_cast<double>(k) * ws.psum[k];
        sum_ent -= detail::plogp(ws.psum[k]);
    }
    double sum_var = 0;
    for (std::size_t k = 0; k < ws.psum.size(); ++k) sum_var += (k - sum_avg) * (k - sum_avg) * ws.psum[k];

    double diff_avg = 0, diff_ent = 0;
    for (std::size_t k = 0; k < ws.pdiff.size(); ++k) {
        diff_avg += static_cast<double>(k) * ws.pdiff[k];
        diff_ent -= detail::plogp(ws.pdiff[k]);
    }
    double diff_var = 0;
    for (std::size_t k = 0; k < ws.pdiff.size(); ++k) diff_var += (k - diff_avg) * (k - diff_avg) * ws.pdiff[k];

    const double hxy = entropy;
    const double hmax = std::max(hx, hy);
    const double icm1 = hmax > 0.0 ? (hxy - hxy1) / hmax : 0.0;
    const double icm2 = std::sqrt(std::max(0.0, 1.0 - std::exp(-2.0 * (hxy2 - hxy))));

    return {energy, entropy, contrast, correlation, homogeneity, sum_avg, sum_var,
            sum_ent, diff_ent, diff_avg, diff_var, icm1, icm2};
}

inline HaralickVector haralick13(const CoocMatrix& m) {
    std::vector<CoocEntry> cells;
    for (int i = 0; i < m.bins; ++i)
        for (int j = 0; j < m.bins; ++j)
            if (m.at(i, j) > 0.0) cells.push_back({i, j, m.at(i, j)});
    HaralickWorkspace ws;
    return haralick_from_entries(cells, m.bins, ws);
}

/// One feature over the ROI: values[k] belongs to voxel voxels[k].
struct FeatureMap {
    Feature feature = Feature::energy;
    Dims dims;
    std::vector<std::size_t> voxels;
    std::vector<double> values;
    int bins = 0;
    int window = 3;

    std::string_view name() const { return feature_name(feature); }

    /// Dense grid with `fill` outside the ROI.
    VoxelGrid to_grid(const Spacing& spacing = {1, 1, 1}, double fill = 0.0) const {
        VoxelGrid g{dims, spacing, std::vector<double>(dims.count(), fill)};
        for (std::size_t k = 0; k < voxels.size(); ++k) g.values[voxels[k]] = values[k];
        return g;
    }
};

using FeatureMaps = std::array<FeatureMap, kFeatureCount>;

/// All 13 maps for the ROI. Each voxel's features depend only on its own
/// window, so the result is identical for any thread count.
inline FeatureMaps extract_feature_maps(const VoxelGrid& grid, const RoiMask& mask, int bins, unsigned threads = 1) {
    const QuantizedRoi q = quantize_roi(grid, mask, bins);
    const std::size_t n = q.voxels.size();
    FeatureMaps maps;
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        maps[f].feature = static_cast<Feature>(f);
        maps[f].dims = grid.dims;
        maps[f].voxels = q.voxels;
        maps[f].values.assign(n, 0.0);
        maps[f].bins = bins;
    }
    const auto b = static_cast<std::size_t>(bins);
    parallel_chunks(n, threads, 512, [&](std::size_t begin, std::size_t end) {
        HaralickWorkspace ws;
        std::vector<std::uint32_t> counts(b * b, 0);
        std::vector<std::uint32_t> touched;
        std::vector<CoocEntry> cells;
        for (std::size_t k = begin; k < end; ++k) {
            const std::size_t center = q.voxels[k];
            touched.clear();
            std::uint64_t total = 0;
            detail::visit_window_pairs(q, center, [&](int a, int c) {
                const auto cell = static_cast<std::uint32_t>(static_cast<std::size_t>(a) * b + static_cast<std::size_t>(c));
                if (counts[cell]++ == 0) touched.push_back(cell);
                ++total;
            });
            cells.clear();
            if (total == 0) {
                const int l = q.levels[center];
                cells.push_back({l, l, 1.0});
            } else {
                std::sort(touched.begin(), touched.end());
                for (auto cell : touched) {
                    cells.push_back({static_cast<int>(cell / b), static_cast<int>(cell % b),
                                     static_cast<double>(counts[cell]) / static_cast<double>(total)});
                    counts[cell] = 0;
                }
            }
            const HaralickVector h = haralick_from_entries(cells, bins, ws);
            for (std::size_t f = 0; f < kFeatureCount; ++f) maps[f].values[k] = h[f];
        }
    });
    return maps;
}

}  // namespace grrail
