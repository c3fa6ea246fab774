// Synthetic lesion phantoms: an ellipsoidal ROI filled either with one
// smoothed Gaussian texture (homogeneous) or with k Voronoi sub-regions that
// each carry their own texture statistics (heterogeneous).
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "grrail/common.hpp"
#include "grrail/volume.hpp"

namespace grrail {

enum class PhantomClass { homogeneous = 0, heterogeneous = 1 };

inline const char* to_string(PhantomClass c) { return c == PhantomClass::homogeneous ? "homogeneous" : "heterogeneous"; }

struct RegionTexture {
    double mean = 100.0;
    double stddev = 10.0;
    double smoothing = 1.0;  // Gaussian sigma in voxels; 0 = white texture
};

struct PhantomSpec {
    Dims dims{48, 48, 48};
    std::array<double, 3> semi_axes{20.0, 20.0, 20.0};  // voxels
    PhantomClass cls = PhantomClass::homogeneous;
    std::vector<RegionTexture> regions{RegionTexture{}};
    double noise = 0.0;
    double background = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        const std::size_t k = regions.size();
        if (k < 1 || k > 5) throw Error("invalid phantom", "sub-region count must lie in [1, 5]");
        if (cls == PhantomClass::homogeneous && k != 1) throw Error("invalid phantom", "homogeneous phantoms have one region");
        if (cls == PhantomClass::heterogeneous && k < 3) throw Error("invalid phantom", "heterogeneous phantoms need k >= 3");
        if (noise < 0.0) throw Error("invalid phantom", "negative noise");
        double pooled = 0.0;
        for (const auto& r : regions) {
            if (r.stddev < 0.0 || r.smoothing < 0.0) throw Error("invalid phantom", "negative texture parameter");
            pooled += r.stddev * r.stddev;
        }
        pooled = std::sqrt(pooled / static_cast<double>(k));
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = a + 1; b < k; ++b)
                if (std::abs(regions[a].mean - regions[b].mean) < 3.0 * pooled)
                    throw Error("invalid phantom", "region means closer than 3 pooled standard deviations");
    }
};

struct Phantom {
    VoxelGrid volume;
    RoiMask mask;
    int label = 0;
    std::vector<int> region;  // per voxel, -1 outside the ROI
};

namespace detail {

/// Separable Gaussian blur with edge clamping.
inline std::vector<double> gaussian_blur(const std::vector<double>& in, const Dims& dims, double sigma) {
    if (sigma <= 0.0) return in;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += kernel[static_cast<std::size_t>(i + radius)];
    }
    for (double& k : kernel) k /= sum;
    std::vector<double> a = in, b(in.size());
    const std::array<std::size_t, 3> extent{dims.nx, dims.ny, dims.nz};
    for (int axis = 0; axis < 3; ++axis) {
        for (std::size_t z = 0; z < dims.nz; ++z)
            for (std::size_t y = 0; y < dims.ny; ++y)
                for (std::size_t x = 0; x < dims.nx; ++x) {
                    std::array<std::size_t, 3> c{x, y, z};
                    double acc = 0.0;
                    for (int i = -radius; i <= radius; ++i) {
                        auto cc = c;
                        const long p = std::clamp<long>(static_cast<long>(c[axis]) + i, 0, static_cast<long>(extent[axis]) - 1);
                        cc[axis] = static_cast<std::size_t>(p);
                        acc += kernel[static_cast<std::size_t>(i + radius)] * a[dims.index(cc[0], cc[1], cc[2])];
                    }
                    b[dims.index(x, y, z)] = acc;
                }
        std::swap(a, b);
    }
    return a;
}

inline std::array<double, 3> centre_of(const Dims& d) {
    return {0.5 * (static_cast<double>(d.nx) - 1), 0.5 * (static_cast<double>(d.ny) - 1), 0.5 * (static_cast<double>(d.nz) - 1)};
}

inline RoiMask ellipsoid(const Dims& dims, const std::array<double, 3>& axes) {
    RoiMask m{dims, std::vector<std::uint8_t>(dims.count(), 0)};
    const auto c = centre_of(dims);
    for (std::size_t z = 0; z < dims.nz; ++z)
        for (std::size_t y = 0; y < dims.ny; ++y)
            for (std::size_t x = 0; x < dims.nx; ++x) {
                const double dx = (static_cast<double>(x) - c[0]) / axes[0];
                const double dy = (static_cast<double>(y) - c[1]) / axes[1];
                const double dz = (static_cast<double>(z) - c[2]) / axes[2];
                if (dx * dx + dy * dy + dz * dz <= 1.0) m.flags[dims.index(x, y, z)] = 1;
            }
    return m;
}

}  // namespace detail

inline Phantom generate_phantom(const PhantomSpec& spec) {
    spec.validate();
    const std::size_t k = spec.regions.size();
    for (double a : spec.semi_axes)
        if (a < 2.0) throw Error("semi-axes too small", "every semi-axis must be at least 2 voxels");
    Phantom ph;
    ph.label = static_cast<int>(spec.cls);
    ph.mask = detail::ellipsoid(spec.dims, spec.semi_axes);
    const auto roi = ph.mask.voxels();
    if (roi.size() < 27 * k) throw Error("semi-axes too small", "ellipsoid cannot host " + std::to_string(k) + " regions");

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Voronoi partition: seeds drawn from ROI voxels, kept apart when possible.
    ph.region.assign(spec.dims.count(), -1);
    std::vector<std::array<double, 3>> seeds;
    const double min_axis = *std::min_element(spec.semi_axes.begin(), spec.semi_axes.end());
    std::uniform_int_distribution<std::size_t> pick(0, roi.size() - 1);
    for (int attempt = 0; seeds.size() < k; ++attempt) {
        const auto c = spec.dims.coords(roi[pick(rng)]);
        const std::array<double, 3> p{static_cast<double>(c[0]), static_cast<double>(c[1]), static_cast<double>(c[2])};
        const double needed = attempt < 2000 ? 0.8 * min_axis : 0.0;
        bool ok = true;
        for (const auto& s : seeds) {
            const double d = std::hypot(p[0] - s[0], p[1] - s[1], p[2] - s[2]);
            if (d < needed || d == 0.0) ok = false;
        }
        if (ok) seeds.push_back(p);
    }
    for (std::size_t v : roi) {
        const auto c = spec.dims.coords(v);
        int best = 0;
        double best_d = 1e300;
        for (std::size_t s = 0; s < k; ++s) {
            const double d = std::hypot(c[0] - seeds[s][0], c[1] - seeds[s][1], c[2] - seeds[s][2]);
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(s);
            }
        }
        ph.region[v] = best;
    }

    ph.volume = VoxelGrid{spec.dims, {1, 1, 1}, std::vector<double>(spec.dims.count(), spec.background)};
    for (std::size_t r = 0; r < k; ++r) {
        const auto& tex = spec.regions[r];
        std::vector<double> field(spec.dims.count());
        for (double& f : field) f = gauss(rng);
        field = detail::gaussian_blur(field, spec.dims, tex.smoothing);
        double mean = 0.0, sq = 0.0, n = 0.0;
        for (std::size_t v : roi)
            if (ph.region[v] == static_cast<int>(r)) {
                mean += field[v];
                n += 1.0;
            }
        mean /= n;
        for (std::size_t v : roi)
            if (ph.region[v] == static_cast<int>(r)) sq += (field[v] - mean) * (field[v] - mean);
        const double sd = std::sqrt(sq / n);
        for (std::size_t v : roi) {
            if (ph.region[v] != static_cast<int>(r)) continue;
            const double unit = sd > 0.0 ? (field[v] - mean) / sd : 0.0;
            ph.volume.values[v] = tex.mean + tex.stddev * unit;
        }
    }
    if (spec.noise > 0.0)
        for (std::size_t v : roi) ph.volume.values[v] += spec.noise * gauss(rng);
    return ph;
}

struct CohortOptions {
    Dims dims{48, 48, 48};
    double noise = 2.0;
};

/// Randomised spec for cohort member `index` of class `cls`; everything is
/// derived from (master seed, index).
inline PhantomSpec cohort_member_spec(std::uint64_t master_seed, std::size_t index, PhantomClass cls,
                                      const CohortOptions& opt = {}) {
    std::mt19937_64 rng(derive_seed(master_seed, static_cast<std::uint64_t>(index)));
    auto uniform = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    PhantomSpec s;
    s.dims = opt.dims;
    s.cls = cls;
    s.noise = opt.noise;
    s.seed = derive_seed(master_seed, "phantom-" + std::to_string(index));
    const double max_axis = 0.5 * static_cast<double>(std::min({opt.dims.nx, opt.dims.ny, opt.dims.nz})) - 2.0;
    for (double& a : s.semi_axes) a = uniform(0.7, 0.95) * max_axis;
    if (cls == PhantomClass::homogeneous) {
        s.regions = {RegionTexture{uniform(90, 110), uniform(8, 12), uniform(0.8, 1.5)}};
    } else {
        const int k = std::uniform_int_distribution<int>(3, 5)(rng);
        double level = uniform(40, 60);
        s.regions.clear();
        for (int r = 0; r < k; ++r) {
            s.regions.push_back({level, uniform(4, 8), uniform(0.8, 1.5)});
            level += uniform(5.5, 7.0) * 8.0;
        }
        std::shuffle(s.regions.begin(), s.regions.end(), rng);
    }
    return s;
}

}  // namespace grrail
