// Static PPM renderings: feature-map / label slices and node-edge graphs.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "grrail/graph.hpp"
#include "grrail/volume.hpp"

namespace grrail {

using Rgb = std::array<std::uint8_t, 3>;

struct Image {
    int width = 0, height = 0;
    std::vector<std::uint8_t> rgb;

    Image(int w, int h, Rgb fill = {0, 0, 0}) : width(w), height(h), rgb(static_cast<std::size_t>(w * h) * 3) {
        for (std::size_t i = 0; i < rgb.size(); i += 3) std::copy(fill.begin(), fill.end(), rgb.begin() + static_cast<long>(i));
    }
    void set(int x, int y, Rgb c) {
        if (x < 0 || y < 0 || x >= width || y >= height) return;
        const auto i = static_cast<std::size_t>(y * width + x) * 3;
        rgb[i] = c[0];
        rgb[i + 1] = c[1];
        rgb[i + 2] = c[2];
    }
    Rgb get(int x, int y) const {
        const auto i = static_cast<std::size_t>(y * width + x) * 3;
        return {rgb[i], rgb[i + 1], rgb[i + 2]};
    }
};

inline void write_ppm(const std::filesystem::path& path, const Image& img) {
    std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(img.rgb.data()), img.rgb.size());
    detail::write_file(path, out);
}

/// Blue-green-yellow ramp for t in [0, 1].
inline Rgb colormap(double t) {
    static constexpr std::array<std::array<double, 3>, 5> stops{{
        {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37},
    }};
    t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0) * (stops.size() - 1);
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(t), stops.size() - 2);
    const double f = t - static_cast<double>(i);
    Rgb c;
    for (int k = 0; k < 3; ++k) c[k] = static_cast<std::uint8_t>(std::lround(stops[i][k] + f * (stops[i + 1][k] - stops[i][k])));
    return c;
}

inline Rgb category_colour(int label) {
    static constexpr std::array<Rgb, 12> palette{{
        {230, 25, 75}, {60, 180, 75}, {255, 225, 25}, {0, 130, 200}, {245, 130, 48}, {145, 30, 180},
        {70, 240, 240}, {240, 50, 230}, {210, 245, 60}, {250, 190, 190}, {0, 128, 128}, {170, 110, 40},
    }};
    return palette[static_cast<std::size_t>(label) % palette.size()];
}

/// Axial slice z (default: middle) scaled by `zoom`. ROI voxels use the
/// colour ramp over the ROI range (or the label palette when `categorical`);
/// voxels outside are grey; the ROI outline is drawn in white.
inline Image render_slice(const VoxelGrid& grid, const RoiMask& mask, long z = -1, int zoom = 4, bool categorical = false) {
    validate_pair(grid, mask);
    const auto& d = grid.dims;
    if (z < 0) z = static_cast<long>(d.nz / 2);
    if (static_cast<std::size_t>(z) >= d.nz) throw Error("slice out of range", std::to_string(z));
    const auto zz = static_cast<std::size_t>(z);
    double lo = 0, hi = 0, glo = 0, ghi = 0;
    bool first = true;
    for (std::size_t i = 0; i < grid.values.size(); ++i) {
        const double v = grid.values[i];
        if (i == 0) glo = ghi = v;
        glo = std::min(glo, v);
        ghi = std::max(ghi, v);
        if (!mask.flags[i]) continue;
        if (first) lo = hi = v;
        first = false;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    Image img(static_cast<int>(d.nx) * zoom, static_cast<int>(d.ny) * zoom);
    auto inside = [&](long x, long y) {
        return d.contains(x, y, z) && mask.flags[d.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y), zz)];
    };
    for (std::size_t y = 0; y < d.ny; ++y)
        for (std::size_t x = 0; x < d.nx; ++x) {
            const std::size_t i = d.index(x, y, zz);
            const double v = grid.values[i];
            Rgb c;
            if (mask.flags[i]) {
                c = categorical ? category_colour(static_cast<int>(std::lround(v))) : colormap(hi > lo ? (v - lo) / (hi - lo) : 0.5);
            } else {
                const auto g = static_cast<std::uint8_t>(std::lround(ghi > glo ? 40 + 80 * (v - glo) / (ghi - glo) : 40));
                c = {g, g, g};
            }
            const long lx = static_cast<long>(x), ly = static_cast<long>(y);
            const bool edge = mask.flags[i] && (!inside(lx - 1, ly) || !inside(lx + 1, ly) || !inside(lx, ly - 1) || !inside(lx, ly + 1));
            for (int a = 0; a < zoom; ++a)
                for (int b = 0; b < zoom; ++b) {
                    const bool border = a == 0 || b == 0 || a == zoom - 1 || b == zoom - 1;
                    img.set(static_cast<int>(x) * zoom + a, static_cast<int>(y) * zoom + b,
                            edge && border ? Rgb{255, 255, 255} : c);
                }
        }
    return img;
}

namespace detail {

inline void draw_line(Image& img, double x0, double y0, double x1, double y1, double thickness, Rgb c) {
    const double len = std::hypot(x1 - x0, y1 - y0);
    const int steps = std::max(1, static_cast<int>(std::ceil(len * 2)));
    const int r = std::max(0, static_cast<int>(std::floor(thickness / 2)));
    for (int s = 0; s <= steps; ++s) {
        const double t = static_cast<double>(s) / steps;
        const int px = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
        const int py = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
        for (int a = -r; a <= r; ++a)
            for (int b = -r; b <= r; ++b) img.set(px + a, py + b, c);
    }
}

inline void fill_disc(Image& img, double cx, double cy, double radius, Rgb fill, Rgb ring) {
    const int r = static_cast<int>(std::ceil(radius));
    for (int a = -r; a <= r; ++a)
        for (int b = -r; b <= r; ++b) {
            const double d = std::hypot(a, b);
            if (d > radius) continue;
            img.set(static_cast<int>(std::lround(cx)) + a, static_cast<int>(std::lround(cy)) + b, d > radius - 1.5 ? ring : fill);
        }
}

}  // namespace detail

/// Node-edge drawing with nodes at their centroids projected on the x-y
/// plane. Node area follows the member count, node colour the cluster mean,
/// edge thickness the inverse of the weight.
inline Image render_graph(const ClusterGraph& g, int size = 512) {
    Image img(size, size, {255, 255, 255});
    if (g.nodes.empty()) return img;
    double xlo = g.nodes[0].centroid[0], xhi = xlo, ylo = g.nodes[0].centroid[1], yhi = ylo;
    double mlo = g.nodes[0].mean_value, mhi = mlo;
    std::size_t most = 1;
    for (const auto& n : g.nodes) {
        xlo = std::min(xlo, n.centroid[0]);
        xhi = std::max(xhi, n.centroid[0]);
        ylo = std::min(ylo, n.centroid[1]);
        yhi = std::max(yhi, n.centroid[1]);
        mlo = std::min(mlo, n.mean_value);
        mhi = std::max(mhi, n.mean_value);
        most = std::max(most, n.members);
    }
    const double margin = 0.15 * size;
    const double span = std::max({xhi - xlo, yhi - ylo, 1e-9});
    auto px = [&](const Centroid& c) {
        const double sx = (c[0] - 0.5 * (xlo + xhi)) / span, sy = (c[1] - 0.5 * (ylo + yhi)) / span;
        return std::array<double, 2>{0.5 * size + sx * (size - 2 * margin), 0.5 * size + sy * (size - 2 * margin)};
    };
    double wmax = 0.0;
    for (const auto& e : g.edges) wmax = std::max(wmax, e.weight);
    for (const auto& e : g.edges) {
        const auto a = px(g.nodes[e.i].centroid), b = px(g.nodes[e.j].centroid);
        const double t = wmax > 0 ? 1.0 - e.weight / wmax : 1.0;
        detail::draw_line(img, a[0], a[1], b[0], b[1], 1.0 + 6.0 * t, {90, 90, 90});
    }
    for (const auto& n : g.nodes) {
        const auto p = px(n.centroid);
        const double r = 0.02 * size + 0.06 * size * std::sqrt(static_cast<double>(n.members) / static_cast<double>(most));
        detail::fill_disc(img, p[0], p[1], r, colormap(mhi > mlo ? (n.mean_value - mlo) / (mhi - mlo) : 0.5), {0, 0, 0});
    }
    return img;
}

}  // namespace grrail
