// Volumes, masks and their on-disk containers (minimal NIfTI-1 and the
// key=value raw format described in docs/formats.md), plus isotropic
// resampling.
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "grrail/common.hpp"

namespace grrail {

struct VoxelGrid {
    Dims dims;
    Spacing spacing_mm{1.0, 1.0, 1.0};
    std::vector<double> values;  // x-fastest

    double at(std::size_t x, std::size_t y, std::size_t z) const { return values[dims.index(x, y, z)]; }
};

struct RoiMask {
    Dims dims;
    std::vector<std::uint8_t> flags;  // x-fastest, 0/1

    bool inside(std::size_t idx) const { return flags[idx] != 0; }
    std::size_t count() const {
        return static_cast<std::size_t>(std::count_if(flags.begin(), flags.end(), [](auto f) { return f != 0; }));
    }
    /// Linear indices of ROI voxels in ascending order.
    std::vector<std::size_t> voxels() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < flags.size(); ++i)
            if (flags[i]) out.push_back(i);
        return out;
    }
};

enum class Interpolation { trilinear, nearest };

inline Interpolation parse_interpolation(const std::string& s) {
    if (s == "trilinear") return Interpolation::trilinear;
    if (s == "nearest") return Interpolation::nearest;
    throw Error("invalid interpolation", s);
}

inline void check_grid(const VoxelGrid& g) {
    if (g.dims.nx == 0 || g.dims.ny == 0 || g.dims.nz == 0) throw Error("invalid dims", "every dimension must be >= 1");
    for (double s : g.spacing_mm)
        if (!(s > 0.0) || !std::isfinite(s)) throw Error("invalid spacing", "spacing must be positive and finite");
    if (g.values.size() != g.dims.count()) throw Error("data length mismatch");
    for (double v : g.values)
        if (!std::isfinite(v)) throw Error("non-finite value");
}

/// Confirms the grid/mask pair is usable; returns the ROI voxel count.
inline std::size_t validate_pair(const VoxelGrid& grid, const RoiMask& mask) {
    check_grid(grid);
    if (!(mask.dims == grid.dims) || mask.flags.size() != grid.dims.count()) throw Error("dims mismatch");
    const std::size_t n = mask.count();
    if (n == 0) throw Error("empty ROI");
    return n;
}

enum class DType { u8, i16, i32, f32, f64 };

inline std::size_t dtype_size(DType t) {
    switch (t) {
        case DType::u8: return 1;
        case DType::i16: return 2;
        case DType::i32: return 4;
        case DType::f32: return 4;
        case DType::f64: return 8;
    }
    return 0;
}

inline const char* dtype_name(DType t) {
    switch (t) {
        case DType::u8: return "uint8";
        case DType::i16: return "int16";
        case DType::i32: return "int32";
        case DType::f32: return "float32";
        case DType::f64: return "float64";
    }
    return "?";
}

inline DType parse_dtype(const std::string& s) {
    if (s == "uint8") return DType::u8;
    if (s == "int16") return DType::i16;
    if (s == "int32") return DType::i32;
    if (s == "float32") return DType::f32;
    if (s == "float64") return DType::f64;
    throw Error("unsupported datatype", s);
}

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("unreadable file", path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("unwritable file", path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("unwritable file", path.string());
}

template <class T>
T load_scalar(const char* p, bool swap) {
    std::array<char, sizeof(T)> buf;
    std::memcpy(buf.data(), p, sizeof(T));
    if (swap) std::reverse(buf.begin(), buf.end());
    T v;
    std::memcpy(&v, buf.data(), sizeof(T));
    return v;
}

// `swap` is relative to host order.
inline std::vector<double> decode(const char* data, std::size_t n, DType t, bool swap) {
    std::vector<double> out(n);
    const std::size_t w = dtype_size(t);
    for (std::size_t i = 0; i < n; ++i) {
        const char* p = data + i * w;
        switch (t) {
            case DType::u8: out[i] = static_cast<unsigned char>(*p); break;
            case DType::i16: out[i] = load_scalar<std::int16_t>(p, swap); break;
            case DType::i32: out[i] = load_scalar<std::int32_t>(p, swap); break;
            case DType::f32: out[i] = load_scalar<float>(p, swap); break;
            case DType::f64: out[i] = load_scalar<double>(p, swap); break;
        }
    }
    return out;
}

template <class T>
void store_le(std::string& out, T v) {
    std::array<char, sizeof(T)> buf;
    std::memcpy(buf.data(), &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
    out.append(buf.data(), buf.size());
}

inline std::string encode_le(const std::vector<double>& values, DType t) {
    std::string out;
    out.reserve(values.size() * dtype_size(t));
    for (double v : values) {
        switch (t) {
            case DType::u8: out.push_back(static_cast<char>(static_cast<unsigned char>(v))); break;
            case DType::i16: store_le(out, static_cast<std::int16_t>(v)); break;
            case DType::i32: store_le(out, static_cast<std::int32_t>(v)); break;
            case DType::f32: store_le(out, static_cast<float>(v)); break;
            case DType::f64: store_le(out, v); break;
        }
    }
    return out;
}

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

constexpr bool host_is_little = std::endian::native == std::endian::little;

}  // namespace detail

/// Parses "key=value" lines; '#' starts a comment line.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        line = detail::trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error("malformed key=value line", line);
        out.emplace_back(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Raw format

inline constexpr std::string_view kRawMagic = "grrail-raw-1";

/// Writes `<header>` (text) and the little-endian array next to it as
/// `<stem>.raw`. Extra key/value lines are appended verbatim.
inline void write_raw(const std::filesystem::path& header, const VoxelGrid& grid, DType dtype = DType::f64,
                      const std::vector<std::pair<std::string, std::string>>& extra = {}) {
    check_grid(grid);
    auto data_path = header;
    data_path.replace_extension(".raw");
    std::ostringstream h;
    h.precision(17);
    h << "format=" << kRawMagic << "\n";
    h << "dims=" << grid.dims.nx << ' ' << grid.dims.ny << ' ' << grid.dims.nz << "\n";
    h << "spacing=" << grid.spacing_mm[0] << ' ' << grid.spacing_mm[1] << ' ' << grid.spacing_mm[2] << "\n";
    h << "dtype=" << dtype_name(dtype) << "\n";
    h << "data=" << data_path.filename().string() << "\n";
    for (const auto& [k, v] : extra) h << k << '=' << v << "\n";
    detail::write_file(header, h.str());
    detail::write_file(data_path, detail::encode_le(grid.values, dtype));
}

inline void write_mask(const std::filesystem::path& header, const RoiMask& mask, const Spacing& spacing = {1, 1, 1}) {
    VoxelGrid g{mask.dims, spacing, std::vector<double>(mask.flags.begin(), mask.flags.end())};
    write_raw(header, g, DType::u8);
}

inline VoxelGrid load_raw(const std::filesystem::path& header) {
    const auto kv = parse_key_values(detail::read_file(header));
    std::string format, dims_s, spacing_s, dtype_s, data_s;
    for (const auto& [k, v] : kv) {
        if (k == "format") format = v;
        else if (k == "dims") dims_s = v;
        else if (k == "spacing") spacing_s = v;
        else if (k == "dtype") dtype_s = v;
        else if (k == "data") data_s = v;
    }
    if (format != kRawMagic) throw Error("not a raw volume header", header.string());
    if (dims_s.empty() || spacing_s.empty() || dtype_s.empty() || data_s.empty())
        throw Error("malformed raw header", "dims, spacing, dtype and data are required");
    VoxelGrid g;
    {
        std::istringstream in(dims_s);
        long x = 0, y = 0, z = 0;
        if (!(in >> x >> y >> z) || x < 1 || y < 1 || z < 1) throw Error("invalid dims", dims_s);
        g.dims = {static_cast<std::size_t>(x), static_cast<std::size_t>(y), static_cast<std::size_t>(z)};
    }
    {
        std::istringstream in(spacing_s);
        if (!(in >> g.spacing_mm[0] >> g.spacing_mm[1] >> g.spacing_mm[2])) throw Error("invalid spacing", spacing_s);
    }
    const DType t = parse_dtype(dtype_s);
    const auto bytes = detail::read_file(header.parent_path() / data_s);
    if (bytes.size() != g.dims.count() * dtype_size(t))
        throw Error("data length mismatch", std::to_string(bytes.size() / dtype_size(t)) + " stored voxels, " +
                                                std::to_string(g.dims.count()) + " declared");
    g.values = detail::decode(bytes.data(), g.dims.count(), t, !detail::host_is_little);
    check_grid(g);
    return g;
}

// ---------------------------------------------------------------------------
// NIfTI-1

namespace nifti {
inline constexpr int kHeaderSize = 348;
inline int dtype_code(DType t) {
    switch (t) {
        case DType::u8: return 2;
        case DType::i16: return 4;
        case DType::i32: return 8;
        case DType::f32: return 16;
        case DType::f64: return 64;
    }
    return 0;
}
inline DType from_code(int code) {
    switch (code) {
        case 2: return DType::u8;
        case 4: return DType::i16;
        case 8: return DType::i32;
        case 16: return DType::f32;
        case 64: return DType::f64;
        default: throw Error("unsupported datatype", "NIfTI datatype code " + std::to_string(code));
    }
}
}  // namespace nifti

inline VoxelGrid load_nifti(const std::filesystem::path& path) {
    const auto bytes = detail::read_file(path);
    if (bytes.size() < static_cast<std::size_t>(nifti::kHeaderSize)) throw Error("unreadable file", "truncated NIfTI header");
    const char* h = bytes.data();
    bool swap = false;
    if (detail::load_scalar<std::int32_t>(h, false) != nifti::kHeaderSize) {
        swap = true;
        if (detail::load_scalar<std::int32_t>(h, true) != nifti::kHeaderSize) throw Error("unreadable file", "bad sizeof_hdr");
    }
    const bool single = std::memcmp(h + 344, "n+1\0", 4) == 0;
    const bool pair = std::memcmp(h + 344, "ni1\0", 4) == 0;
    if (!single && !pair) throw Error("unreadable file", "bad NIfTI magic");

    std::array<std::int16_t, 8> dim{};
    for (int i = 0; i < 8; ++i) dim[i] = detail::load_scalar<std::int16_t>(h + 40 + 2 * i, swap);
    const DType t = nifti::from_code(detail::load_scalar<std::int16_t>(h + 70, swap));
    std::array<float, 8> pixdim{};
    for (int i = 0; i < 8; ++i) pixdim[i] = detail::load_scalar<float>(h + 76 + 4 * i, swap);
    const float vox_offset = detail::load_scalar<float>(h + 108, swap);
    const float slope = detail::load_scalar<float>(h + 112, swap);
    const float inter = detail::load_scalar<float>(h + 116, swap);

    if (dim[0] < 1 || dim[0] > 7) throw Error("invalid dims", "dim[0] out of range");
    for (int i = 4; i <= dim[0]; ++i)
        if (dim[i] > 1) throw Error("invalid dims", "only 3-D volumes are supported");
    VoxelGrid g;
    auto d = [&](int i) -> std::size_t {
        if (i > dim[0]) return 1;
        if (dim[i] < 1) throw Error("invalid dims", "non-positive extent");
        return static_cast<std::size_t>(dim[i]);
    };
    g.dims = {d(1), d(2), d(3)};
    for (int i = 0; i < 3; ++i) g.spacing_mm[i] = (i + 1 <= dim[0]) ? std::abs(static_cast<double>(pixdim[i + 1])) : 1.0;

    std::string img;
    const char* data = nullptr;
    std::size_t available = 0;
    const std::size_t need = g.dims.count() * dtype_size(t);
    if (single) {
        const auto off = static_cast<std::size_t>(std::max(vox_offset, 352.0f));
        if (bytes.size() < off) throw Error("data length mismatch", "vox_offset beyond end of file");
        data = bytes.data() + off;
        available = bytes.size() - off;
    } else {
        auto img_path = path;
        img_path.replace_extension(".img");
        img = detail::read_file(img_path);
        const auto off = static_cast<std::size_t>(std::max(vox_offset, 0.0f));
        if (img.size() < off) throw Error("data length mismatch", "vox_offset beyond end of file");
        data = img.data() + off;
        available = img.size() - off;
    }
    if (available < need)
        throw Error("data length mismatch", std::to_string(available / dtype_size(t)) + " stored voxels, " +
                                                std::to_string(g.dims.count()) + " declared");
    g.values = detail::decode(data, g.dims.count(), t, swap);
    if (slope != 0.0f && std::isfinite(slope)) {
        for (double& v : g.values) v = v * static_cast<double>(slope) + static_cast<double>(inter);
    }
    check_grid(g);
    return g;
}

/// Writes a single-file little-endian NIfTI-1 volume.
inline void write_nifti(const std::filesystem::path& path, const VoxelGrid& grid, DType dtype = DType::f64) {
    check_grid(grid);
    std::string out(352, '\0');
    auto put = [&](std::size_t off, auto v) {
        std::string tmp;
        detail::store_le(tmp, v);
        std::memcpy(out.data() + off, tmp.data(), tmp.size());
    };
    put(0, std::int32_t{nifti::kHeaderSize});
    const std::array<std::int16_t, 8> dim{3, static_cast<std::int16_t>(grid.dims.nx),
                                          static_cast<std::int16_t>(grid.dims.ny),
                                          static_cast<std::int16_t>(grid.dims.nz), 1, 1, 1, 1};
    for (int i = 0; i < 8; ++i) put(40 + 2 * i, dim[i]);
    put(70, static_cast<std::int16_t>(nifti::dtype_code(dtype)));
    put(72, static_cast<std::int16_t>(8 * dtype_size(dtype)));
    const std::array<float, 8> pixdim{1.0f, static_cast<float>(grid.spacing_mm[0]), static_cast<float>(grid.spacing_mm[1]),
                                      static_cast<float>(grid.spacing_mm[2]), 1, 1, 1, 1};
    for (int i = 0; i < 8; ++i) put(76 + 4 * i, pixdim[i]);
    put(108, 352.0f);
    put(112, 0.0f);
    put(116, 0.0f);
    std::memcpy(out.data() + 344, "n+1\0", 4);
    out += detail::encode_le(grid.values, dtype);
    detail::write_file(path, out);
}

/// Loads either container, deciding by content rather than extension.
inline VoxelGrid load_volume(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("unreadable file", path.string());
    std::string head(32, '\0');
    in.read(head.data(), static_cast<std::streamsize>(head.size()));
    head.resize(static_cast<std::size_t>(in.gcount()));
    if (head.rfind("format=", 0) == 0 || head.rfind("#", 0) == 0) return load_raw(path);
    return load_nifti(path);
}

/// Nonzero voxels are inside the ROI.
inline RoiMask mask_from_grid(const VoxelGrid& g) {
    RoiMask m{g.dims, std::vector<std::uint8_t>(g.values.size())};
    for (std::size_t i = 0; i < g.values.size(); ++i) m.flags[i] = g.values[i] != 0.0 ? 1 : 0;
    return m;
}

inline RoiMask load_mask(const std::filesystem::path& path) { return mask_from_grid(load_volume(path)); }

// ---------------------------------------------------------------------------
// Resampling

namespace detail {

inline std::size_t resampled_extent(std::size_t n, double spacing, double target) {
    const double extent = static_cast<double>(n) * spacing / target;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(extent - 1e-9)));
}

inline double clamp_coord(double c, std::size_t n) { return std::clamp(c, 0.0, static_cast<double>(n - 1)); }

}  // namespace detail

/// Resamples to an isotropic `target_mm` grid. Output voxel i sits at input
/// continuous index i * target / spacing on each axis; samples beyond the last
/// input voxel clamp to the edge. The mask always uses nearest neighbour.
inline std::pair<VoxelGrid, RoiMask> resample_isotropic(const VoxelGrid& grid, const RoiMask& mask, double target_mm,
                                                        Interpolation mode = Interpolation::trilinear) {
    if (!(target_mm > 0.0) || !std::isfinite(target_mm)) throw Error("invalid target spacing");
    validate_pair(grid, mask);
    if (grid.spacing_mm[0] == target_mm && grid.spacing_mm[1] == target_mm && grid.spacing_mm[2] == target_mm)
        return {grid, mask};

    const Dims in = grid.dims;
    const Dims out{detail::resampled_extent(in.nx, grid.spacing_mm[0], target_mm),
                   detail::resampled_extent(in.ny, grid.spacing_mm[1], target_mm),
                   detail::resampled_extent(in.nz, grid.spacing_mm[2], target_mm)};
    const std::array<double, 3> step{target_mm / grid.spacing_mm[0], target_mm / grid.spacing_mm[1],
                                     target_mm / grid.spacing_mm[2]};
    VoxelGrid g{out, {target_mm, target_mm, target_mm}, std::vector<double>(out.count())};
    RoiMask m{out, std::vector<std::uint8_t>(out.count())};

    auto nearest = [](double c) { return static_cast<std::size_t>(std::floor(c + 0.5)); };
    for (std::size_t z = 0; z < out.nz; ++z) {
        const double cz = detail::clamp_coord(static_cast<double>(z) * step[2], in.nz);
        for (std::size_t y = 0; y < out.ny; ++y) {
            const double cy = detail::clamp_coord(static_cast<double>(y) * step[1], in.ny);
            for (std::size_t x = 0; x < out.nx; ++x) {
                const double cx = detail::clamp_coord(static_cast<double>(x) * step[0], in.nx);
                const std::size_t o = out.index(x, y, z);
                const std::size_t ni = in.index(nearest(cx), nearest(cy), nearest(cz));
                m.flags[o] = mask.flags[ni] ? 1 : 0;
                if (mode == Interpolation::nearest) {
                    g.values[o] = grid.values[ni];
                    continue;
                }
                const auto x0 = static_cast<std::size_t>(std::floor(cx));
                const auto y0 = static_cast<std::size_t>(std::floor(cy));
                const auto z0 = static_cast<std::size_t>(std::floor(cz));
                const std::size_t x1 = std::min(x0 + 1, in.nx - 1), y1 = std::min(y0 + 1, in.ny - 1),
                                  z1 = std::min(z0 + 1, in.nz - 1);
                const double fx = cx - static_cast<double>(x0), fy = cy - static_cast<double>(y0),
                             fz = cz - static_cast<double>(z0);
                auto lerp = [](double a, double b, double f) { return a + f * (b - a); };
                auto v = [&](std::size_t xi, std::size_t yi, std::size_t zi) { return grid.at(xi, yi, zi); };
                const double c00 = lerp(v(x0, y0, z0), v(x1, y0, z0), fx);
                const double c10 = lerp(v(x0, y1, z0), v(x1, y1, z0), fx);
                const double c01 = lerp(v(x0, y0, z1), v(x1, y0, z1), fx);
                const double c11 = lerp(v(x0, y1, z1), v(x1, y1, z1), fx);
                g.values[o] = lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz);
            }
        }
    }
    if (m.count() == 0) throw Error("empty ROI", "ROI vanished after resampling");
    return {std::move(g), std::move(m)};
}

/// Content hash of a grid (dims, spacing and values); stable across runs.
inline std::uint64_t grid_hash(const VoxelGrid& g) {
    std::string bytes;
    bytes.reserve(g.values.size() * 8 + 48);
    for (std::size_t d : {g.dims.nx, g.dims.ny, g.dims.nz}) detail::store_le(bytes, static_cast<std::uint64_t>(d));
    for (double s : g.spacing_mm) detail::store_le(bytes, s);
    for (double v : g.values) detail::store_le(bytes, v);
    return fnv1a64(bytes);
}

}  // namespace grrail
