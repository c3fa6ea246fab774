#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "grrail/volume.hpp"
#include "scratch_dir.hpp"

using namespace grrail;

namespace {

VoxelGrid constant_grid(Dims d, double v, Spacing s = {1, 1, 1}) { return {d, s, std::vector<double>(d.count(), v)}; }

RoiMask full_mask(Dims d) { return {d, std::vector<std::uint8_t>(d.count(), 1)}; }

// Minimal big-endian NIfTI-1 writer for the reader tests.
std::string big_endian_nifti(const std::array<std::int16_t, 8>& dim, const std::array<float, 8>& pixdim,
                             const std::vector<std::int16_t>& data) {
    std::string h(352, '\0');
    auto put = [&](std::size_t off, auto v) {
        char b[sizeof v];
        std::memcpy(b, &v, sizeof v);
        std::reverse(b, b + sizeof v);
        std::memcpy(h.data() + off, b, sizeof v);
    };
    put(0, std::int32_t{348});
    for (int i = 0; i < 8; ++i) put(40 + 2 * i, dim[i]);
    put(70, std::int16_t{4});
    put(72, std::int16_t{16});
    for (int i = 0; i < 8; ++i) put(76 + 4 * i, pixdim[i]);
    put(108, 352.0f);
    std::memcpy(h.data() + 344, "n+1\0", 4);
    for (auto v : data) {
        char b[2];
        std::memcpy(b, &v, 2);
        std::swap(b[0], b[1]);
        h.append(b, 2);
    }
    return h;
}

}  // namespace

TEST(RawFormat, ConstantVolumeLoads) {
    ScratchDir dir("raw_const");
    write_raw(dir / "c.hdr", constant_grid({4, 4, 4}, 7.0));
    const VoxelGrid g = load_volume(dir / "c.hdr");
    EXPECT_EQ(g.dims, (Dims{4, 4, 4}));
    ASSERT_EQ(g.values.size(), 64u);
    for (double v : g.values) EXPECT_EQ(v, 7.0);
}

TEST(RawFormat, RoundTripIsBitExact) {
    ScratchDir dir("raw_rt");
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0, 1e3);
    VoxelGrid g{{5, 3, 7}, {0.5, 1.25, 3.0}, {}};
    for (std::size_t i = 0; i < g.dims.count(); ++i) g.values.push_back(n(rng));
    write_raw(dir / "r.hdr", g);
    const VoxelGrid back = load_volume(dir / "r.hdr");
    EXPECT_EQ(back.dims, g.dims);
    EXPECT_EQ(back.spacing_mm, g.spacing_mm);
    EXPECT_EQ(std::memcmp(back.values.data(), g.values.data(), g.values.size() * sizeof(double)), 0);
}

TEST(RawFormat, ShortDataIsRejected) {
    ScratchDir dir("raw_short");
    write_raw(dir / "s.hdr", constant_grid({10, 10, 9}, 1.0));
    // same data file, header now claims 10x10x10
    std::string h = detail::read_file(dir / "s.hdr");
    h.replace(h.find("dims=10 10 9"), 12, "dims=10 10 10");
    detail::write_file(dir / "s.hdr", h);
    try {
        load_volume(dir / "s.hdr");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "data length mismatch");
    }
}

TEST(Nifti, HeaderEchoBigEndian) {
    ScratchDir dir("nii_be");
    std::vector<std::int16_t> data(500);
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<std::int16_t>(i);
    detail::write_file(dir / "v.nii", big_endian_nifti({3, 10, 10, 5, 1, 1, 1, 1}, {1, 2, 2, 2, 1, 1, 1, 1}, data));
    const VoxelGrid g = load_volume(dir / "v.nii");
    EXPECT_EQ(g.dims, (Dims{10, 10, 5}));
    EXPECT_EQ(g.spacing_mm, (Spacing{2, 2, 2}));
    EXPECT_EQ(g.values[0], 0);
    EXPECT_EQ(g.values[499], 499);
    EXPECT_EQ(g.at(3, 2, 1), 123);
}

TEST(Nifti, WriteThenReadLittleEndian) {
    ScratchDir dir("nii_le");
    VoxelGrid g{{3, 4, 2}, {1.5, 1.5, 3}, {}};
    for (int i = 0; i < 24; ++i) g.values.push_back(i * 0.25 - 2);
    write_nifti(dir / "v.nii", g);
    const VoxelGrid back = load_volume(dir / "v.nii");
    EXPECT_EQ(back.dims, g.dims);
    EXPECT_EQ(back.spacing_mm, g.spacing_mm);
    EXPECT_EQ(back.values, g.values);
}

TEST(Nifti, TruncatedDataIsRejected) {
    ScratchDir dir("nii_short");
    std::vector<std::int16_t> data(900);
    detail::write_file(dir / "v.nii", big_endian_nifti({3, 10, 10, 10, 1, 1, 1, 1}, {1, 1, 1, 1, 1, 1, 1, 1}, data));
    try {
        load_volume(dir / "v.nii");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "data length mismatch");
    }
}

TEST(Resample, ConstantFieldStaysConstant) {
    for (auto mode : {Interpolation::trilinear, Interpolation::nearest}) {
        const auto [g, m] = resample_isotropic(constant_grid({4, 4, 4}, 5.0, {2, 2, 2}), full_mask({4, 4, 4}), 1.0, mode);
        EXPECT_EQ(g.dims, (Dims{8, 8, 8}));
        for (double v : g.values) EXPECT_EQ(v, 5.0);
        EXPECT_EQ(m.count(), 512u);
    }
}

TEST(Resample, IdentityIsBitIdentical) {
    VoxelGrid g{{3, 3, 3}, {1, 1, 1}, {}};
    for (int i = 0; i < 27; ++i) g.values.push_back(std::sin(i));
    RoiMask m = full_mask({3, 3, 3});
    m.flags[4] = 0;
    const auto [out, om] = resample_isotropic(g, m, 1.0);
    EXPECT_EQ(out.values, g.values);
    EXPECT_EQ(om.flags, m.flags);
}

TEST(Resample, LinearRampMatchesAnalytic) {
    // f = physical x coordinate, sampled at spacing 2
    VoxelGrid g{{6, 3, 3}, {2, 2, 2}, std::vector<double>(54)};
    for (std::size_t z = 0; z < 3; ++z)
        for (std::size_t y = 0; y < 3; ++y)
            for (std::size_t x = 0; x < 6; ++x) g.values[g.dims.index(x, y, z)] = 2.0 * static_cast<double>(x);
    const auto [out, m] = resample_isotropic(g, full_mask(g.dims), 1.0);
    EXPECT_EQ(out.dims, (Dims{12, 6, 6}));
    for (std::size_t z = 0; z < out.dims.nz; ++z)
        for (std::size_t y = 0; y < out.dims.ny; ++y)
            for (std::size_t x = 0; x <= 10; ++x)  // interior: physical x within the sampled range
                EXPECT_NEAR(out.at(x, y, z), static_cast<double>(x), 1e-12);
}

TEST(Validate, MatchingPairCountsRoi) {
    VoxelGrid g = constant_grid({8, 8, 8}, 0);
    RoiMask m{{8, 8, 8}, std::vector<std::uint8_t>(512, 0)};
    for (int i = 0; i < 100; ++i) m.flags[static_cast<std::size_t>(i * 5)] = 1;
    EXPECT_EQ(validate_pair(g, m), 100u);
}

TEST(Validate, DimsMismatchAndEmptyRoi) {
    const VoxelGrid g = constant_grid({8, 8, 8}, 0);
    try {
        validate_pair(g, full_mask({8, 8, 7}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "dims mismatch");
    }
    try {
        validate_pair(g, RoiMask{{8, 8, 8}, std::vector<std::uint8_t>(512, 0)});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "empty ROI");
    }
}
