// Shared vocabulary types for the grrail library: grid dimensions, errors,
// seed mixing and a small deterministic worker pool.
#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace grrail {

/// Error carrying a stable machine-readable code ("dims mismatch",
/// "empty ROI", ...) next to the human-readable message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& detail)
        : std::runtime_error(detail.empty() ? code : code + ": " + detail), code_(std::move(code)) {}
    explicit Error(std::string code) : Error(std::move(code), "") {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

struct Dims {
    std::size_t nx = 0, ny = 0, nz = 0;

    std::size_t count() const noexcept { return nx * ny * nz; }
    std::size_t index(std::size_t x, std::size_t y, std::size_t z) const noexcept {
        return x + nx * (y + ny * z);
    }
    std::array<std::size_t, 3> coords(std::size_t idx) const noexcept {
        return {idx % nx, (idx / nx) % ny, idx / (nx * ny)};
    }
    bool contains(long x, long y, long z) const noexcept {
        return x >= 0 && y >= 0 && z >= 0 && static_cast<std::size_t>(x) < nx &&
               static_cast<std::size_t>(y) < ny && static_cast<std::size_t>(z) < nz;
    }
    friend bool operator==(const Dims&, const Dims&) = default;
};

using Spacing = std::array<double, 3>;

/// The 13 unique distance-1 offsets of the 26-neighbourhood (one of each
/// +/- pair).
inline constexpr std::array<std::array<int, 3>, 13> kHalfNeighbourhood{{
    {1, 0, 0}, {0, 1, 0}, {0, 0, 1},
    {1, 1, 0}, {1, -1, 0}, {1, 0, 1}, {1, 0, -1}, {0, 1, 1}, {0, 1, -1},
    {1, 1, 1}, {1, 1, -1}, {1, -1, 1}, {1, -1, -1},
}};

// splitmix64 finaliser
inline std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Derive a child seed; used so that every subject, map and model order
/// gets an independent stream regardless of scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
    return mix64(master ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream) noexcept {
    return derive_seed(master, fnv1a64(stream));
}

inline std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return s;
}

/// Run body(i) for i in [0, n) on up to `threads` workers. Work items are
/// handed out dynamically; callers must write only to disjoint outputs.
/// The first exception thrown by any item is rethrown after all workers join.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next = n;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

/// Contiguous-chunk variant: body(begin, end) over `chunks` slices.
template <class Body>
void parallel_chunks(std::size_t n, unsigned threads, std::size_t chunk, Body&& body) {
    if (chunk == 0) chunk = 1;
    const std::size_t pieces = (n + chunk - 1) / chunk;
    parallel_for(pieces, threads, [&](std::size_t p) {
        const std::size_t b = p * chunk;
        body(b, std::min(n, b + chunk));
    });
}

}  // namespace grrail
