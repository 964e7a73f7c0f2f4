#pragma once

// Counter-based random streams.
//
// Every draw is a pure function of (seed, path, stream, block), so a path can
// be regenerated anywhere, by any worker, in any order.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace stoplab {

/// Philox4x32-10 block function (Salmon et al., SC'11).
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// Maps 64 random bits onto the open interval (0, 1). Midpoints of a 2^-52 grid
/// are exact doubles, so neither endpoint is reachable.
inline double bits_to_open_unit(std::uint64_t bits) {
    return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Reserved stream tags. Tags below kStreamReserved index bridge segments.
inline constexpr std::uint32_t kStreamWalk = 0;
inline constexpr std::uint32_t kStreamOffset = 0xFFFFFFFFu;
inline constexpr std::uint32_t kStreamReserved = 0xFFFFFF00u;

/// One substream of standard normals, identified by (seed, path, stream).
/// Each Philox block yields one Box-Muller pair.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t path, std::uint32_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          path_lo_(static_cast<std::uint32_t>(path)),
          path_hi_(static_cast<std::uint32_t>(path >> 32)),
          stream_(stream) {}

    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const auto out = Philox4x32::generate({path_lo_, path_hi_, stream_, block_++}, key_);
        const double u1 = bits_to_open_unit((std::uint64_t{out[0]} << 32) | out[1]);
        const double u2 = bits_to_open_unit((std::uint64_t{out[2]} << 32) | out[3]);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double operator()() { return next(); }

private:
    std::array<std::uint32_t, 2> key_;
    std::uint32_t path_lo_;
    std::uint32_t path_hi_;
    std::uint32_t stream_;
    std::uint32_t block_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Single uniform on (0, 1) keyed like NormalStream; `index` selects the block.
inline double keyed_uniform(std::uint64_t seed, std::uint64_t path, std::uint32_t stream,
                            std::uint32_t index = 0) {
    const auto out = Philox4x32::generate(
        {static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32), stream, index},
        {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
    return bits_to_open_unit((std::uint64_t{out[0]} << 32) | out[1]);
}

} // namespace stoplab
