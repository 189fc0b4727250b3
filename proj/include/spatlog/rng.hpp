#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace spatlog {

/// Counter-based Philox4x32-10 generator.
///
/// The 64-bit key is the run seed; the upper half of the 128-bit counter
/// carries the stream (replica) index, so stream r of seed s never overlaps
/// any other stream. Satisfies UniformRandomBitGenerator with 64-bit output.
class Philox4x32 {
public:
    using result_type = std::uint64_t;

    Philox4x32() : Philox4x32(0, 0) {}
    Philox4x32(std::uint64_t seed, std::uint64_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          counter_{0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        if (used_ >= 2) {
            block_ = bijection(counter_, key_);
            increment();
            used_ = 0;
        }
        const auto lo = block_[2 * used_];
        const auto hi = block_[2 * used_ + 1];
        ++used_;
        return (static_cast<std::uint64_t>(hi) << 32) | lo;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// The raw keyed bijection, exposed for known-answer tests.
    static std::array<std::uint32_t, 4> bijection(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            key[0] += kW0;
            key[1] += kW1;
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;

    void increment() {
        if (++counter_[0] == 0) ++counter_[1];
    }

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> counter_;
    std::array<std::uint32_t, 4> block_{};
    int used_ = 2;
};

}  // namespace spatlog
