#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace spmc {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11 constants).
//
// Stream layout: the 64-bit key carries the user's base seed; counter words
// 2..3 carry the replication index and words 0..1 count 128-bit blocks within
// the stream. Distinct replications therefore use disjoint counter ranges and
// can never overlap, independent of how many numbers each one draws.
class PhiloxRng {
public:
    PhiloxRng(std::uint64_t base_seed, std::uint64_t replication)
        : key_{static_cast<std::uint32_t>(base_seed),
               static_cast<std::uint32_t>(base_seed >> 32)},
          rep_lo_(static_cast<std::uint32_t>(replication)),
          rep_hi_(static_cast<std::uint32_t>(replication >> 32)) {}

    static constexpr const char* algorithm_name() { return "philox4x32-10"; }

    std::uint32_t next_u32() {
        if (lane_ == 4) {
            block_ = run_block();
            ++block_index_;
            lane_ = 0;
        }
        return block_[lane_++];
    }

    std::uint64_t next_u64() {
        const std::uint64_t lo = next_u32();
        const std::uint64_t hi = next_u32();
        return lo | (hi << 32);
    }

    // Uniform on [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform on (0, 1), safe to pass through log or a quantile function.
    double next_open_double() {
        const double u = next_double();
        return u > 0.0 ? u : 0x1.0p-53;
    }

    // Exponential holding time with the given rate.
    double next_exponential(double rate) {
        return -std::log(next_open_double()) / rate;
    }

private:
    std::array<std::uint32_t, 4> run_block() const {
        std::array<std::uint32_t, 4> ctr = {
            static_cast<std::uint32_t>(block_index_),
            static_cast<std::uint32_t>(block_index_ >> 32), rep_lo_, rep_hi_};
        std::uint32_t k0 = key_[0];
        std::uint32_t k1 = key_[1];
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = 0xD2511F53ULL * ctr[0];
            const std::uint64_t p1 = 0xCD9E8D57ULL * ctr[2];
            const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
            const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
            k0 += 0x9E3779B9U;
            k1 += 0xBB67AE85U;
        }
        return ctr;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint32_t rep_lo_;
    std::uint32_t rep_hi_;
    std::uint64_t block_index_ = 0;
    std::array<std::uint32_t, 4> block_{};
    int lane_ = 4;
};

}  // namespace spmc
