#ifndef ITERBOOT_RNG_HPP
#define ITERBOOT_RNG_HPP

// Seed-addressable random number generation. Every stream is a pure
// function of (master seed, stream id, index), so any sample can be
// regenerated bit-exactly from its coordinates alone. No global state.

#include <array>
#include <cmath>
#include <cstdint>

namespace ib {

// SplitMix64, Steele/Lea/Flood (2014), fixed-increment variant by Vigna.
class SplitMix64 {
public:
    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    constexpr std::uint64_t next() noexcept {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

// xoshiro256++ (Blackman/Vigna), state expanded from a 64-bit key with
// SplitMix64 as recommended by the authors.
class Xoshiro256pp {
public:
    explicit Xoshiro256pp(std::uint64_t seed) noexcept {
        SplitMix64 sm(seed);
        for (auto& w : s_) w = sm.next();
    }

    std::uint64_t next() noexcept {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // uniform on [0, 1), 53-bit resolution
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // uniform on (0, 1), safe as a log argument
    double uniform_open() noexcept {
        return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Box-Muller, cosine branch only; consumes exactly two words per draw
    double normal() noexcept {
        const double u1 = uniform_open();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

    bool bernoulli(double p) noexcept { return uniform() < p; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }
    std::array<std::uint64_t, 4> s_{};
};

// Stream layout. Stream 0 generates observed data and is never used for
// simulation replicas, so the observed draw cannot collide with any of
// the H simulation draws by construction.
enum class SeedStream : std::uint32_t {
    Observed = 0,       // observed-data generation
    Simulation = 1,     // the H per-step simulation replicas
    MonteCarlo = 2,     // per-replicate sub-master derivation
    Contamination = 3,  // contamination permutation
};

// Chained SplitMix64 over (master, stream, index). Pure; distinct triples
// map to distinct, decorrelated generator keys.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint32_t stream_id,
                                 std::uint64_t h) noexcept {
    SplitMix64 g0(master);
    SplitMix64 g1(g0.next() + stream_id);
    SplitMix64 g2(g1.next() + h);
    return g2.next();
}

inline std::uint64_t derive_seed(std::uint64_t master, SeedStream stream,
                                 std::uint64_t h) noexcept {
    return derive_seed(master, static_cast<std::uint32_t>(stream), h);
}

// Master seed plus the simulation-stream size H. All seeds used anywhere
// in a run are derived from this object.
struct SeedSet {
    std::uint64_t master = 0;
    int h_max = 0;  // H

    std::uint64_t observed_seed(std::uint64_t idx = 0) const noexcept {
        return derive_seed(master, SeedStream::Observed, idx);
    }
    // h in 1..H
    std::uint64_t sim_seed(std::uint64_t h) const noexcept {
        return derive_seed(master, SeedStream::Simulation, h);
    }
    // per-iteration variant used when seeds are redrawn at every step k
    std::uint64_t sim_seed(std::uint64_t k, std::uint64_t h) const noexcept {
        return derive_seed(master, SeedStream::Simulation, (k << 32) + h);
    }
    std::uint64_t replicate_master(std::uint64_t r) const noexcept {
        return derive_seed(master, SeedStream::MonteCarlo, r);
    }
    std::uint64_t contamination_seed() const noexcept {
        return derive_seed(master, SeedStream::Contamination, 0);
    }
};

// Split one generator key into independent sub-keys. Simulators use
// sub-key 0 for latent effects and sub-key 1 for responses, so models
// that share a response mechanism produce identical draws when the
// latent part is degenerate.
inline std::uint64_t subkey(std::uint64_t seed, std::uint64_t which) noexcept {
    SplitMix64 g(seed);
    std::uint64_t s = 0;
    for (std::uint64_t i = 0; i <= which; ++i) s = g.next();
    return s;
}

}  // namespace ib

#endif
