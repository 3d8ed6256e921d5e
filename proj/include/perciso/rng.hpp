#pragma once

#include <cstdint>

namespace perciso {

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// 64-bit hash of (seed, counter); the per-edge stream and derived seeds use distinct tweaks.
constexpr std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t counter) {
    return mix64(mix64(seed) ^ mix64(counter ^ 0x632BE59BD9B4E019ULL));
}

constexpr double to_unit(std::uint64_t h) {
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

constexpr double edge_uniform(std::uint64_t seed, std::uint64_t canonical_id) {
    return to_unit(counter_hash(seed, canonical_id));
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return mix64(mix64(master ^ 0xD1B54A32D192ED03ULL) + mix64(index + 0x8CB92BA72F3D8DD7ULL));
}

// Sequential generator for heuristics (annealing, random geometry).
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    double uniform() { return to_unit(next()); }
    std::uint64_t below(std::uint64_t bound) {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * bound) >> 64);
    }
    double normal();

    using result_type = std::uint64_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~0ULL; }
    result_type operator()() { return next(); }

private:
    std::uint64_t state_;
};

}  // namespace perciso
