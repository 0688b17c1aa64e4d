#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace rotmap {

/// Deterministic seed derivation. Every random stage draws from a stream
/// keyed by (global seed, label, indices) so results do not depend on the
/// order or the thread in which work items are processed.
namespace seeds {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_label(std::string_view label) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t mix(std::uint64_t a, std::uint64_t b) noexcept {
    return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t derive(std::uint64_t seed, std::string_view label,
                            std::initializer_list<std::uint64_t> indices = {}) noexcept {
    std::uint64_t h = mix(splitmix64(seed), hash_label(label));
    for (std::uint64_t i : indices) h = mix(h, i);
    return h;
}

}  // namespace seeds

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seeds::splitmix64(seed)) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Unbiased integer in [0, n); n > 0.
    std::uint64_t index(std::uint64_t n) {
        // Lemire's multiply-shift with rejection.
        std::uint64_t x = engine_();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                x = engine_();
                m = static_cast<__uint128_t>(x) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace rotmap
