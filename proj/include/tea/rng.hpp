#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace tea {

// Splittable deterministic RNG. Every run funnels its randomness through one
// root Rng; independent streams are derived with split() so that changing one
// consumer (e.g. adding a diagnostic draw) cannot shift the others.
//
// Uniform/normal draws are hand-rolled on top of mt19937_64 so results do not
// depend on the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_material_(mix(seed)), engine_(seed_material_) {}

    // Child stream keyed by an integer (domain index, repetition index, ...).
    Rng split(std::uint64_t key) const {
        return Rng(seed_material_ ^ mix(key + 0x9e3779b97f4a7c15ull));
    }

    // Child stream keyed by a role tag ("pretrain", "buffers", ...).
    Rng split(std::string_view tag) const {
        std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64
        for (unsigned char c : tag) {
            h ^= c;
            h *= 1099511628211ull;
        }
        return split(h);
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller (no cached spare: keeps streams simple).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Uniform integer in [0, n), rejection sampled to avoid modulo bias.
    std::uint64_t uniform_below(std::uint64_t n) {
        const std::uint64_t limit =
            std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[uniform_below(i)]);
        }
    }

    // First k elements of a random permutation of {0..n-1}, in draw order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
            std::swap(idx[i], idx[i + uniform_below(n - i)]);
        }
        idx.resize(k);
        return idx;
    }

private:
    // splitmix64 finalizer; decorrelates sequential seeds.
    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    std::uint64_t seed_material_ = 0;
    std::mt19937_64 engine_;
};

}  // namespace tea
