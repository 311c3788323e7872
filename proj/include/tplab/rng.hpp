#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace tplab {

// Counter-based deterministic generator built on the SplitMix64 finalizer.
//
// State is (key, counter). The k-th output is mix(key + k * GOLDEN), so any
// draw can be reproduced from the key alone and generation order never leaks
// between streams. Child streams are derived by hashing (key, tag); tags are
// either integers or short names (FNV-1a of the text). The same (seed, tag
// path) therefore yields the same values on every platform, independent of
// how many draws other streams consumed.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : key_(mix(seed + kGolden)) {}

    // Derived stream. Independent of this stream's counter position.
    Rng split(std::uint64_t tag) const {
        Rng child(0);
        child.key_ = mix(key_ ^ mix(tag + kTagSalt));
        child.ctr_ = 0;
        child.has_spare_ = false;
        return child;
    }
    Rng split(std::string_view name) const { return split(fnv1a(name)); }
    Rng split(std::string_view name, std::uint64_t index) const {
        return split(fnv1a(name)).split(index);
    }

    std::uint64_t next_u64() { return mix(key_ + (++ctr_) * kGolden); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). Lemire multiply-shift; n == 0 is invalid.
    std::uint64_t uniform_below(std::uint64_t n) {
        const auto wide = static_cast<unsigned __int128>(next_u64()) * n;
        return static_cast<std::uint64_t>(wide >> 64);
    }

    // Standard normal via Box-Muller, caching the second sample.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    static std::uint64_t fnv1a(std::string_view s) {
        std::uint64_t h = 14695981039346656037ull;
        for (const char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        return h;
    }

  private:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
    static constexpr std::uint64_t kTagSalt = 0xD1B54A32D192ED03ull;

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ull;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBull;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t key_ = 0;
    std::uint64_t ctr_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace tplab
