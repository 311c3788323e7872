#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <system_error>

#include "tplab/errors.hpp"

namespace tplab {

// Shortest decimal string that parses back to the same double. All persisted
// floating-point values go through these two functions so that a save/load
// cycle is bit-exact.
inline std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& context) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ParseError("bad decimal value '" + std::string(s) + "' in " + context);
    return v;
}

// FNV-1a, used for content hashes of bundles and configs.
class Fnv1a64 {
  public:
    void update(std::string_view bytes) {
        for (const char c : bytes) {
            h_ ^= static_cast<unsigned char>(c);
            h_ *= 1099511628211ull;
        }
    }
    std::uint64_t value() const { return h_; }

    std::string hex() const {
        static const char* digits = "0123456789abcdef";
        std::string out(16, '0');
        std::uint64_t v = h_;
        for (int i = 15; i >= 0; --i) {
            out[static_cast<std::size_t>(i)] = digits[v & 0xF];
            v >>= 4;
        }
        return out;
    }

  private:
    std::uint64_t h_ = 14695981039346656037ull;
};

}  // namespace tplab
