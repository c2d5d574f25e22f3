#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

namespace ruleforge::hashing {

inline constexpr std::uint64_t fnv_offset = 14695981039346656037ULL;
inline constexpr std::uint64_t fnv_prime = 1099511628211ULL;

constexpr std::uint64_t fnv1a(std::string_view data, std::uint64_t h = fnv_offset) noexcept {
    for (unsigned char c : data) {
        h ^= c;
        h *= fnv_prime;
    }
    return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t combine(std::uint64_t a, std::uint64_t b) noexcept {
    return splitmix64(a ^ (splitmix64(b) + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2)));
}

/// Field-separated content hash; fields are length-prefixed so ("ab","c")
/// and ("a","bc") differ.
template <typename... Fields>
std::uint64_t content_hash(const Fields&... fields) {
    std::uint64_t h = fnv_offset;
    auto feed = [&h](std::string_view f) {
        h = fnv1a(std::to_string(f.size()), h);
        h = fnv1a(":", h);
        h = fnv1a(f, h);
    };
    (feed(std::string_view(fields)), ...);
    return splitmix64(h);
}

inline std::string to_hex(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

/// Uniform double in [0,1) from a 64-bit hash.
constexpr double unit_interval(std::uint64_t h) noexcept {
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

/// Standard normal deviate derived deterministically from a key (Box-Muller).
inline double standard_normal(std::uint64_t key) noexcept {
    const double u1 = unit_interval(splitmix64(key ^ 0xA5A5A5A5A5A5A5A5ULL));
    const double u2 = unit_interval(splitmix64(key + 0x5851F42D4C957F2DULL));
    const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    return r * std::cos(6.283185307179586 * u2);
}

/// Small deterministic generator; std::mt19937_64 distributions are
/// implementation-defined, this one is not.
class SplitMix {
public:
    explicit SplitMix(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next() noexcept {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) noexcept {
        if (bound <= 1) return 0;
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
        std::uint64_t v = next();
        while (v >= limit) v = next();
        return v % bound;
    }

    double uniform() noexcept { return unit_interval(next()); }

    template <typename Container>
    void shuffle(Container& c) noexcept {
        for (std::size_t i = c.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            using std::swap;
            swap(c[i - 1], c[j]);
        }
    }

private:
    std::uint64_t state_;
};

} // namespace ruleforge::hashing
