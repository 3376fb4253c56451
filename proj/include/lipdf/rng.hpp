#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace lipdf {

namespace detail {

// splitmix64 finalizer; full-avalanche 64-bit mix.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Splittable random stream. A stream is identified by a 64-bit key;
/// `child(id)` derives an independent stream without consuming draw state,
/// so per-(step, particle) substreams are reproducible regardless of
/// evaluation order. Sequential draws use an xorshift-based generator
/// seeded from the key; a Gaussian draw consumes exactly two uniforms
/// (Box-Muller, spare cached).
class RngStream {
public:
    explicit RngStream(std::uint64_t key)
        : key_(key),
          state_(detail::mix64(key ^ 0x1d8af066u)) {
        if (state_ == 0) state_ = 0x6a09e667f3bcc909ULL;
    }

    std::uint64_t key() const { return key_; }

    /// Derived stream; pure, the parent's draw state is untouched.
    RngStream child(std::uint64_t id) const {
        return RngStream(detail::mix64(key_ + 0x9e3779b97f4a7c15ULL * (id + 1)));
    }

    std::uint64_t next_u64() {
        // xorshift64*
        state_ ^= state_ >> 12;
        state_ ^= state_ << 25;
        state_ ^= state_ >> 27;
        return state_ * 0x2545f4914f6cdd1dULL;
    }

    /// Uniform on [0, 1).
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    /// Standard normal.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform01();  // (0, 1]
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double gaussian(double mean, double stddev) {
        return mean + stddev * gaussian();
    }

private:
    std::uint64_t key_;
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace lipdf
