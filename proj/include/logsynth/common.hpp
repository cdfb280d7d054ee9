#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace logsynth {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 6.28318530717958647692;

/// Model or data violates an invariant (CLI exit code 2).
class validation_error : public std::runtime_error {
public:
    explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

/// File or format problem (CLI exit code 3).
class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical routine failed to converge or produced non-finite values (CLI exit code 4).
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

/// Maps an angle to [0, 2pi). normalize_angle(2pi) == 0 exactly, so values
/// that differ by whole turns land on the same representative.
inline double normalize_angle(double theta) {
    double t = theta - kTwoPi * std::floor(theta / kTwoPi);
    if (t >= kTwoPi) t -= kTwoPi;
    if (t < 0.0) t += kTwoPi;
    return t;
}

/// Signed angular difference a - b wrapped into (-pi, pi].
inline double wrap_angle_diff(double a, double b) {
    double d = normalize_angle(a - b);
    if (d > kPi) d -= kTwoPi;
    return d;
}

/// splitmix64 step; also used to derive independent child seeds from a master
/// seed so parallel streams are reproducible per (seed, index).
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed ^ (0x6a09e667f3bcc909ULL + stream * 0x9e3779b97f4a7c15ULL);
    return splitmix64(s);
}

inline bool is_finite(double v) { return std::isfinite(v); }

}  // namespace logsynth
