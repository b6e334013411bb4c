#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace modrelu {

using cplx = std::complex<double>;

/// Error hierarchy. Everything user-triggerable throws one of these so the
/// CLI can map construction/usage problems to its exit codes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

class ParamError : public Error {
public:
    explicit ParamError(const std::string& msg) : Error(msg) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& msg, std::size_t byte_offset)
        : Error(msg + " (at byte " + std::to_string(byte_offset) + ")"),
          offset(byte_offset) {}
    std::size_t offset;
};

inline bool is_finite(cplx z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
}

inline void require_finite(cplx z, const char* what) {
    if (!is_finite(z)) throw ParamError(std::string(what) + ": non-finite value");
}

/// modReLU activation: 0 inside the closed unit disk, otherwise z shortened
/// by one unit of modulus. 1-Lipschitz and phase-homogeneous.
inline cplx modrelu(cplx z) {
    const double a = std::sqrt(std::fma(z.real(), z.real(), z.imag() * z.imag()));
    if (a <= 1.0) return {0.0, 0.0};
    const double scale = 1.0 - 1.0 / a;
    return {z.real() * scale, z.imag() * scale};
}

/// Real ReLU, used by reference oracles.
inline double relu(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace modrelu
