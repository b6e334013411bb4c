#pragma once

#include <cstddef>
#include <string>
#include <vector>

// Batch kernels for the evaluation hot loops. Arrays are split-plane complex
// (separate re/im arrays over the point dimension). Each kernel has a scalar
// reference implementation and SIMD variants selected at runtime; the scalar
// bodies use std::fma with the same expression trees as the intrinsics so all
// backends produce bit-identical results.

namespace modrelu::kernels {

// In-place modReLU over n points.
using modrelu_fn = void (*)(double* re, double* im, std::size_t n);
// out += (ar + i*ai) * x over n points.
using caxpy_fn = void (*)(double* out_re, double* out_im, double ar, double ai,
                          const double* x_re, const double* x_im, std::size_t n);
// out[p] = |a_p - b_p| over n points.
using cdiff_abs_fn = void (*)(double* out, const double* a_re, const double* a_im,
                              const double* b_re, const double* b_im, std::size_t n);
// Closed forms of the h-scaled real/imaginary-part extractor maps; the
// algebraically identical layer form cancels catastrophically at small h.
using extract_fn = void (*)(double* out_re, double* out_im, const double* in_re,
                            const double* in_im, double h, std::size_t n);

struct KernelTable {
    const char* name;
    modrelu_fn modrelu;
    caxpy_fn caxpy;
    cdiff_abs_fn cdiff_abs;
    extract_fn re_extract;
    extract_fn im_extract;
};

/// Active table. Picked on first use: best supported backend, unless
/// MODRELU_SIMD names one of {auto, scalar, avx2, neon}.
const KernelTable& active();

/// Force a backend by name; returns false (and leaves the active table
/// unchanged) if it is not supported on this machine. Used by the
/// equivalence tests.
bool set_backend(const std::string& name);

/// Names of all backends usable on this machine ("scalar" always included).
std::vector<std::string> supported_backends();

const KernelTable& scalar_table();

}  // namespace modrelu::kernels
