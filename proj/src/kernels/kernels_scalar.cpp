#include <cmath>

#include "modrelu/kernels.hpp"

// Scalar reference kernels. Expression trees deliberately mirror the SIMD
// variants (explicit fma, mul-before-fma) so results are bit-identical
// across backends.

namespace modrelu::kernels {

namespace {

void modrelu_scalar(double* re, double* im, std::size_t n) {
    for (std::size_t p = 0; p < n; ++p) {
        const double r = re[p], i = im[p];
        const double a = std::sqrt(std::fma(r, r, i * i));
        if (a > 1.0) {
            const double scale = 1.0 - 1.0 / a;
            re[p] = r * scale;
            im[p] = i * scale;
        } else {
            re[p] = 0.0;
            im[p] = 0.0;
        }
    }
}

void caxpy_scalar(double* out_re, double* out_im, double ar, double ai,
                  const double* x_re, const double* x_im, std::size_t n) {
    for (std::size_t p = 0; p < n; ++p) {
        out_re[p] = std::fma(ar, x_re[p], std::fma(-ai, x_im[p], out_re[p]));
        out_im[p] = std::fma(ar, x_im[p], std::fma(ai, x_re[p], out_im[p]));
    }
}

void cdiff_abs_scalar(double* out, const double* a_re, const double* a_im,
                      const double* b_re, const double* b_im, std::size_t n) {
    for (std::size_t p = 0; p < n; ++p) {
        const double dr = a_re[p] - b_re[p];
        const double di = a_im[p] - b_im[p];
        out[p] = std::sqrt(std::fma(dr, dr, di * di));
    }
}

// With u = h^2|z|^2 - 2y and s = sqrt(1 + h^2 u), the extractor map equals
// (x + i(y + u/(1+s))) / s; no large intermediates appear.
void re_extract_scalar(double* out_re, double* out_im, const double* in_re,
                       const double* in_im, double h, std::size_t n) {
    for (std::size_t p = 0; p < n; ++p) {
        const double x = in_re[p], y = in_im[p];
        const double hx = h * x, hy = h * y;
        const double u = std::fma(hx, hx, std::fma(hy, hy, -2.0 * y));
        const double s = std::sqrt(std::fma(h, h * u, 1.0));
        const double t = u / (1.0 + s);
        const double inv = 1.0 / s;
        out_re[p] = x * inv;
        out_im[p] = (y + t) * inv;
    }
}

// Same with u = h^2|z|^2 + 2x: the map equals (y + i(u/(1+s) - x)) / s.
void im_extract_scalar(double* out_re, double* out_im, const double* in_re,
                       const double* in_im, double h, std::size_t n) {
    for (std::size_t p = 0; p < n; ++p) {
        const double x = in_re[p], y = in_im[p];
        const double hx = h * x, hy = h * y;
        const double u = std::fma(hx, hx, std::fma(hy, hy, 2.0 * x));
        const double s = std::sqrt(std::fma(h, h * u, 1.0));
        const double t = u / (1.0 + s);
        const double inv = 1.0 / s;
        out_re[p] = y * inv;
        out_im[p] = (t - x) * inv;
    }
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable t{"scalar",        modrelu_scalar,    caxpy_scalar,
                               cdiff_abs_scalar, re_extract_scalar, im_extract_scalar};
    return t;
}

}  // namespace modrelu::kernels
