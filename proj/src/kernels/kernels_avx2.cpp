// AVX2+FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma on x86-64 only; the dispatcher checks cpu support before
// handing out the table.

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cmath>

#include "modrelu/kernels.hpp"

namespace modrelu::kernels {

namespace {

void modrelu_avx2(double* re, double* im, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d zero = _mm256_setzero_pd();
    std::size_t p = 0;
    for (; p + 4 <= n; p += 4) {
        const __m256d r = _mm256_loadu_pd(re + p);
        const __m256d i = _mm256_loadu_pd(im + p);
        const __m256d m2 = _mm256_fmadd_pd(r, r, _mm256_mul_pd(i, i));
        const __m256d a = _mm256_sqrt_pd(m2);
        const __m256d gt = _mm256_cmp_pd(a, one, _CMP_GT_OQ);
        __m256d scale = _mm256_sub_pd(one, _mm256_div_pd(one, a));
        scale = _mm256_blendv_pd(zero, scale, gt);
        _mm256_storeu_pd(re + p, _mm256_mul_pd(r, scale));
        _mm256_storeu_pd(im + p, _mm256_mul_pd(i, scale));
    }
    for (; p < n; ++p) {
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

void caxpy_avx2(double* out_re, double* out_im, double ar, double ai,
                const double* x_re, const double* x_im, std::size_t n) {
    const __m256d var = _mm256_set1_pd(ar);
    const __m256d vai = _mm256_set1_pd(ai);
    std::size_t p = 0;
    for (; p + 4 <= n; p += 4) {
        const __m256d xr = _mm256_loadu_pd(x_re + p);
        const __m256d xi = _mm256_loadu_pd(x_im + p);
        __m256d orr = _mm256_loadu_pd(out_re + p);
        __m256d oii = _mm256_loadu_pd(out_im + p);
        orr = _mm256_fmadd_pd(var, xr, _mm256_fnmadd_pd(vai, xi, orr));
        oii = _mm256_fmadd_pd(var, xi, _mm256_fmadd_pd(vai, xr, oii));
        _mm256_storeu_pd(out_re + p, orr);
        _mm256_storeu_pd(out_im + p, oii);
    }
    for (; p < n; ++p) {
        out_re[p] = std::fma(ar, x_re[p], std::fma(-ai, x_im[p], out_re[p]));
        out_im[p] = std::fma(ar, x_im[p], std::fma(ai, x_re[p], out_im[p]));
    }
}

void cdiff_abs_avx2(double* out, const double* a_re, const double* a_im,
                    const double* b_re, const double* b_im, std::size_t n) {
    std::size_t p = 0;
    for (; p + 4 <= n; p += 4) {
        const __m256d dr = _mm256_sub_pd(_mm256_loadu_pd(a_re + p), _mm256_loadu_pd(b_re + p));
        const __m256d di = _mm256_sub_pd(_mm256_loadu_pd(a_im + p), _mm256_loadu_pd(b_im + p));
        const __m256d m2 = _mm256_fmadd_pd(dr, dr, _mm256_mul_pd(di, di));
        _mm256_storeu_pd(out + p, _mm256_sqrt_pd(m2));
    }
    for (; p < n; ++p) {
        const double dr = a_re[p] - b_re[p];
        const double di = a_im[p] - b_im[p];
        out[p] = std::sqrt(std::fma(dr, dr, di * di));
    }
}

void re_extract_avx2(double* out_re, double* out_im, const double* in_re,
                     const double* in_im, double h, std::size_t n) {
    const __m256d vh = _mm256_set1_pd(h);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d mtwo = _mm256_set1_pd(-2.0);
    std::size_t p = 0;
    for (; p + 4 <= n; p += 4) {
        const __m256d x = _mm256_loadu_pd(in_re + p);
        const __m256d y = _mm256_loadu_pd(in_im + p);
        const __m256d hx = _mm256_mul_pd(vh, x);
        const __m256d hy = _mm256_mul_pd(vh, y);
        const __m256d u = _mm256_fmadd_pd(hx, hx, _mm256_fmadd_pd(hy, hy, _mm256_mul_pd(mtwo, y)));
        const __m256d s = _mm256_sqrt_pd(_mm256_fmadd_pd(vh, _mm256_mul_pd(vh, u), one));
        const __m256d t = _mm256_div_pd(u, _mm256_add_pd(one, s));
        const __m256d inv = _mm256_div_pd(one, s);
        _mm256_storeu_pd(out_re + p, _mm256_mul_pd(x, inv));
        _mm256_storeu_pd(out_im + p, _mm256_mul_pd(_mm256_add_pd(y, t), inv));
    }
    for (; p < n; ++p) {
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

void im_extract_avx2(double* out_re, double* out_im, const double* in_re,
                     const double* in_im, double h, std::size_t n) {
    const __m256d vh = _mm256_set1_pd(h);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d two = _mm256_set1_pd(2.0);
    std::size_t p = 0;
    for (; p + 4 <= n; p += 4) {
        const __m256d x = _mm256_loadu_pd(in_re + p);
        const __m256d y = _mm256_loadu_pd(in_im + p);
        const __m256d hx = _mm256_mul_pd(vh, x);
        const __m256d hy = _mm256_mul_pd(vh, y);
        const __m256d u = _mm256_fmadd_pd(hx, hx, _mm256_fmadd_pd(hy, hy, _mm256_mul_pd(two, x)));
        const __m256d s = _mm256_sqrt_pd(_mm256_fmadd_pd(vh, _mm256_mul_pd(vh, u), one));
        const __m256d t = _mm256_div_pd(u, _mm256_add_pd(one, s));
        const __m256d inv = _mm256_div_pd(one, s);
        _mm256_storeu_pd(out_re + p, _mm256_mul_pd(y, inv));
        _mm256_storeu_pd(out_im + p, _mm256_mul_pd(_mm256_sub_pd(t, x), inv));
    }
    for (; p < n; ++p) {
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

const KernelTable* avx2_table() {
    static const KernelTable t{"avx2",         modrelu_avx2,    caxpy_avx2,
                               cdiff_abs_avx2, re_extract_avx2, im_extract_avx2};
    return &t;
}

}  // namespace modrelu::kernels

#else

#include "modrelu/kernels.hpp"

namespace modrelu::kernels {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace modrelu::kernels

#endif
