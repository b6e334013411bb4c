// NEON kernel variants for aarch64, where Advanced SIMD is baseline so no
// special compile flags or runtime probing are needed.

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>

#include "modrelu/kernels.hpp"

namespace modrelu::kernels {

namespace {

void modrelu_neon(double* re, double* im, std::size_t n) {
    const float64x2_t one = vdupq_n_f64(1.0);
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t p = 0;
    for (; p + 2 <= n; p += 2) {
        const float64x2_t r = vld1q_f64(re + p);
        const float64x2_t i = vld1q_f64(im + p);
        const float64x2_t m2 = vfmaq_f64(vmulq_f64(i, i), r, r);
        const float64x2_t a = vsqrtq_f64(m2);
        const uint64x2_t gt = vcgtq_f64(a, one);
        float64x2_t scale = vsubq_f64(one, vdivq_f64(one, a));
        scale = vbslq_f64(gt, scale, zero);
        vst1q_f64(re + p, vmulq_f64(r, scale));
        vst1q_f64(im + p, vmulq_f64(i, scale));
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

void caxpy_neon(double* out_re, double* out_im, double ar, double ai,
                const double* x_re, const double* x_im, std::size_t n) {
    const float64x2_t var = vdupq_n_f64(ar);
    const float64x2_t vai = vdupq_n_f64(ai);
    std::size_t p = 0;
    for (; p + 2 <= n; p += 2) {
        const float64x2_t xr = vld1q_f64(x_re + p);
        const float64x2_t xi = vld1q_f64(x_im + p);
        float64x2_t orr = vld1q_f64(out_re + p);
        float64x2_t oii = vld1q_f64(out_im + p);
        orr = vfmaq_f64(vfmsq_f64(orr, vai, xi), var, xr);
        oii = vfmaq_f64(vfmaq_f64(oii, vai, xr), var, xi);
        vst1q_f64(out_re + p, orr);
        vst1q_f64(out_im + p, oii);
    }
    for (; p < n; ++p) {
        out_re[p] = std::fma(ar, x_re[p], std::fma(-ai, x_im[p], out_re[p]));
        out_im[p] = std::fma(ar, x_im[p], std::fma(ai, x_re[p], out_im[p]));
    }
}

void cdiff_abs_neon(double* out, const double* a_re, const double* a_im,
                    const double* b_re, const double* b_im, std::size_t n) {
    std::size_t p = 0;
    for (; p + 2 <= n; p += 2) {
        const float64x2_t dr = vsubq_f64(vld1q_f64(a_re + p), vld1q_f64(b_re + p));
        const float64x2_t di = vsubq_f64(vld1q_f64(a_im + p), vld1q_f64(b_im + p));
        const float64x2_t m2 = vfmaq_f64(vmulq_f64(di, di), dr, dr);
        vst1q_f64(out + p, vsqrtq_f64(m2));
    }
    for (; p < n; ++p) {
        const double dr = a_re[p] - b_re[p];
        const double di = a_im[p] - b_im[p];
        out[p] = std::sqrt(std::fma(dr, dr, di * di));
    }
}

void re_extract_neon(double* out_re, double* out_im, const double* in_re,
                     const double* in_im, double h, std::size_t n) {
    const float64x2_t vh = vdupq_n_f64(h);
    const float64x2_t one = vdupq_n_f64(1.0);
    const float64x2_t mtwo = vdupq_n_f64(-2.0);
    std::size_t p = 0;
    for (; p + 2 <= n; p += 2) {
        const float64x2_t x = vld1q_f64(in_re + p);
        const float64x2_t y = vld1q_f64(in_im + p);
        const float64x2_t hx = vmulq_f64(vh, x);
        const float64x2_t hy = vmulq_f64(vh, y);
        const float64x2_t u = vfmaq_f64(vfmaq_f64(vmulq_f64(mtwo, y), hy, hy), hx, hx);
        const float64x2_t s = vsqrtq_f64(vfmaq_f64(one, vh, vmulq_f64(vh, u)));
        const float64x2_t t = vdivq_f64(u, vaddq_f64(one, s));
        const float64x2_t inv = vdivq_f64(one, s);
        vst1q_f64(out_re + p, vmulq_f64(x, inv));
        vst1q_f64(out_im + p, vmulq_f64(vaddq_f64(y, t), inv));
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

void im_extract_neon(double* out_re, double* out_im, const double* in_re,
                     const double* in_im, double h, std::size_t n) {
    const float64x2_t vh = vdupq_n_f64(h);
    const float64x2_t one = vdupq_n_f64(1.0);
    const float64x2_t two = vdupq_n_f64(2.0);
    std::size_t p = 0;
    for (; p + 2 <= n; p += 2) {
        const float64x2_t x = vld1q_f64(in_re + p);
        const float64x2_t y = vld1q_f64(in_im + p);
        const float64x2_t hx = vmulq_f64(vh, x);
        const float64x2_t hy = vmulq_f64(vh, y);
        const float64x2_t u = vfmaq_f64(vfmaq_f64(vmulq_f64(two, x), hy, hy), hx, hx);
        const float64x2_t s = vsqrtq_f64(vfmaq_f64(one, vh, vmulq_f64(vh, u)));
        const float64x2_t t = vdivq_f64(u, vaddq_f64(one, s));
        const float64x2_t inv = vdivq_f64(one, s);
        vst1q_f64(out_re + p, vmulq_f64(y, inv));
        vst1q_f64(out_im + p, vmulq_f64(vsubq_f64(t, x), inv));
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

const KernelTable* neon_table() {
    static const KernelTable t{"neon",         modrelu_neon,    caxpy_neon,
                               cdiff_abs_neon, re_extract_neon, im_extract_neon};
    return &t;
}

}  // namespace modrelu::kernels

#else

#include "modrelu/kernels.hpp"

namespace modrelu::kernels {
const KernelTable* neon_table() { return nullptr; }
}  // namespace modrelu::kernels

#endif
