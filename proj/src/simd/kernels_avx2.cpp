#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "taap/simd.hpp"

namespace taap::simd::detail {

namespace {

inline __m256d set1(double v) { return _mm256_set1_pd(v); }

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v), hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline double hmin(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v), hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_min_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_min_sd(s, _mm_unpackhi_pd(s, s)));
}

// Cephes-style exp: 2^n * exp(r), |r| <= ln2/2, rational approximant for exp(r).
inline __m256d exp_pd(__m256d x) {
    const __m256d lo = set1(-708.0);
    const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
    x = _mm256_max_pd(_mm256_min_pd(x, set1(709.0)), lo);
    const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, set1(1.4426950408889634)),
                                      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(n, set1(6.93145751953125e-1), x);
    r = _mm256_fnmadd_pd(n, set1(1.42860682030941723212e-6), r);
    const __m256d rr = _mm256_mul_pd(r, r);
    __m256d px = _mm256_fmadd_pd(set1(1.26177193074810590878e-4), rr, set1(3.02994407707441961300e-2));
    px = _mm256_fmadd_pd(px, rr, set1(9.99999999999999999910e-1));
    px = _mm256_mul_pd(px, r);
    __m256d qx = _mm256_fmadd_pd(set1(3.00198505138664455042e-6), rr, set1(2.52448340349684104192e-3));
    qx = _mm256_fmadd_pd(qx, rr, set1(2.27265548208155028766e-1));
    qx = _mm256_fmadd_pd(qx, rr, set1(2.0));
    const __m256d er = _mm256_add_pd(set1(1.0), _mm256_div_pd(_mm256_add_pd(px, px), _mm256_sub_pd(qx, px)));
    const __m256d magic = set1(0x1.8p52);
    const __m256i ni = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(n, magic)), _mm256_castpd_si256(magic));
    const __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(ni, _mm256_set1_epi64x(1023)), 52);
    const __m256d res = _mm256_mul_pd(er, _mm256_castsi256_pd(bits));
    return _mm256_andnot_pd(underflow, res);
}

}  // namespace

TaapSum taap_phase_average_avx2(const TaapInput& in) {
    const __m256d b0x = set1(in.b0[0]), b0y = set1(in.b0[1]), b0z = set1(in.b0[2]);
    const __m256d bmx = set1(in.bm[0]), bmy = set1(in.bm[1]), bmz = set1(in.bm[2]);
    const __m256d gam = set1(in.gamma), wrf = set1(in.omega_rf), rabi = set1(in.omega_rabi);
    __m256d acc = _mm256_setzero_pd();
    __m256d bmin = set1(std::numeric_limits<double>::infinity());
    std::size_t k = 0;
    for (; k + 4 <= in.n; k += 4) {
        const __m256d s = _mm256_loadu_pd(in.sin_theta + k);
        const __m256d bx = _mm256_fmadd_pd(s, bmx, b0x);
        const __m256d by = _mm256_fmadd_pd(s, bmy, b0y);
        const __m256d bz = _mm256_fmadd_pd(s, bmz, b0z);
        const __m256d bp2 = _mm256_fmadd_pd(by, by, _mm256_mul_pd(bx, bx));
        const __m256d b = _mm256_sqrt_pd(_mm256_fmadd_pd(bz, bz, bp2));
        bmin = _mm256_min_pd(bmin, b);
        const __m256d det = _mm256_fmsub_pd(gam, b, wrf);
        const __m256d om = in.projected ? _mm256_div_pd(_mm256_mul_pd(rabi, _mm256_sqrt_pd(bp2)), b) : rabi;
        acc = _mm256_add_pd(acc, _mm256_sqrt_pd(_mm256_fmadd_pd(det, det, _mm256_mul_pd(om, om))));
    }
    double sum = hsum(acc);
    double mn = hmin(bmin);
    for (; k < in.n; ++k) {
        const double s = in.sin_theta[k];
        const double bx = in.b0[0] + s * in.bm[0], by = in.b0[1] + s * in.bm[1], bz = in.b0[2] + s * in.bm[2];
        const double bp2 = bx * bx + by * by;
        const double b = std::sqrt(bp2 + bz * bz);
        mn = std::min(mn, b);
        const double det = in.gamma * b - in.omega_rf;
        const double om = in.projected ? in.omega_rabi * std::sqrt(bp2) / b : in.omega_rabi;
        sum += std::sqrt(det * det + om * om);
    }
    return {sum / static_cast<double>(in.n), mn};
}

namespace {

struct Lanes {
    __m256d model;
    __m256d jac[ring_param_count];
};

struct Params {
    __m256d v[ring_param_count];
    explicit Params(const double* p) {
        for (int i = 0; i < ring_param_count; ++i) v[i] = set1(p[i]);
    }
};

inline void eval4(__m256d x, __m256d y, const Params& P, Lanes& L, bool with_jacobian) {
    const auto* p = P.v;
    const __m256d one = set1(1.0), two = set1(2.0), zero = _mm256_setzero_pd(), tiny = set1(1e-300);
    const __m256d dx = _mm256_sub_pd(x, p[cx]), dy = _mm256_sub_pd(y, p[cy]);
    const __m256d dxx = _mm256_mul_pd(dx, dx), dyy = _mm256_mul_pd(dy, dy), dxy = _mm256_mul_pd(dx, dy);
    const __m256d diff = _mm256_sub_pd(dxx, dyy);
    const __m256d r02 = _mm256_max_pd(_mm256_add_pd(dxx, dyy), tiny);
    const __m256d inv_r0 = _mm256_div_pd(one, _mm256_sqrt_pd(r02));
    const __m256d cphi = _mm256_mul_pd(dx, inv_r0), sphi = _mm256_mul_pd(dy, inv_r0);
    const __m256d c2phi = _mm256_div_pd(diff, r02), s2phi = _mm256_div_pd(_mm256_mul_pd(two, dxy), r02);
    __m256d rho2 = _mm256_fmadd_pd(p[ec], diff, _mm256_add_pd(dxx, dyy));
    rho2 = _mm256_fmadd_pd(_mm256_mul_pd(two, p[es]), dxy, rho2);
    rho2 = _mm256_max_pd(rho2, tiny);
    const __m256d rho = _mm256_sqrt_pd(rho2);
    __m256d m = _mm256_mul_pd(p[c1], cphi);
    m = _mm256_fnmadd_pd(p[s1], sphi, m);
    m = _mm256_fmadd_pd(p[c2], c2phi, m);
    m = _mm256_fnmadd_pd(p[s2], s2phi, m);
    const __m256d u = _mm256_div_pd(_mm256_sub_pd(rho, p[rho0]), p[drho]);
    const __m256d U = _mm256_add_pd(_mm256_fmadd_pd(u, u, one), m);
    const __m256d E = exp_pd(_mm256_sub_pd(zero, _mm256_div_pd(U, p[temp])));
    const __m256d th = _mm256_mul_pd(p[j0], E);
    const __m256d g = _mm256_sub_pd(one, _mm256_div_pd(U, p[mu]));
    const __m256d gp = _mm256_max_pd(g, zero);
    const __m256d g12 = _mm256_sqrt_pd(gp);
    const __m256d tfshape = _mm256_mul_pd(gp, g12);
    L.model = _mm256_fmadd_pd(p[k0], tfshape, th);
    if (!with_jacobian) return;
    const __m256d onehalf = set1(1.5);
    const __m256d k0g12 = _mm256_mul_pd(p[k0], g12);
    const __m256d dMdU = _mm256_sub_pd(_mm256_sub_pd(zero, _mm256_div_pd(th, p[temp])),
                                       _mm256_div_pd(_mm256_mul_pd(onehalf, k0g12), p[mu]));
    const __m256d dUdrho = _mm256_div_pd(_mm256_mul_pd(two, u), p[drho]);
    const __m256d inv_rho = _mm256_div_pd(one, rho);
    __m256d dmdphi = _mm256_mul_pd(p[c1], sphi);
    dmdphi = _mm256_fmadd_pd(p[s1], cphi, dmdphi);
    dmdphi = _mm256_fmadd_pd(_mm256_mul_pd(two, p[c2]), s2phi, dmdphi);
    dmdphi = _mm256_fmadd_pd(_mm256_mul_pd(two, p[s2]), c2phi, dmdphi);
    dmdphi = _mm256_sub_pd(zero, dmdphi);
    L.jac[j0] = E;
    L.jac[k0] = tfshape;
    L.jac[mu] = _mm256_div_pd(_mm256_mul_pd(_mm256_mul_pd(onehalf, k0g12), U), _mm256_mul_pd(p[mu], p[mu]));
    L.jac[temp] = _mm256_div_pd(_mm256_mul_pd(th, U), _mm256_mul_pd(p[temp], p[temp]));
    L.jac[rho0] = _mm256_sub_pd(zero, _mm256_mul_pd(dMdU, dUdrho));
    L.jac[drho] = _mm256_mul_pd(dMdU, _mm256_div_pd(_mm256_mul_pd(_mm256_mul_pd(two, u), u), _mm256_sub_pd(zero, p[drho])));
    L.jac[c1] = _mm256_mul_pd(dMdU, cphi);
    L.jac[s1] = _mm256_sub_pd(zero, _mm256_mul_pd(dMdU, sphi));
    L.jac[c2] = _mm256_mul_pd(dMdU, c2phi);
    L.jac[s2] = _mm256_sub_pd(zero, _mm256_mul_pd(dMdU, s2phi));
    const __m256d dmr = _mm256_mul_pd(dMdU, dUdrho);
    L.jac[ec] = _mm256_mul_pd(dmr, _mm256_mul_pd(_mm256_mul_pd(set1(0.5), diff), inv_rho));
    L.jac[es] = _mm256_mul_pd(dmr, _mm256_mul_pd(dxy, inv_rho));
    const __m256d onepe = _mm256_add_pd(one, p[ec]), oneme = _mm256_sub_pd(one, p[ec]);
    const __m256d drdcx = _mm256_sub_pd(zero, _mm256_mul_pd(_mm256_fmadd_pd(onepe, dx, _mm256_mul_pd(p[es], dy)), inv_rho));
    const __m256d drdcy = _mm256_sub_pd(zero, _mm256_mul_pd(_mm256_fmadd_pd(oneme, dy, _mm256_mul_pd(p[es], dx)), inv_rho));
    const __m256d dphx = _mm256_div_pd(dy, r02), dphy = _mm256_div_pd(dx, r02);
    L.jac[cx] = _mm256_mul_pd(dMdU, _mm256_fmadd_pd(dUdrho, drdcx, _mm256_mul_pd(dmdphi, dphx)));
    L.jac[cy] = _mm256_mul_pd(dMdU, _mm256_fnmadd_pd(dmdphi, dphy, _mm256_mul_pd(dUdrho, drdcy)));
}

inline __m256d load_partial(const double* p, std::size_t count) {
    alignas(32) double tmp[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < count; ++i) tmp[i] = p[i];
    return _mm256_load_pd(tmp);
}

}  // namespace

void ring_model_avx2(const RingPixels& px, const double* p, double* out) {
    const Params P(p);
    Lanes L;
    std::size_t i = 0;
    for (; i + 4 <= px.n; i += 4) {
        eval4(_mm256_loadu_pd(px.x + i), _mm256_loadu_pd(px.y + i), P, L, false);
        _mm256_storeu_pd(out + i, L.model);
    }
    if (i < px.n) {
        const std::size_t rest = px.n - i;
        eval4(load_partial(px.x + i, rest), load_partial(px.y + i, rest), P, L, false);
        alignas(32) double tmp[4];
        _mm256_store_pd(tmp, L.model);
        for (std::size_t k = 0; k < rest; ++k) out[i + k] = tmp[k];
    }
}

RingNormal ring_normal_avx2(const RingPixels& px, const double* p, bool with_jacobian) {
    constexpr int NP = ring_param_count;
    const Params P(p);
    Lanes L;
    __m256d jtj[NP * (NP + 1) / 2];
    __m256d jtr[NP];
    for (auto& v : jtj) v = _mm256_setzero_pd();
    for (auto& v : jtr) v = _mm256_setzero_pd();
    __m256d chi = _mm256_setzero_pd();

    auto accumulate = [&](__m256d r) {
        chi = _mm256_fmadd_pd(r, r, chi);
        if (!with_jacobian) return;
        int idx = 0;
        for (int a = 0; a < NP; ++a) {
            jtr[a] = _mm256_fmadd_pd(L.jac[a], r, jtr[a]);
            for (int b = a; b < NP; ++b, ++idx) jtj[idx] = _mm256_fmadd_pd(L.jac[a], L.jac[b], jtj[idx]);
        }
    };

    std::size_t i = 0;
    for (; i + 4 <= px.n; i += 4) {
        eval4(_mm256_loadu_pd(px.x + i), _mm256_loadu_pd(px.y + i), P, L, with_jacobian);
        accumulate(_mm256_sub_pd(_mm256_loadu_pd(px.data + i), L.model));
    }
    if (i < px.n) {
        const std::size_t rest = px.n - i;
        eval4(load_partial(px.x + i, rest), load_partial(px.y + i, rest), P, L, with_jacobian);
        // zero the unused lanes so they add nothing
        alignas(32) double mask[4] = {0.0, 0.0, 0.0, 0.0};
        for (std::size_t k = 0; k < rest; ++k) mask[k] = 1.0;
        const __m256d mk = _mm256_load_pd(mask);
        L.model = _mm256_mul_pd(L.model, mk);
        if (with_jacobian)
            for (auto& v : L.jac) v = _mm256_mul_pd(v, mk);
        accumulate(_mm256_sub_pd(load_partial(px.data + i, rest), L.model));
    }

    RingNormal ne;
    ne.chi2 = hsum(chi);
    if (with_jacobian) {
        int idx = 0;
        for (int a = 0; a < NP; ++a) {
            ne.Jtr[a] = hsum(jtr[a]);
            for (int b = a; b < NP; ++b, ++idx) {
                const double v = hsum(jtj[idx]);
                ne.JtJ[a * NP + b] = v;
                ne.JtJ[b * NP + a] = v;
            }
        }
    }
    return ne;
}

}  // namespace taap::simd::detail
