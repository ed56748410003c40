#include <algorithm>
#include <cmath>
#include <limits>

#include "taap/simd.hpp"

namespace taap::simd::detail {

TaapSum taap_phase_average_scalar(const TaapInput& in) {
    double sum = 0.0;
    double bmin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < in.n; ++k) {
        const double s = in.sin_theta[k];
        const double bx = in.b0[0] + s * in.bm[0];
        const double by = in.b0[1] + s * in.bm[1];
        const double bz = in.b0[2] + s * in.bm[2];
        const double bperp2 = bx * bx + by * by;
        const double b = std::sqrt(bperp2 + bz * bz);
        bmin = std::min(bmin, b);
        const double det = in.gamma * b - in.omega_rf;
        const double om = in.projected ? in.omega_rabi * std::sqrt(bperp2) / b : in.omega_rabi;
        sum += std::sqrt(det * det + om * om);
    }
    return {sum / static_cast<double>(in.n), bmin};
}

namespace {

struct PixelEval {
    double model;
    double jac[ring_param_count];
};

inline void eval_pixel(double x, double y, const double* p, PixelEval& e, bool with_jacobian) {
    const double dx = x - p[cx], dy = y - p[cy];
    const double dxx = dx * dx, dyy = dy * dy, dxy = dx * dy;
    const double r02 = std::max(dxx + dyy, 1e-300);
    const double inv_r0 = 1.0 / std::sqrt(r02);
    const double cphi = dx * inv_r0, sphi = dy * inv_r0;
    const double c2phi = (dxx - dyy) / r02, s2phi = 2.0 * dxy / r02;
    const double rho2 = std::max(dxx + dyy + p[ec] * (dxx - dyy) + 2.0 * p[es] * dxy, 1e-300);
    const double rho = std::sqrt(rho2);
    const double m = p[c1] * cphi - p[s1] * sphi + p[c2] * c2phi - p[s2] * s2phi;
    const double u = (rho - p[rho0]) / p[drho];
    const double U = u * u + 1.0 + m;
    const double E = std::exp(-U / p[temp]);
    const double th = p[j0] * E;
    const double g = 1.0 - U / p[mu];
    const double g12 = g > 0.0 ? std::sqrt(g) : 0.0;
    const double gp = g > 0.0 ? g : 0.0;
    e.model = th + p[k0] * gp * g12;
    if (!with_jacobian) return;
    const double dMdU = -th / p[temp] - 1.5 * p[k0] * g12 / p[mu];
    const double dUdrho = 2.0 * u / p[drho];
    const double inv_rho = 1.0 / rho;
    const double dmdphi = -p[c1] * sphi - p[s1] * cphi - 2.0 * p[c2] * s2phi - 2.0 * p[s2] * c2phi;
    e.jac[j0] = E;
    e.jac[k0] = gp * g12;
    e.jac[mu] = 1.5 * p[k0] * g12 * U / (p[mu] * p[mu]);
    e.jac[temp] = th * U / (p[temp] * p[temp]);
    e.jac[rho0] = dMdU * (-dUdrho);
    e.jac[drho] = dMdU * (-2.0 * u * u / p[drho]);
    e.jac[c1] = dMdU * cphi;
    e.jac[s1] = -dMdU * sphi;
    e.jac[c2] = dMdU * c2phi;
    e.jac[s2] = -dMdU * s2phi;
    e.jac[ec] = dMdU * dUdrho * 0.5 * (dxx - dyy) * inv_rho;
    e.jac[es] = dMdU * dUdrho * dxy * inv_rho;
    const double drdcx = -((1.0 + p[ec]) * dx + p[es] * dy) * inv_rho;
    const double drdcy = -((1.0 - p[ec]) * dy + p[es] * dx) * inv_rho;
    e.jac[cx] = dMdU * (dUdrho * drdcx + dmdphi * dy / r02);
    e.jac[cy] = dMdU * (dUdrho * drdcy - dmdphi * dx / r02);
}

}  // namespace

void ring_model_scalar(const RingPixels& px, const double* p, double* out) {
    PixelEval e;
    for (std::size_t i = 0; i < px.n; ++i) {
        eval_pixel(px.x[i], px.y[i], p, e, false);
        out[i] = e.model;
    }
}

RingNormal ring_normal_scalar(const RingPixels& px, const double* p, bool with_jacobian) {
    constexpr int P = ring_param_count;
    RingNormal ne;
    PixelEval e;
    for (std::size_t i = 0; i < px.n; ++i) {
        eval_pixel(px.x[i], px.y[i], p, e, with_jacobian);
        const double r = px.data[i] - e.model;
        ne.chi2 += r * r;
        if (!with_jacobian) continue;
        for (int a = 0; a < P; ++a) {
            ne.Jtr[a] += e.jac[a] * r;
            for (int b = a; b < P; ++b) ne.JtJ[a * P + b] += e.jac[a] * e.jac[b];
        }
    }
    if (with_jacobian)
        for (int a = 0; a < P; ++a)
            for (int b = 0; b < a; ++b) ne.JtJ[a * P + b] = ne.JtJ[b * P + a];
    return ne;
}

}  // namespace taap::simd::detail
