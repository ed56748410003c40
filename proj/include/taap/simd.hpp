#pragma once

#include <array>
#include <cstddef>

namespace taap::simd {

enum class Isa { scalar, avx2 };

const char* isa_name(Isa isa);
bool isa_supported(Isa isa);
// Best supported ISA unless TAAP_SIMD=scalar|avx2 says otherwise.
Isa active_isa();
void set_active_isa(Isa isa);

// Slow field at phase node k: b0 + s[k] * bm, with s[k] = sin(theta_k).
struct TaapInput {
    double b0[3];
    double bm[3];
    const double* sin_theta;
    std::size_t n;
    double gamma;       // |g_F| mu_B / hbar
    double omega_rf;
    double omega_rabi;  // kappa |g_F| mu_B B_rf / hbar
    bool projected;
};

struct TaapSum {
    double mean_root;  // mean over nodes of sqrt(Delta^2 + Omega^2), rad/s
    double min_field;  // smallest |B| met, T
};

TaapSum taap_phase_average(const TaapInput& in, Isa isa);
inline TaapSum taap_phase_average(const TaapInput& in) { return taap_phase_average(in, active_isa()); }

// Bimodal ring model over pixels. Coordinates and lengths share one unit.
// Parameter order of the Jacobian columns:
enum RingParam : int { j0, k0, rho0, drho, mu, c1, s1, c2, s2, cx, cy, ec, es, temp, ring_param_count };

struct RingPixels {
    const double* x;
    const double* y;
    const double* data;  // may be null for model evaluation
    std::size_t n;
};

struct RingNormal {
    std::array<double, ring_param_count * ring_param_count> JtJ{};
    std::array<double, ring_param_count> Jtr{};
    double chi2 = 0.0;
};

void ring_model(const RingPixels& px, const double* p, double* out, Isa isa);
// chi2 always; JtJ and Jtr (residual = data - model) when with_jacobian.
RingNormal ring_normal(const RingPixels& px, const double* p, bool with_jacobian, Isa isa);

inline void ring_model(const RingPixels& px, const double* p, double* out) { ring_model(px, p, out, active_isa()); }
inline RingNormal ring_normal(const RingPixels& px, const double* p, bool with_jacobian) {
    return ring_normal(px, p, with_jacobian, active_isa());
}

namespace detail {
TaapSum taap_phase_average_scalar(const TaapInput& in);
TaapSum taap_phase_average_avx2(const TaapInput& in);
void ring_model_scalar(const RingPixels& px, const double* p, double* out);
void ring_model_avx2(const RingPixels& px, const double* p, double* out);
RingNormal ring_normal_scalar(const RingPixels& px, const double* p, bool with_jacobian);
RingNormal ring_normal_avx2(const RingPixels& px, const double* p, bool with_jacobian);
}  // namespace detail

}  // namespace taap::simd
