#include <doctest.h>

#include <cmath>

#include "taap/errors.hpp"
#include "taap/potential.hpp"

using namespace taap;
using namespace taap::potential;
using namespace taap::constants;

namespace {

double resonance_radius(const field::FieldConfig& c) {
    return hbar * c.omega_rf / (std::abs(c.species.g_F) * mu_B * c.alpha);
}

field::FieldConfig with_beta(double beta) {
    auto c = field::reference_config();
    c.coupling = field::Coupling::uniform;
    c.B_m = beta * hbar * c.omega_rf / (std::abs(c.species.g_F) * mu_B);
    return c;
}

}  // namespace

TEST_CASE("Larmor frequency") {
    const auto sp = field::rubidium87();
    CHECK(larmor_frequency({0, 0, 0}, sp) == 0.0);
    CHECK(larmor_frequency({0, 0, 3.645e-4}, sp) == doctest::Approx(two_pi * 2.55e6).epsilon(1e-3));
    CHECK(larmor_frequency({2e-4, 0, 0}, sp) == doctest::Approx(2.0 * larmor_frequency({1e-4, 0, 0}, sp)));
}

TEST_CASE("dressed potential limits") {
    const auto c = field::reference_config();
    const double R = resonance_radius(c);
    CHECK(adiabatic_potential(c, {R, 0, 0}, 0.0, false) ==
          doctest::Approx(std::abs(c.species.m_F) * hbar * two_pi * 357e3).epsilon(1e-12));
    // far detuned: |Delta| = 100 Omega
    const double Om = c.rabi_frequency();
    const double r_far = R * (1.0 + 100.0 * Om / c.omega_rf);
    const double V = adiabatic_potential(c, {r_far, 0, 0}, 0.0, false);
    CHECK(V == doctest::Approx(hbar * 100.0 * Om).epsilon(0.01));
}

TEST_CASE("phase-averaged potential without modulation equals the dressed potential") {
    auto c = field::reference_config();
    c.B_m = 0.0;
    const Position r{480e-6, 60e-6, -30e-6};
    CHECK(taap_potential(c, r) == doctest::Approx(adiabatic_potential(c, r, 1.234, false)).epsilon(1e-13));
}

TEST_CASE("gravity adds M g z exactly") {
    const auto c = field::reference_config();
    for (double z : {-200e-6, -10e-6, 0.0, 50e-6, 300e-6}) {
        const Position r{450e-6, 20e-6, z};
        const double dV = taap_potential(c, r, 64, true) - taap_potential(c, r, 64, false);
        CHECK(dV == doctest::Approx(c.species.mass * c.species.gravity * z).epsilon(1e-9).scale(1e-35));
    }
}

TEST_CASE("quadrature converges at the ring minimum") {
    auto c = field::reference_config();
    c.coupling = field::Coupling::uniform;
    CharacterizeOptions o;
    o.gravity = false;
    const auto ch = characterize_numeric(c, o);
    const Position r = ch.min_position;
    CHECK(taap_potential(c, r, 128) == doctest::Approx(taap_potential(c, r, 64)).epsilon(1e-10));
}

TEST_CASE("phase-averaged potential is axially symmetric without tilt") {
    const auto c = field::reference_config();
    const double V0 = taap_potential(c, cylindrical(470e-6, 0.0, -20e-6));
    for (double phi : {0.3, 1.7, 2.9, 4.4}) CHECK(taap_potential(c, cylindrical(470e-6, phi, -20e-6)) == doctest::Approx(V0).epsilon(1e-10));
}

TEST_CASE("analytic ring at the published parameters") {
    const auto ra = analytic_ring(field::reference_config());
    CHECK(ra.beta_m == doctest::Approx(0.384).epsilon(2e-3));
    CHECK(ra.omega_0 / two_pi == doctest::Approx(88.4).epsilon(1e-3));
    CHECK(ra.omega_r / two_pi == doctest::Approx(85.4).epsilon(1e-3));
    CHECK(ra.omega_z / two_pi == doctest::Approx(45.6).epsilon(1e-3));
    CHECK(ra.R_est * 1e6 == doctest::Approx(520.5).epsilon(1e-3));
    const auto tilted = analytic_ring(field::reference_config(0.37), 436e-6);
    CHECK(tilted.omega_phi / two_pi == doctest::Approx(10.27).epsilon(2e-3));
    CHECK(tilted.omega_phi == doctest::Approx(std::sqrt(0.37 * g / (2 * 436e-6))).epsilon(1e-12));
}

TEST_CASE("analytic ring in the shell limit and the small-beta expansion") {
    auto c = field::reference_config();
    c.B_m = 0.0;
    const auto ra = analytic_ring(c);
    CHECK(ra.omega_r == doctest::Approx(ra.omega_0).epsilon(1e-14));
    CHECK(ra.omega_z == doctest::Approx(0.0));
    for (double b : {0.02, 0.05}) {
        const auto rb = analytic_ring(with_beta(b));
        CHECK(rb.omega_r == doctest::Approx(rb.omega_0 * (1.0 - b * b / 4.0)).epsilon(b * b * b * b));
    }
}

TEST_CASE("numeric trap frequencies agree with the closed forms for moderate modulation") {
    CharacterizeOptions o;
    o.gravity = false;
    for (double b : {0.1, 0.384}) {
        const auto c = with_beta(b);
        const auto ra = analytic_ring(c);
        const auto ch = characterize_numeric(c, o);
        CHECK(ch.omega_r_num == doctest::Approx(ra.omega_r).epsilon(0.05));
        CHECK(ch.omega_z_num == doctest::Approx(ra.omega_z).epsilon(0.05));
    }
    const auto c = with_beta(0.005);
    const auto ch = characterize_numeric(c, o);
    CHECK(ch.omega_r_num == doctest::Approx(analytic_ring(c).omega_0).epsilon(0.01));
}

TEST_CASE("reference configuration without gravity: radial frequency and flat profile") {
    CharacterizeOptions o;
    o.gravity = false;
    const auto c = field::reference_config();
    const auto ch = characterize_numeric(c, o);
    CHECK(ch.omega_r_num == doctest::Approx(analytic_ring(c).omega_r).epsilon(0.05));
    double lo = 1e300, hi = -1e300;
    for (const auto& p : ch.azimuthal_profile) {
        lo = std::min(lo, p.V);
        hi = std::max(hi, p.V);
    }
    CHECK((hi - lo) / std::abs(ch.V_min) < 1e-6);
    CHECK(ch.omega_phi_num >= 0.0);
    CHECK(ch.omega_phi_num < two_pi * 0.01);
}

TEST_CASE("tilted gravity-supported ring: low point opposite the tilt direction, cosine profile") {
    field::FieldConfig c = field::reference_config(0.1);
    c.alpha = 1.0;
    c.B_m = 1.8e-4;
    c.coupling = field::Coupling::uniform;
    for (double phi0 : {0.0, 1.0}) {
        c.phi0 = phi0;
        const auto ch = characterize_numeric(c);
        CHECK(std::abs(std::remainder(ch.phi_min - (phi0 + pi), two_pi)) < 1e-3);
        // profile ~ A cos(phi - phi0) with A close to (delta/2) m g R
        double a = 0.0, mean = 0.0;
        const double n = static_cast<double>(ch.azimuthal_profile.size());
        for (const auto& p : ch.azimuthal_profile) mean += p.V / n;
        for (const auto& p : ch.azimuthal_profile) a += 2.0 * (p.V - mean) * std::cos(p.phi - phi0) / n;
        const double expected = 0.5 * c.delta * c.species.mass * g * ch.ring_radius;
        CHECK(a == doctest::Approx(expected).epsilon(0.1));
        CHECK(ch.omega_phi_num == doctest::Approx(std::sqrt(c.delta * g / (2.0 * ch.ring_radius))).epsilon(0.02));
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) CHECK(ch.hessian[i][j] == doctest::Approx(ch.hessian[j][i]).epsilon(1e-6));
    }
}

TEST_CASE("the published configuration holds no ring against gravity") {
    CHECK_THROWS_AS(characterize_numeric(field::reference_config()), NoMinimum);
}

TEST_CASE("adiabaticity margins") {
    const auto c = field::reference_config();
    const auto rep = adiabaticity_check(c, analytic_ring(c));
    CHECK(rep.omega_m_over_omega_r == doctest::Approx(58.8).epsilon(0.01));
    CHECK(rep.larmor_min_over_omega_m > 10.0);
    auto slow = c;
    slow.omega_m = two_pi * 50.0;
    CHECK_THROWS_AS(adiabaticity_check(slow, analytic_ring(slow)), AdiabaticityViolation);
    auto fast = c;
    fast.omega_m = two_pi * 50e6;
    CHECK_THROWS_AS(adiabaticity_check(fast, analytic_ring(fast)), AdiabaticityViolation);
}
