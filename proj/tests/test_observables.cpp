#include <doctest.h>

#include <cmath>

#include "taap/errors.hpp"
#include "taap/imaging.hpp"

using namespace taap;
using namespace taap::imaging;
using namespace taap::constants;

TEST_CASE("density variation") {
    const auto sp = field::rubidium87();
    const double v = 27.8e-3;
    CHECK(density_variation(0.0, v, sp) == 0.0);
    CHECK(density_variation(k_B * 80e-12, v, sp) == doctest::Approx(9.9e-6).epsilon(0.01));
    CHECK(density_variation(-0.5 * sp.mass * v * v, v, sp) == doctest::Approx(-1.0));
    CHECK_THROWS_AS(density_variation(-0.6 * sp.mass * v * v, v, sp), FlowBlocked);
    double prev = -2.0;
    for (double e = -0.4; e < 1.0; e += 0.1) {
        const double d = density_variation(e * sp.mass * v * v, v, sp);
        CHECK(d > prev);
        prev = d;
    }
    // small-barrier linearization
    const double x = 0.019 / 2.0;
    CHECK(density_variation(x * sp.mass * v * v, v, sp) == doctest::Approx(x).epsilon(0.01));
}

TEST_CASE("speed of sound and peak density") {
    const auto sp = field::rubidium87();
    CHECK(speed_of_sound(0.0, sp) == 0.0);
    const double w = two_pi * std::cbrt(46.0 * 85.0 * 7.8);
    CHECK(w / two_pi == doctest::Approx(31.2).epsilon(2e-3));
    const double n = peak_density(3e5, w, sp);
    CHECK(n == doctest::Approx(8.8e19).epsilon(0.01));
    CHECK(speed_of_sound(n, sp) * 1e3 == doctest::Approx(1.76).epsilon(0.01));
    CHECK(speed_of_sound(4 * n, sp) == doctest::Approx(2 * speed_of_sound(n, sp)));
    CHECK(peak_density(2 * 3e5, w, sp) / n == doctest::Approx(std::pow(2.0, 0.4)));
    CHECK(peak_density(3e5, 2 * w, sp) / n == doctest::Approx(std::pow(2.0, 1.2)));
    CHECK(mach(two_pi * 10 * 443e-6, speed_of_sound(n, sp)) == doctest::Approx(15.9).epsilon(0.01));
}

TEST_CASE("corrugation attenuation") {
    CHECK(corrugation_attenuation(1.0, 1.0) == doctest::Approx(std::exp(-1.0)));
    CHECK(corrugation_attenuation(1e3, 50e-3) == doctest::Approx(2.7e-23).epsilon(0.02));
    CHECK(corrugation_attenuation(1.0, 2.0) > corrugation_attenuation(1.0, 3.0));
    CHECK_THROWS_AS(corrugation_attenuation(1.0, 0.0), DomainError);
    CHECK_THROWS_AS(corrugation_attenuation(-1.0, 1.0), DomainError);
}

TEST_CASE("time of flight") {
    CHECK(tof_model(400e-6, 50.0, 0.0) == 400e-6);
    CHECK(tof_model(1.0, two_pi * 10, 0.030) == doctest::Approx(2.134).epsilon(1e-3));
    CHECK(tof_model(1.0, 20.0, 0.5) == doctest::Approx(tof_model(1.0, 40.0, 0.25)));

    std::vector<Atom> atoms(2);
    atoms[0] = {{1e-3, 0, 0}, {0, 0.01, 0}};
    atoms[1] = {{-1e-3, 0, 0}, {0, -0.01, 0}};
    const auto p = tof_expand(atoms, 0.01);
    CHECK(p[0].y == doctest::Approx(1e-4));
    CHECK(p[0].z == doctest::Approx(-0.5 * g * 1e-4));
    CHECK(cloud_radius(p) == doctest::Approx(std::hypot(1e-3, 1e-4)));

    std::vector<double> t, r;
    for (int k = 0; k < 8; ++k) {
        t.push_back((2.0 + 4.0 * k) * 1e-3);
        r.push_back(tof_model(443e-6, two_pi * 10, t.back()));
    }
    const auto f = fit_tof_radius(r, t);
    CHECK(f.Omega == doctest::Approx(two_pi * 10).epsilon(1e-8));
    CHECK(f.R0 == doctest::Approx(443e-6).epsilon(1e-8));
    CHECK_THROWS_AS(fit_tof_radius({1.0, 2.0}, {0.0, 1.0}), DomainError);
}

TEST_CASE("rotating thermal ring: TOF recovers the rotation rate") {
    num::CounterRng rng(51, 1);
    const double Omega = two_pi * 10, R = 443e-6, sv = std::sqrt(k_B * 28 * nK / m_Rb87);
    std::vector<Atom> atoms(50000);
    for (auto& a : atoms) {
        const double phi = rng.uniform(0, two_pi);
        a.r = cylindrical(R + 5e-6 * rng.normal(), phi, 0.0);
        a.v = {-Omega * a.r.y + sv * rng.normal(), Omega * a.r.x + sv * rng.normal(), sv * rng.normal()};
    }
    std::vector<double> t, r;
    for (int k = 0; k < 8; ++k) {
        t.push_back((2.0 + 4.0 * k) * 1e-3);
        r.push_back(cloud_radius(tof_expand(atoms, t.back())));
    }
    const auto f = fit_tof_radius(r, t);
    CHECK(f.Omega == doctest::Approx(Omega).epsilon(0.01));
}
