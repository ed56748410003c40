#include <doctest.h>
#include <nlohmann/json.hpp>

#include "taap/errors.hpp"
#include "taap/field.hpp"
#include "taap/numerics.hpp"

using namespace taap;
using namespace taap::field;
using namespace taap::constants;

TEST_CASE("rf coupling at the resonant radius equals the quoted Rabi frequency") {
    const auto c = reference_config();
    const double R = hbar * c.omega_rf / (std::abs(c.species.g_F) * mu_B * c.alpha);
    CHECK(R == doctest::Approx(520.7e-6).epsilon(1e-3));
    CHECK(rf_coupling(c, {R, 0, 0}, 0.0) == doctest::Approx(two_pi * 357e3).epsilon(1e-12));
    CHECK(c.rabi_frequency() == doctest::Approx(two_pi * 357e3).epsilon(1e-12));
    CHECK(c.B_rf / gauss == doctest::Approx(0.5099).epsilon(1e-3));
}

TEST_CASE("projected coupling vanishes where the local field is vertical") {
    const auto c = reference_config();
    CHECK(std::abs(rf_coupling(c, {0, 0, 100e-6}, 0.0)) < 1e-6);
    auto u = c;
    u.coupling = Coupling::uniform;
    CHECK(rf_coupling(u, {0, 0, 100e-6}, 0.0) == doctest::Approx(two_pi * 357e3));
}

TEST_CASE("rf coupling is linear in B_rf") {
    auto c = reference_config();
    const Position r{520.7e-6, 0, 0};
    const double w1 = rf_coupling(c, r, 0.3);
    c.B_rf *= 2.0;
    CHECK(rf_coupling(c, r, 0.3) == doctest::Approx(2.0 * w1).epsilon(1e-14));
    CHECK(rf_coupling(c, {520.7e-6, 0, 0}, 0.0) == doctest::Approx(two_pi * 714e3).epsilon(1e-12));
}

TEST_CASE("quadrupole field is linear in position and gradient, divergence free") {
    num::CounterRng rng(3, num::stream_id(num::Module::test, 1));
    for (int i = 0; i < 50; ++i) {
        const Position a{rng.uniform(-1e-3, 1e-3), rng.uniform(-1e-3, 1e-3), rng.uniform(-1e-3, 1e-3)};
        const Position b{rng.uniform(-1e-3, 1e-3), rng.uniform(-1e-3, 1e-3), rng.uniform(-1e-3, 1e-3)};
        const Field fa = quadrupole_field(0.7, a), fb = quadrupole_field(0.7, b), fab = quadrupole_field(0.7, a + b);
        CHECK((fab - fa - fb).norm() < 1e-15);
        CHECK((quadrupole_field(1.4, a) - fa * 2.0).norm() < 1e-15);
        const double h = 1e-6;
        const double div = (quadrupole_field(0.7, a + Position{h, 0, 0}).x - quadrupole_field(0.7, a - Position{h, 0, 0}).x +
                            quadrupole_field(0.7, a + Position{0, h, 0}).y - quadrupole_field(0.7, a - Position{0, h, 0}).y +
                            quadrupole_field(0.7, a + Position{0, 0, h}).z - quadrupole_field(0.7, a - Position{0, 0, h}).z) /
                           (2 * h);
        CHECK(std::abs(div) < 1e-9 * 0.7);
    }
}

TEST_CASE("instantaneous field is periodic in the modulation phase") {
    const auto c = reference_config(0.37);
    const Position r{300e-6, -120e-6, 40e-6};
    for (double th : {0.0, 0.7, 2.9, 5.5}) {
        const Field a = instantaneous_field(c, r, th), b = instantaneous_field(c, r, th + two_pi);
        CHECK((a - b).norm() < 1e-15 * a.norm() + 1e-20);
    }
}

TEST_CASE("rf coupling is axially symmetric without tilt") {
    const auto c = reference_config();
    const double w0 = rf_coupling(c, cylindrical(480e-6, 0.0, 30e-6), 1.1);
    for (double phi : {0.4, 1.9, 3.3, 5.8}) CHECK(rf_coupling(c, cylindrical(480e-6, phi, 30e-6), 1.1) == doctest::Approx(w0).epsilon(1e-13));
}

TEST_CASE("zero field at the quadrupole node raises ZeroField") {
    const auto c = reference_config();
    CHECK_THROWS_AS(rf_coupling(c, {0, 0, 0}, 0.0), ZeroField);
}

TEST_CASE("field config JSON round trip and validation") {
    const auto c = reference_config(0.2);
    const auto j = field_config_to_json(c);
    const auto d = field_config_from_json(j);
    CHECK(d.alpha == doctest::Approx(c.alpha));
    CHECK(d.B_m == doctest::Approx(c.B_m));
    CHECK(d.delta == doctest::Approx(0.2));
    CHECK(d.B_rf == doctest::Approx(c.B_rf));
    CHECK(d.omega_m == doctest::Approx(c.omega_m));

    auto both = j;
    both["Omega_rf_kHz"] = 357.0;
    CHECK_THROWS_AS(field_config_from_json(both), ConfigError);
    auto neg = j;
    neg["alpha_G_per_cm"] = -1.0;
    CHECK_THROWS_AS(field_config_from_json(neg), ConfigError);
    auto bad = j;
    bad["coupling"] = "circular";
    CHECK_THROWS_AS(field_config_from_json(bad), ConfigError);
}
