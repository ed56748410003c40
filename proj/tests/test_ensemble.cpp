#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "taap/errors.hpp"
#include "taap/imaging.hpp"

using namespace taap;
using namespace taap::imaging;
using namespace taap::constants;

namespace {

const double m_rb = m_Rb87;

}  // namespace

TEST_CASE("thermal samples in a 1-D harmonic well have variance kT/(m w^2)") {
    const double w = two_pi * 50.0, T = 200 * nK;
    const double sigma = thermal_width(T, w, m_rb);
    const auto region = SamplingRegion::box({-7 * sigma, -1e-5, -1e-5}, {7 * sigma, 1e-5, 1e-5});
    const std::size_t N = 100000;
    const auto pos = sample_thermal([&](const Position& r) { return 0.5 * m_rb * w * w * r.x * r.x; }, T, N, region, 3);
    REQUIRE(pos.size() == N);
    std::vector<double> x;
    for (const auto& p : pos) x.push_back(p.x);
    const double var = num::variance(x);
    const double s2 = sigma * sigma;
    CHECK(std::abs(var - s2) < 3.0 * s2 * std::sqrt(2.0 / static_cast<double>(N)));
}

TEST_CASE("flat potential gives uniform samples") {
    const auto region = SamplingRegion::box({0, 0, 0}, {1e-3, 2e-3, 3e-3});
    const auto pos = sample_thermal([](const Position&) { return 0.0; }, 1e-9, 20000, region, 4);
    std::vector<double> x, y;
    for (const auto& p : pos) {
        x.push_back(p.x);
        y.push_back(p.y);
    }
    const auto ux = [](double v) { return std::clamp(v / 1e-3, 0.0, 1.0); };
    const auto uy = [](double v) { return std::clamp(v / 2e-3, 0.0, 1.0); };
    CHECK(num::kolmogorov_sf(num::ks_statistic(x, ux), x.size()) > 0.01);
    CHECK(num::kolmogorov_sf(num::ks_statistic(y, uy), y.size()) > 0.01);
}

TEST_CASE("tilted ring: azimuthal histogram follows exp(a cos phi)") {
    RingPotential ring;
    ring.R = 436e-6;
    ring.delta = 0.37;
    const double T = 430 * nK;
    const auto region = ring_region(ring.R, thermal_width(T, ring.omega_r, m_rb), thermal_width(T, ring.omega_z, m_rb));
    const auto pos = sample_thermal([&](const Position& r) { return ring(r); }, T, 100000, region, 5);
    const double a = ring.delta * m_rb * g * ring.R / (2.0 * k_B * T);
    const int n_bins = 72;
    const auto obs = oracle::azimuth_histogram(pos, n_bins);
    const auto prob = oracle::von_mises_bins(a, n_bins);
    const auto t = num::chi_square_test(obs, prob);
    CHECK(t.p_value > 0.01);
    CHECK(t.dof > 10);
}

TEST_CASE("Thomas-Fermi samples in a 1-D harmonic well") {
    const double w = two_pi * 50.0, mu = k_B * 100 * nK;
    const double X = std::sqrt(2.0 * mu / (m_rb * w * w));
    const auto region = SamplingRegion::box({-1.2 * X, -1e-5, -1e-5}, {1.2 * X, 1e-5, 1e-5});
    const std::size_t N = 100000;
    const auto pos = sample_thomas_fermi([&](const Position& r) { return 0.5 * m_rb * w * w * r.x * r.x; }, mu, N, region, 6);
    double s2 = 0.0, xmax = 0.0;
    for (const auto& p : pos) {
        s2 += p.x * p.x;
        xmax = std::max(xmax, std::abs(p.x));
    }
    // density ~ 1 - x^2/X^2 gives <x^2> = X^2/5, var of x^2 is 2X^4/35 - X^4/25
    const double mean = s2 / static_cast<double>(N), sd = X * X * std::sqrt(2.0 / 35 - 1.0 / 25) / std::sqrt(static_cast<double>(N));
    CHECK(std::abs(mean - X * X / 5.0) < 4.0 * sd);
    CHECK(xmax <= X);
}

TEST_CASE("sampling is deterministic in the seed") {
    const auto region = SamplingRegion::box({-1, -1, -1}, {1, 1, 1});
    auto U = [](const Position& r) { return k_B * 1e-6 * r.norm(); };
    const auto a = sample_thermal(U, 1e-6, 5000, region, 17);
    const auto b = sample_thermal(U, 1e-6, 5000, region, 17);
    const auto c = sample_thermal(U, 1e-6, 5000, region, 18);
    REQUIRE(a.size() == b.size());
    bool same = true, differ = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        same = same && a[i].x == b[i].x && a[i].y == b[i].y && a[i].z == b[i].z;
        differ = differ || a[i].x != c[i].x;
    }
    CHECK(same);
    CHECK(differ);
}

TEST_CASE("sampling region far too large raises LowAcceptance") {
    const double w = two_pi * 500.0, T = 1 * nK;
    const auto region = SamplingRegion::box({-1e-2, -1e-2, -1e-2}, {1e-2, 1e-2, 1e-2});
    auto U = [&](const Position& r) { return 0.5 * m_rb * w * w * r.dot(r); };
    CHECK_THROWS_AS(sample_thermal(U, T, 1000, region, 1), LowAcceptance);
}

TEST_CASE("ensemble spec validation") {
    EnsembleSpec e;
    e.N_thermal = 10;
    CHECK_THROWS_AS(e.validate(), ConfigError);
    e.T = 1e-7;
    CHECK_NOTHROW(e.validate());
    e.N_bec = 5;
    CHECK_THROWS_AS(e.validate(), ConfigError);
}

TEST_CASE("render: single atom lands in the centre pixel") {
    const auto g = ImageGrid::centered(50e-6, 10e-6);
    const auto img = render_image(std::vector<Position>{{1e-7, 2e-7, 0}}, g);
    const std::size_t c = g.n_cols / 2, r = g.n_rows / 2;
    CHECK(img.at(r, c) == doctest::Approx(1.0 / (g.pixel_size * g.pixel_size)));
    CHECK(img.total() == doctest::Approx(1.0));
    double others = 0.0;
    for (double v : img.data) others += v;
    CHECK(others * g.pixel_size * g.pixel_size == doctest::Approx(1.0));
}

TEST_CASE("render: ring samples conserve atom number, blur conserves it too") {
    num::CounterRng rng(8, 1);
    std::vector<Position> pos(1000000);
    for (auto& p : pos) p = cylindrical(436e-6 + 15e-6 * rng.normal(), rng.uniform(0, two_pi), 0.0);
    const auto g = ImageGrid::centered(600e-6, 6e-6);
    auto img = render_image(pos, g);
    CHECK(img.total() == doctest::Approx(1e6).epsilon(1e-3));
    gaussian_blur(img, 6e-6);
    CHECK(img.total() == doctest::Approx(1e6).epsilon(1e-3));
}

TEST_CASE("render: analytic ring modulation survives binning") {
    const double h1 = 0.11, R = 436e-6, w = 20e-6;
    auto n2d = [&](double x, double y) {
        const double rho = std::hypot(x, y), phi = std::atan2(y, x);
        return std::exp(-(rho - R) * (rho - R) / (w * w)) * (1.0 + h1 * std::cos(phi));
    };
    const auto g = ImageGrid::centered(600e-6, 6e-6);
    const auto img = render_image(n2d, g, 4);
    const int nb = 36;
    const auto prof = azimuthal_profile(img, 0, 0, R - 2 * w, R + 2 * w, nb);
    double c1 = 0.0, c0 = 0.0;
    for (int k = 0; k < nb; ++k) {
        const double phi = (k + 0.5) * two_pi / nb;
        c0 += prof[static_cast<std::size_t>(k)] / nb;
        c1 += 2.0 * prof[static_cast<std::size_t>(k)] * std::cos(phi) / nb;
    }
    // bin averaging of cos over 10 degrees reduces the amplitude by sinc(pi/36)
    const double sinc = std::sin(pi / nb) / (pi / nb);
    CHECK(c1 / c0 == doctest::Approx(h1 * sinc).epsilon(0.02));
}

TEST_CASE("additive noise is reproducible with the right spread") {
    const auto g = ImageGrid::centered(300e-6, 3e-6);
    DensityImage a{g, std::vector<double>(g.size(), 0.0)}, b = a;
    add_gaussian_noise(a, 2.0, 77);
    add_gaussian_noise(b, 2.0, 77);
    CHECK(a.data == b.data);
    CHECK(std::sqrt(num::variance(a.data)) == doctest::Approx(2.0).epsilon(0.01));
}
