#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "taap/cli.hpp"
#include "taap/errors.hpp"

namespace taap::cli {

using namespace constants;

namespace {

Verdict within_rel(std::string item, std::string q, double computed, double published, double tol) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g%%", tol * 100.0);
    return {std::move(item), std::move(q), computed, published, buf, std::abs(computed - published) <= tol * std::abs(published)};
}

Verdict within_abs(std::string item, std::string q, double computed, double published, double tol) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "+-%g", tol);
    return {std::move(item), std::move(q), computed, published, buf, std::abs(computed - published) <= tol};
}

Verdict within_factor(std::string item, std::string q, double computed, double published, double factor) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "factor %g", factor);
    const double r = computed / published;
    return {std::move(item), std::move(q), computed, published, buf, r <= factor && r >= 1.0 / factor};
}

Verdict info(std::string item, std::string q, double computed, double published) {
    return {std::move(item), std::move(q), computed, published, "reported", true, false};
}

std::vector<Verdict> freq_table() {
    const auto ra = potential::analytic_ring(field::reference_config());
    const auto tilted = potential::analytic_ring(field::reference_config(0.37), 436e-6);
    return {within_rel("freq-table", "f_r [Hz]", ra.omega_r / two_pi, 85.3, 0.01),
            within_rel("freq-table", "f_z [Hz]", ra.omega_z / two_pi, 46.2, 0.03),
            within_rel("freq-table", "f_phi at delta=0.37, R=436 um [Hz]", tilted.omega_phi / two_pi, 9.17, 0.15)};
}

std::vector<Verdict> centrifugal() {
    const double R = transport::centrifugal_radius(436e-6, two_pi * 10.0, two_pi * 85.3);
    const double L = transport::angular_momentum(443.4e-6, two_pi * 10.0, field::rubidium87());
    return {within_rel("centrifugal", "R(2pi*10 rad/s) [um]", R * 1e6, 443.4, 0.005),
            within_rel("centrifugal", "L(443.4 um, 2pi*10 rad/s) [hbar]", L, 17000.0, 0.02)};
}

std::vector<Verdict> mach_item() {
    const auto sp = field::rubidium87();
    const double omega_ho = two_pi * std::cbrt(46.0 * 85.0 * 7.8);
    const double n = imaging::peak_density(3e5, omega_ho, sp);
    const double c = imaging::speed_of_sound(n, sp);
    const double v = two_pi * 10.0 * 443e-6;
    return {info("mach", "n_max [1/m^3]", n, 8.8e19),
            within_rel("mach", "c_max [mm/s]", c * 1e3, 1.75, 0.02),
            within_abs("mach", "Mach number", imaging::mach(v, c), 16.0, 0.5),
            info("mach", "density variation at dE = kB*80 pK", imaging::density_variation(k_B * 80e-12, 27.8e-3, sp), 1e-5)};
}

std::vector<Verdict> corrugation() {
    return {within_factor("corrugation", "exp(-kz)/sqrt(kz) at k=1/mm, z=50 mm",
                          imaging::corrugation_attenuation(1e3, 50e-3), 3e-23, 1.5)};
}

// Peak-to-peak of the fitted modulation after a fit of a synthetic image built from it.
double flatness_pipeline(double h1, double phi1, double h2, double phi2, double T, double noise, std::uint64_t seed) {
    imaging::RingFitResult p;
    p.j0 = 1.0;
    p.k0 = 0.5;
    p.rho0 = 436e-6;
    p.delta_rho = 20e-6;
    p.mu_fit = 2.0;
    p.h1 = h1;
    p.phi1 = phi1;
    p.h2 = h2;
    p.phi2 = phi2;
    const auto grid = imaging::ImageGrid::centered(600e-6, 6e-6);
    auto img = imaging::synth_ring_od(p, grid);
    if (noise > 0.0) {
        const double peak = *std::max_element(img.data.begin(), img.data.end());
        imaging::add_gaussian_noise(img, noise * peak, seed);
    }
    const auto f = imaging::fit_ring_image(img);
    return imaging::flatness_from_fit(f, T);
}

std::vector<Verdict> flatness_static(std::uint64_t seed) {
    const double deg = pi / 180.0;
    const double dU = flatness_pipeline(0.11, -118 * deg, 0.20, 115 * deg, 502 * nK, 0.0, seed);
    const auto e = imaging::modulation_extrema(0.11, -118 * deg, 0.20, 115 * deg);
    const double oracle = k_B * 502 * nK * (e.max - e.min);
    const auto sp = field::rubidium87();
    return {within_rel("flatness-static", "Delta U [nK]", dU / (k_B * nK), 250.0, 0.05),
            info("flatness-static", "Delta U dense-scan oracle [nK]", oracle / (k_B * nK), 250.0),
            info("flatness-static", "Delta z [um]", dU / (sp.mass * sp.gravity) * 1e6, 2.4)};
}

std::vector<Verdict> flatness_moving(std::uint64_t seed) {
    const double T = 28 * nK;
    // the fitted phases are not published; scan the relative phase for the smallest peak-to-peak
    double best = 1e300, best_dphi = 0.0;
    for (int k = 0; k < 720; ++k) {
        const double d = two_pi * k / 720;
        const auto e = imaging::modulation_extrema(0.003, 0.0, 0.002, d);
        if (e.max - e.min < best) {
            best = e.max - e.min;
            best_dphi = d;
        }
    }
    const double dU = flatness_pipeline(0.003, 0.0, 0.002, best_dphi, T, 0.0, seed);
    const double bound = 2.0 * (0.003 + 0.002) * k_B * T;
    Verdict b{"flatness-moving", "Delta U <= 2(h1+h2) kB T [pK]", dU / (k_B * 1e-12), bound / (k_B * 1e-12), "upper bound",
              dU <= bound * (1.0 + 1e-9)};
    Verdict t = info("flatness-moving", "closest reachable Delta U to the quoted value [pK]", dU / (k_B * 1e-12), 189.0);
    return {b, t};
}

// Linear least squares of y(t) = C + A cos(w t) + B sin(w t); returns hypot(A, B).
double sloshing_amplitude(const std::vector<double>& t, const std::vector<double>& y, double w) {
    Eigen::MatrixXd M(static_cast<Eigen::Index>(t.size()), 3);
    Eigen::VectorXd Y(static_cast<Eigen::Index>(t.size()));
    for (std::size_t i = 0; i < t.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        M(k, 0) = 1.0;
        M(k, 1) = std::cos(w * t[i]);
        M(k, 2) = std::sin(w * t[i]);
        Y(k) = y[i];
    }
    const Eigen::Vector3d c = M.colPivHouseholderQr().solve(Y);
    return std::hypot(c(1), c(2));
}

std::vector<Verdict> bangbang() {
    const double w = two_pi * 7.76, acc = two_pi * 50.0, ta = 0.2, hold = 1.0;
    transport::PendulumModel model;
    model.omega_phi = w;
    model.restoring = transport::Restoring::harmonic;
    const double dphi = transport::bang_bang_jump(acc, w);

    auto run = [&](bool jumps, double& accel_amp, double& hold_max) {
        auto s = transport::bang_bang_schedule(acc, ta, hold, w);
        if (!jumps) s.jump_start = s.jump_end = 0.0;
        const auto tr = transport::integrate_pendulum(s, model, {}, 1e-4, s.t_end());
        std::vector<double> ts, ys;
        hold_max = 0.0;
        for (const auto& p : tr) {
            if (p.t == 0.0) continue;  // before the first jump
            const double rel = p.phi - transport::trap_trajectory(s, p.t, transport::Side::left).phi;
            if (p.t <= ta) {
                ts.push_back(p.t);
                ys.push_back(rel);
            } else {
                hold_max = std::max(hold_max, std::abs(rel));
            }
        }
        accel_amp = sloshing_amplitude(ts, ys, w);
    };
    double a_jump = 0, h_jump = 0, a_free = 0, h_free = 0;
    run(true, a_jump, h_jump);
    run(false, a_free, h_free);
    const double residual = std::max(a_jump, h_jump);
    Verdict r{"bangbang", "residual / (phi_ddot/omega^2) with jumps", residual / dphi, 0.0, "< 1e-3",
              residual < 1e-3 * dphi};
    return {r, within_rel("bangbang", "sloshing amplitude without jumps [rad]", a_free, dphi, 0.02),
            info("bangbang", "post-ramp sloshing without jumps [rad]", h_free,
                 2.0 * dphi * std::abs(std::sin(0.5 * w * ta)))};
}

std::vector<Verdict> tof(std::uint64_t seed) {
    const double Omega = two_pi * 10.0, R = 443e-6, T = 28 * nK;
    const auto sp = field::rubidium87();
    num::CounterRng rng(seed, num::stream_id(num::Module::cli, 11));
    const double sv = std::sqrt(k_B * T / sp.mass);
    const double sr = imaging::thermal_width(T, two_pi * 85.3, sp.mass);
    std::vector<imaging::Atom> atoms(100000);
    for (auto& a : atoms) {
        const double phi = rng.uniform(0.0, two_pi), rho = R + sr * rng.normal();
        a.r = {rho * std::cos(phi), rho * std::sin(phi), sr * rng.normal()};
        a.v = {-Omega * rho * std::sin(phi) + sv * rng.normal(), Omega * rho * std::cos(phi) + sv * rng.normal(),
               sv * rng.normal()};
    }
    std::vector<double> ts, rs;
    for (int k = 0; k < 8; ++k) {
        const double t = (2.0 + 4.0 * k) * 1e-3;
        ts.push_back(t);
        rs.push_back(imaging::cloud_radius(imaging::tof_expand(atoms, t)));
    }
    const auto f = imaging::fit_tof_radius(rs, ts);
    return {within_rel("tof", "recovered Omega/2pi [Hz] vs injected 10", f.Omega / two_pi, 10.0, 0.01),
            info("tof", "recovered Omega/2pi [Hz] vs quoted 10.01", f.Omega / two_pi, 10.01)};
}

}  // namespace

const std::vector<std::string>& reproduce_items() {
    static const std::vector<std::string> items{"freq-table",      "centrifugal",     "mach",     "corrugation",
                                                "flatness-static", "flatness-moving", "bangbang", "tof"};
    return items;
}

std::vector<Verdict> reproduce(const std::string& item, std::uint64_t seed) {
    if (item == "freq-table") return freq_table();
    if (item == "centrifugal") return centrifugal();
    if (item == "mach") return mach_item();
    if (item == "corrugation") return corrugation();
    if (item == "flatness-static") return flatness_static(seed);
    if (item == "flatness-moving") return flatness_moving(seed);
    if (item == "bangbang") return bangbang();
    if (item == "tof") return tof(seed);
    std::string valid;
    for (const auto& i : reproduce_items()) valid += " " + i;
    throw ConfigError("unknown item '" + item + "'; valid items:" + valid + " all");
}

int cmd_reproduce(const std::string& item, const Scenario& s, const RunContext& ctx) {
    std::vector<std::string> items;
    if (item == "all") {
        items = reproduce_items();
    } else {
        const auto& all = reproduce_items();
        if (std::find(all.begin(), all.end(), item) == all.end()) reproduce(item, s.seed);  // throws with the list
        items = {item};
    }
    nlohmann::json report = nlohmann::json::array();
    bool all_pass = true;
    for (const auto& it : items) {
        for (const auto& v : reproduce(it, s.seed)) {
            if (v.asserted && !v.pass) all_pass = false;
            const char* tag = !v.asserted ? "INFO" : v.pass ? "PASS" : "FAIL";
            if (ctx.log && !ctx.quiet) {
                char buf[512];
                std::snprintf(buf, sizeof buf, "%-4s %-16s %-52s computed %-12.5g published %-12.5g tol %s", tag,
                              v.item.c_str(), v.quantity.c_str(), v.computed, v.published, v.tolerance.c_str());
                *ctx.log << buf << '\n';
            }
            report.push_back({{"item", v.item},
                              {"quantity", v.quantity},
                              {"computed", v.computed},
                              {"published", v.published},
                              {"tolerance", v.tolerance},
                              {"asserted", v.asserted},
                              {"pass", v.pass}});
        }
    }
    write_json(s.out_dir / ("reproduce_" + item + ".json"), report);
    return all_pass ? ok : acceptance_failure;
}

}  // namespace taap::cli
