#include <algorithm>
#include <cmath>
#include <complex>
#include <ostream>

#include "taap/cli.hpp"
#include "taap/errors.hpp"

namespace taap::cli {

using nlohmann::json;
using namespace constants;

namespace {

void say(const RunContext& ctx, const std::string& s) {
    if (!ctx.quiet && ctx.log) *ctx.log << s << '\n';
}

double rel_dev(double num, double ref) { return ref != 0.0 ? (num - ref) / ref : 0.0; }

json adiabaticity_json(const potential::AdiabaticityReport& a) {
    return {{"omega_m_over_omega_r", a.omega_m_over_omega_r},
            {"omega_m_over_omega_z", a.omega_m_over_omega_z},
            {"larmor_min_over_omega_m", a.larmor_min_over_omega_m},
            {"larmor_min_rad_s", a.larmor_min}};
}

template <class Src>
json adiabaticity_block(const field::FieldConfig& c, const Src& src) {
    json j;
    try {
        j = adiabaticity_json(potential::adiabaticity_check(c, src));
        j["satisfied"] = true;
    } catch (const AdiabaticityViolation& e) {
        j["satisfied"] = false;
        j["message"] = e.what();
    }
    return j;
}

}  // namespace

int cmd_characterize(const Scenario& s, const RunContext& ctx) {
    const auto& c = s.field;
    c.validate();
    const auto ra = potential::analytic_ring(c);
    json out;
    out["config"] = field::field_config_to_json(c);
    out["gravity"] = s.characterize.gravity;
    json an = {{"R_m", ra.R_est},
               {"omega_0_rad_s", ra.omega_0},
               {"beta_m", ra.beta_m},
               {"omega_r_rad_s", ra.omega_r},
               {"omega_z_rad_s", ra.omega_z},
               {"omega_phi_rad_s", ra.omega_phi},
               {"V_bottom_J", ra.V_bottom}};
    out["analytic"] = an;
    out["lab_units"]["analytic"] = {{"R_um", ra.R_est * 1e6},
                                    {"f_r_Hz", ra.omega_r / two_pi},
                                    {"f_z_Hz", ra.omega_z / two_pi},
                                    {"f_phi_Hz", ra.omega_phi / two_pi}};
    say(ctx, "analytic: R = " + format_g(ra.R_est * 1e6, 6) + " um, f_r = " + format_g(ra.omega_r / two_pi, 5) +
                 " Hz, f_z = " + format_g(ra.omega_z / two_pi, 5) + " Hz, beta_m = " + format_g(ra.beta_m, 4));

    potential::TrapCharacterization ch;
    try {
        ch = potential::characterize_numeric(c, s.characterize);
    } catch (const NoMinimum& e) {
        out["numeric"] = nullptr;
        out["numeric_error"] = e.what();
        write_json(s.out_dir / "characterize.json", out);
        throw;
    }
    // analytic pendulum frequency at the numerically found radius
    const auto ra_num = potential::analytic_ring(c, ch.ring_radius);
    out["analytic"]["omega_phi_rad_s"] = ra_num.omega_phi;
    out["analytic"]["omega_phi_radius_m"] = ra_num.R_used;
    out["lab_units"]["analytic"]["f_phi_Hz"] = ra_num.omega_phi / two_pi;
    out["numeric"] = {{"R_m", ch.ring_radius},
                      {"ring_center_m", {ch.ring_center.x, ch.ring_center.y, ch.ring_center.z}},
                      {"min_position_m", {ch.min_position.x, ch.min_position.y, ch.min_position.z}},
                      {"z_min_m", ch.z_min},
                      {"phi_min_rad", ch.phi_min},
                      {"V_min_J", ch.V_min},
                      {"omega_r_rad_s", ch.omega_r_num},
                      {"omega_z_rad_s", ch.omega_z_num},
                      {"omega_phi_rad_s", ch.omega_phi_num},
                      {"sweeps", ch.sweeps}};
    out["relative_deviation"] = {{"R", rel_dev(ch.ring_radius, ra.R_est)},
                                 {"omega_r", rel_dev(ch.omega_r_num, ra.omega_r)},
                                 {"omega_z", rel_dev(ch.omega_z_num, ra.omega_z)},
                                 {"omega_phi", rel_dev(ch.omega_phi_num, ra_num.omega_phi)}};
    out["lab_units"]["numeric"] = {{"R_um", ch.ring_radius * 1e6},
                                   {"f_r_Hz", ch.omega_r_num / two_pi},
                                   {"f_z_Hz", ch.omega_z_num / two_pi},
                                   {"f_phi_Hz", ch.omega_phi_num / two_pi},
                                   {"z_min_um", ch.z_min * 1e6}};
    double vmin = ch.azimuthal_profile.front().V, vmax = vmin;
    for (const auto& p : ch.azimuthal_profile) {
        vmin = std::min(vmin, p.V);
        vmax = std::max(vmax, p.V);
    }
    out["azimuthal_peak_to_peak_J"] = vmax - vmin;
    out["lab_units"]["azimuthal_peak_to_peak_nK"] = (vmax - vmin) / (k_B * nK);
    out["adiabaticity"] = adiabaticity_block(c, ch);
    write_json(s.out_dir / "characterize.json", out);
    write_profile_csv(s.out_dir / "azimuthal_profile.csv", ch.azimuthal_profile);
    say(ctx, "numeric:  R = " + format_g(ch.ring_radius * 1e6, 6) + " um, f_r = " +
                 format_g(ch.omega_r_num / two_pi, 5) + " Hz, f_z = " + format_g(ch.omega_z_num / two_pi, 5) +
                 " Hz, f_phi = " + format_g(ch.omega_phi_num / two_pi, 5) + " Hz");
    say(ctx, "wrote " + (s.out_dir / "characterize.json").string());
    return ok;
}

int cmd_transport(const Scenario& s, const RunContext& ctx) {
    if (!s.transport) throw ConfigError("scenario has no 'transport' section");
    const auto& tc = *s.transport;
    const auto& sched = tc.schedule;

    transport::PendulumModel model;
    if (tc.omega_phi) {
        model.omega_phi = *tc.omega_phi;
        model.radius = tc.radius.value_or(0.0);
    } else {
        const auto ch = potential::characterize_numeric(s.field, s.characterize);
        model = transport::PendulumModel::from(ch, s.field.delta);
        if (tc.radius) model.radius = *tc.radius;
        say(ctx, "omega_phi from characterization: " + format_g(model.omega_phi / two_pi, 6) + " Hz");
    }
    model.gravity = s.field.species.gravity;
    model.restoring = tc.restoring;
    if (!sched.delta_ramp.empty() && !(model.radius > 0.0))
        throw ConfigError("a delta ramp needs transport.radius_um or a characterizable field");

    const double t_end = tc.t_end.value_or(sched.t_end());
    const auto traj = transport::integrate_pendulum(sched, model, tc.initial, tc.dt, t_end, tc.record_every);

    std::vector<std::vector<double>> rows;
    rows.reserve(traj.size());
    for (const auto& p : traj) {
        const double trap = transport::trap_trajectory(sched, p.t).phi;
        rows.push_back({p.t, p.phi, p.phi_dot, trap, p.phi - trap});
    }
    write_csv(s.out_dir / "trajectory.csv", {"t_s", "phi_rad", "phi_dot_rad_s", "phi_trap_rad", "phi_rel_rad"}, rows,
              12);

    json out;
    out["schedule"] = transport::schedule_to_json(sched);
    out["model"] = {{"omega_phi_rad_s", model.omega_phi},
                    {"radius_m", model.radius},
                    {"restoring", tc.restoring == transport::Restoring::pendulum ? "pendulum" : "harmonic"},
                    {"dt_s", tc.dt}};
    const double dphi = transport::bang_bang_jump(sched.phi_ddot, model.omega_phi);
    const auto& last = traj.back();
    out["final"] = {{"t_s", last.t}, {"phi_rad", last.phi}, {"phi_dot_rad_s", last.phi_dot}};
    out["predicted"] = {{"jump_rad", dphi},
                        {"sloshing_after_ramp_without_jumps_rad",
                         2.0 * dphi * std::abs(std::sin(0.5 * model.omega_phi * sched.t_accel))},
                        {"omega_final_rad_s", sched.omega_final}};
    out["lab_units"] = {{"f_phi_Hz", model.omega_phi / two_pi},
                        {"final_rotation_Hz", last.phi_dot / two_pi},
                        {"jump_mrad", dphi * 1e3}};

    if (tc.fit && sched.omega_final > 0.0) {
        std::vector<double> ts, ys;
        num::CounterRng rng(s.seed, num::stream_id(num::Module::transport, 1));
        for (const auto& p : traj) {
            if (p.t < sched.t_accel) continue;
            ts.push_back(p.t);
            ys.push_back(p.phi + (tc.noise > 0.0 ? tc.noise * rng.normal() : 0.0));
        }
        const auto f = transport::fit_transport_trace(ts, ys, sched.omega_final);
        json fj = {{"phi_offset_rad", f.phi_offset}, {"a1_rad", f.a1},       {"a2_rad", f.a2},
                   {"a3_rad", f.a3},                 {"phase1_rad", f.phase1}, {"phase2_rad", f.phase2},
                   {"phase3_rad", f.phase3},         {"omega_fit_rad_s", f.omega_fit},
                   {"tau_s", std::isfinite(f.tau) ? json(f.tau) : json(nullptr)},
                   {"residual_rms_rad", f.residual_rms}, {"iterations", f.iterations}};
        fj["sigma"] = {{"phi_offset_rad", f.sigma.phi_offset}, {"a1_rad", f.sigma.a1},
                       {"a2_rad", f.sigma.a2},                 {"a3_rad", f.sigma.a3},
                       {"omega_fit_rad_s", f.sigma.omega_fit},
                       {"tau_s", std::isfinite(f.sigma.tau) ? json(f.sigma.tau) : json(nullptr)}};
        fj["window_start_s"] = sched.t_accel;
        fj["noise_rad"] = tc.noise;
        out["fit"] = fj;
        say(ctx, "fit: a3 = " + format_g(f.a3 * 1e3, 5) + " mrad at " + format_g(f.omega_fit / two_pi, 5) + " Hz");
    }
    write_json(s.out_dir / "transport.json", out);
    say(ctx, "final phi_dot = " + format_g(last.phi_dot, 12) + " rad/s; wrote " + (s.out_dir / "trajectory.csv").string());
    return ok;
}

int cmd_image_fit(const Scenario& s, const RunContext& ctx) {
    if (!s.ensemble) throw ConfigError("scenario has no 'ensemble' section");
    const auto& e = *s.ensemble;
    if (e.N_thermal == 0 && e.N_bec == 0) throw ConfigError("ensemble has no atoms");
    const imaging::RingPotential ring = s.ring.value_or(imaging::RingPotential{});
    const double m = ring.species.mass;

    double w_rho = 0.0, w_z = 0.0;
    if (e.N_thermal > 0) {
        w_rho = imaging::thermal_width(e.T, ring.omega_r, m);
        w_z = imaging::thermal_width(e.T, ring.omega_z, m);
    }
    if (e.N_bec > 0) {
        w_rho = std::max(w_rho, std::sqrt(2.0 * e.mu / m) / ring.omega_r / 5.0);
        w_z = std::max(w_z, std::sqrt(2.0 * e.mu / m) / ring.omega_z / 5.0);
    }
    const auto region = imaging::ring_region(ring.R, w_rho, w_z);
    const imaging::PotentialFn U = [&ring](const Position& r) { return ring(r); };

    std::vector<Position> atoms;
    json sampling;
    if (e.N_thermal > 0) {
        imaging::SamplingStats st;
        atoms = imaging::sample_thermal(U, e.T, e.N_thermal, region, e.seed, &st);
        sampling["thermal"] = {{"acceptance", st.acceptance()}, {"restarts", st.restarts}};
    }
    if (e.N_bec > 0) {
        imaging::SamplingStats st;
        auto bec = imaging::sample_thomas_fermi(U, e.mu, e.N_bec, region, e.seed + 1, &st);
        atoms.insert(atoms.end(), bec.begin(), bec.end());
        sampling["condensate"] = {{"acceptance", st.acceptance()}, {"restarts", st.restarts}};
    }
    say(ctx, "sampled " + std::to_string(atoms.size()) + " atoms");

    const auto grid = imaging::ImageGrid::centered(s.imaging.half_extent, s.imaging.pixel_size);
    auto img = imaging::render_image(atoms, grid, s.imaging.psf);
    const double peak = *std::max_element(img.data.begin(), img.data.end());
    if (s.imaging.noise_fraction > 0.0) imaging::add_gaussian_noise(img, s.imaging.noise_fraction * peak, s.seed);

    imaging::FitOptions fo;
    fo.fit_thermal = e.N_thermal > 0;
    fo.fit_condensate = e.N_bec > 0;
    fo.T_anchor = s.imaging.T_anchor;
    imaging::DensityImage residual;
    const auto fit = imaging::fit_ring_image(img, std::nullopt, fo, &residual);
    const auto harm = imaging::residual_ring_harmonics(residual, fit);

    // injected azimuthal landscape: V_c m(phi) plus the tilt, dense scan
    constexpr int n_scan = 4096;
    double umin = ring.azimuthal(0.0), umax = umin;
    for (int k = 1; k < n_scan; ++k) {
        const double u = ring.azimuthal(two_pi * k / n_scan);
        umin = std::min(umin, u);
        umax = std::max(umax, u);
    }

    json out = imaging::fit_to_json(fit);
    out["sampling"] = sampling;
    out["n_atoms"] = atoms.size();
    out["image_peak"] = peak;
    out["residual_harmonics"] = {{"power1", harm.power1},
                                 {"power2", harm.power2},
                                 {"noise_power", harm.noise_power},
                                 {"n_pixels", harm.n_pixels},
                                 {"below_noise_floor", harm.power1 < 4.0 * harm.noise_power &&
                                                           harm.power2 < 4.0 * harm.noise_power}};
    out["injected_peak_to_peak_J"] = umax - umin;
    if (e.N_thermal > 0) {
        // thermal density exp(-U/kT): the fit sees h_k T_fit = (harmonic amplitude of U) / kT
        const double kT = k_B * e.T;
        const double tilt = 0.5 * ring.delta * m * ring.species.gravity * ring.R;
        const std::complex<double> c1 = ring.V_c * ring.h1 * std::polar(1.0, ring.phi1) + tilt * std::polar(1.0, pi - ring.phi0);
        const double h1_inj = std::abs(c1) / kT * fit.T_fit, h2_inj = ring.V_c * ring.h2 / kT * fit.T_fit;
        const double flat = imaging::flatness_from_fit(fit, e.T);
        out["injected"] = {{"h1", h1_inj},
                           {"h2", h2_inj},
                           {"phi1_rad", std::arg(c1)},
                           {"phi2_rad", std::remainder(ring.phi2, two_pi)},
                           {"rho0_m", ring.R},
                           {"delta_rho_m", std::sqrt(2.0 * kT * fit.T_fit / (m * ring.omega_r * ring.omega_r))}};
        out["relative_deviation"] = {{"h1", h1_inj > 0 ? rel_dev(fit.h1, h1_inj) : fit.h1},
                                     {"h2", h2_inj > 0 ? rel_dev(fit.h2, h2_inj) : fit.h2}};
        out["flatness_J"] = flat;
        out["lab_units"] = {{"flatness_nK", flat / (k_B * nK)},
                            {"injected_peak_to_peak_nK", (umax - umin) / (k_B * nK)},
                            {"flatness_height_um", flat / (m * ring.species.gravity) * 1e6},
                            {"rho0_um", fit.rho0 * 1e6},
                            {"delta_rho_um", fit.delta_rho * 1e6}};
        say(ctx, "fit: h1 = " + format_g(fit.h1, 5) + " (injected " + format_g(h1_inj, 5) + "), h2 = " +
                     format_g(fit.h2, 5) + " (injected " + format_g(h2_inj, 5) + "), flatness = " +
                     format_g(flat / (k_B * nK), 5) + " nK");
    }
    write_image(s.out_dir / "image", img);
    write_image(s.out_dir / "residual", residual);
    write_json(s.out_dir / "fit.json", out);
    say(ctx, "wrote " + (s.out_dir / "fit.json").string());
    return ok;
}

}  // namespace taap::cli
