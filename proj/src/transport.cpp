#include "taap/transport.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include <nlohmann/json.hpp>

#include "taap/errors.hpp"
#include "taap/numerics.hpp"

namespace taap::transport {

using namespace constants;

namespace {

double interp(const std::vector<std::pair<double, double>>& tab, double t) {
    if (t <= tab.front().first) return tab.front().second;
    if (t >= tab.back().first) return tab.back().second;
    const auto it = std::upper_bound(tab.begin(), tab.end(), t,
                                     [](double v, const std::pair<double, double>& p) { return v < p.first; });
    const auto& [t1, v1] = *it;
    const auto& [t0, v0] = *(it - 1);
    if (t1 == t0) return v1;
    return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
}

void check_table(const std::vector<std::pair<double, double>>& tab, const char* name) {
    for (std::size_t i = 0; i < tab.size(); ++i) {
        if (!std::isfinite(tab[i].first) || !std::isfinite(tab[i].second))
            throw ConfigError(std::string(name) + " entries must be finite");
        if (i > 0 && tab[i].first < tab[i - 1].first)
            throw ConfigError(std::string(name) + " times must be non-decreasing");
    }
}

}  // namespace

void TransportSchedule::validate() const {
    if (!(t_accel >= 0.0)) throw ConfigError("t_accel must be non-negative");
    if (!(hold_time >= 0.0)) throw ConfigError("hold_time must be non-negative");
    if (!std::isfinite(phi_ddot) || !std::isfinite(omega_final)) throw ConfigError("schedule rates must be finite");
    if (!std::isfinite(jump_start) || !std::isfinite(jump_end)) throw ConfigError("jumps must be finite");
    const double expect = phi_ddot * t_accel;
    if (std::abs(omega_final - expect) > 1e-9 * std::max(1.0, std::abs(expect)))
        throw ConfigError("omega_final must equal phi_ddot * t_accel");
    check_table(delta_ramp, "delta_ramp");
    check_table(omega_phi_table, "omega_phi_table");
    for (const auto& [t, d] : delta_ramp)
        if (d < 0.0 || d >= 1.0) throw ConfigError("delta_ramp values must lie in [0, 1)");
    for (const auto& [t, w] : omega_phi_table)
        if (!(w > 0.0)) throw ConfigError("omega_phi_table values must be positive");
}

double bang_bang_jump(double phi_ddot, double omega_phi) {
    if (!(omega_phi > 0.0)) throw DomainError("omega_phi must be positive");
    return phi_ddot / (omega_phi * omega_phi);
}

TransportSchedule bang_bang_schedule(double phi_ddot, double t_accel, double hold_time, double omega_phi_static,
                                     std::vector<std::pair<double, double>> table) {
    TransportSchedule s;
    s.phi_ddot = phi_ddot;
    s.t_accel = t_accel;
    s.omega_final = phi_ddot * t_accel;
    s.hold_time = hold_time;
    s.omega_phi_table = std::move(table);
    const double w0 = s.omega_phi_table.empty() ? omega_phi_static : interp(s.omega_phi_table, 0.0);
    const double w1 = s.omega_phi_table.empty() ? omega_phi_static : interp(s.omega_phi_table, t_accel);
    s.jump_start = bang_bang_jump(phi_ddot, w0);
    s.jump_end = bang_bang_jump(phi_ddot, w1);
    return s;
}

TrapPosition trap_trajectory(const TransportSchedule& s, double t, Side side) {
    if (t < 0.0) throw DomainError("trap_trajectory needs t >= 0");
    TrapPosition p{};
    const bool before_start = t == 0.0 && side == Side::left;
    const bool accelerating = t < s.t_accel || (t == s.t_accel && side == Side::left);
    if (before_start) {
        p.phi = 0.0;
    } else if (accelerating) {
        p.phi = s.jump_start + 0.5 * s.phi_ddot * t * t;
    } else {
        p.phi = s.jump_start + 0.5 * s.phi_ddot * s.t_accel * s.t_accel + s.omega_final * (t - s.t_accel) - s.jump_end;
    }
    if (!s.delta_ramp.empty()) p.delta = interp(s.delta_ramp, t);
    return p;
}

PendulumModel PendulumModel::from(const potential::TrapCharacterization& ch, double delta) {
    PendulumModel m;
    m.radius = ch.ring_radius;
    m.omega_phi = ch.omega_phi_num > 0.0 ? ch.omega_phi_num : std::sqrt(delta * m.gravity / (2.0 * m.radius));
    return m;
}

PendulumModel PendulumModel::from(const potential::RingAnalytics& ra) {
    PendulumModel m;
    m.radius = ra.R_used;
    m.omega_phi = ra.omega_phi;
    return m;
}

double PendulumModel::omega_sq(const TransportSchedule& s, double t) const {
    if (!s.omega_phi_table.empty()) {
        const double w = interp(s.omega_phi_table, t);
        return w * w;
    }
    if (!s.delta_ramp.empty()) {
        if (!(radius > 0.0)) throw DomainError("a delta ramp needs a positive ring radius");
        return interp(s.delta_ramp, t) * gravity / (2.0 * radius);
    }
    return omega_phi * omega_phi;
}

double PendulumModel::omega_max(const TransportSchedule& s) const {
    double w2 = omega_phi * omega_phi;
    if (!s.omega_phi_table.empty()) {
        w2 = 0.0;
        for (const auto& [t, w] : s.omega_phi_table) w2 = std::max(w2, w * w);
    } else if (!s.delta_ramp.empty()) {
        w2 = 0.0;
        for (const auto& [t, d] : s.delta_ramp) w2 = std::max(w2, d * gravity / (2.0 * radius));
    }
    const double corr = std::abs(corr_a1) + 4.0 * std::abs(corr_a2);
    return std::sqrt(w2 + corr);
}

namespace {

double accel(const PendulumModel& m, const TransportSchedule& s, double phi, double t, Side side) {
    const double d = phi - trap_trajectory(s, t, side).phi;
    const double f = m.restoring == Restoring::pendulum ? std::sin(d) : d;
    double a = -m.omega_sq(s, t) * f;
    if (m.corr_a1 != 0.0) a += m.corr_a1 * std::sin(phi + m.corr_p1);
    if (m.corr_a2 != 0.0) a += 2.0 * m.corr_a2 * std::sin(2.0 * phi + m.corr_p2);
    return a;
}

}  // namespace

double pendulum_energy(const PendulumModel& m, const TransportSchedule& s, double t, const ParticleState& st) {
    const double d = st.phi - trap_trajectory(s, t).phi;
    const double w2 = m.omega_sq(s, t);
    double e = 0.5 * st.phi_dot * st.phi_dot;
    e += m.restoring == Restoring::pendulum ? w2 * (1.0 - std::cos(d)) : 0.5 * w2 * d * d;
    e += m.corr_a1 * std::cos(st.phi + m.corr_p1) + m.corr_a2 * std::cos(2.0 * st.phi + m.corr_p2);
    return e;
}

std::vector<TrajectoryPoint> integrate_pendulum(const TransportSchedule& s, const PendulumModel& m,
                                                ParticleState st, double dt, double t_end, int record_every) {
    s.validate();
    if (!(dt > 0.0)) throw StepTooLarge("dt must be positive");
    if (!(t_end >= 0.0)) throw DomainError("t_end must be non-negative");
    const double wmax = m.omega_max(s);
    if (wmax > 0.0 && !(dt < 0.05 / wmax)) throw StepTooLarge("dt must be below 0.05/omega_phi");
    if (record_every < 1) record_every = 1;

    std::vector<double> cuts{0.0};
    if (s.t_accel > 0.0 && s.t_accel < t_end) cuts.push_back(s.t_accel);
    cuts.push_back(t_end);

    std::vector<TrajectoryPoint> out{{0.0, st.phi, st.phi_dot}};
    long step = 0;
    for (std::size_t seg = 0; seg + 1 < cuts.size(); ++seg) {
        const double t0 = cuts[seg], len = cuts[seg + 1] - t0;
        if (len <= 0.0) continue;
        const auto n = static_cast<long>(std::ceil(len / dt - 1e-9));
        const double h = len / static_cast<double>(n);
        for (long k = 0; k < n; ++k) {
            const double ta = t0 + h * static_cast<double>(k);
            const double tb = k + 1 == n ? cuts[seg + 1] : t0 + h * static_cast<double>(k + 1);
            st.phi_dot += 0.5 * h * accel(m, s, st.phi, ta, Side::right);
            st.phi += h * st.phi_dot;
            st.phi_dot += 0.5 * h * accel(m, s, st.phi, tb, Side::left);
            ++step;
            const bool last = seg + 2 == cuts.size() && k + 1 == n;
            if (step % record_every == 0 || last) out.push_back({tb, st.phi, st.phi_dot});
        }
    }
    return out;
}

std::vector<Trajectory3DPoint> integrate_3d(const field::FieldConfig& c, const TransportSchedule& s, State3D st,
                                            double dt, double t_end, int n_quad, int record_every) {
    s.validate();
    c.validate();
    const auto ra = potential::analytic_ring(c);
    if (!(dt > 0.0) || !(dt < 0.05 / ra.omega_r)) throw StepTooLarge("dt must be below 0.05/omega_r");
    if (record_every < 1) record_every = 1;
    const double m = c.species.mass;
    constexpr double h = 20e-9;

    auto force = [&](const Position& r, double t, Side side) {
        field::FieldConfig ct = c;
        const TrapPosition tp = trap_trajectory(s, t, side);
        ct.phi0 = tp.phi + pi;
        if (tp.delta) ct.delta = *tp.delta;
        const potential::TaapEvaluator U(ct, n_quad, true);
        auto d = [&](Position a, Position b) { return -(U(a) - U(b)) / (2.0 * h * m); };
        return Velocity{d(r + Position{h, 0, 0}, r - Position{h, 0, 0}), d(r + Position{0, h, 0}, r - Position{0, h, 0}),
                        d(r + Position{0, 0, h}, r - Position{0, 0, h})};
    };
    auto kick = [](Velocity& v, const Velocity& a, double tau) { v += a * tau; };
    auto drift = [](Position& r, const Velocity& v, double tau) { r += Position{v.x * tau, v.y * tau, v.z * tau}; };

    auto azimuth = [](const State3D& q, double prev) {
        double phi = std::atan2(q.r.y, q.r.x);
        phi += two_pi * std::round((prev - phi) / two_pi);
        const double rho2 = q.r.x * q.r.x + q.r.y * q.r.y;
        return std::pair{phi, (q.r.x * q.v.y - q.r.y * q.v.x) / rho2};
    };

    std::vector<double> cuts{0.0};
    if (s.t_accel > 0.0 && s.t_accel < t_end) cuts.push_back(s.t_accel);
    cuts.push_back(t_end);

    auto [phi, phid] = azimuth(st, 0.0);
    std::vector<Trajectory3DPoint> out{{0.0, st, phi, phid}};
    long step = 0;
    for (std::size_t seg = 0; seg + 1 < cuts.size(); ++seg) {
        const double t0 = cuts[seg], len = cuts[seg + 1] - t0;
        if (len <= 0.0) continue;
        const auto n = static_cast<long>(std::ceil(len / dt - 1e-9));
        const double hh = len / static_cast<double>(n);
        for (long k = 0; k < n; ++k) {
            const double ta = t0 + hh * static_cast<double>(k);
            const double tb = k + 1 == n ? cuts[seg + 1] : t0 + hh * static_cast<double>(k + 1);
            kick(st.v, force(st.r, ta, Side::right), 0.5 * hh);
            drift(st.r, st.v, hh);
            kick(st.v, force(st.r, tb, Side::left), 0.5 * hh);
            ++step;
            const bool last = seg + 2 == cuts.size() && k + 1 == n;
            std::tie(phi, phid) = azimuth(st, phi);
            if (step % record_every == 0 || last) out.push_back({tb, st, phi, phid});
        }
    }
    return out;
}

double centrifugal_radius(double R0, double Omega, double omega_r) {
    if (!(std::abs(Omega) < omega_r)) throw CentrifugalLimit("rotation rate reaches the radial trap frequency");
    return R0 / (1.0 - Omega * Omega / (omega_r * omega_r));
}

double angular_momentum(double R, double phi_dot, const field::AtomSpecies& sp) {
    if (!(R > 0.0)) throw DomainError("radius must be positive");
    return sp.mass * R * R * phi_dot / hbar;
}

// ---- micro-motion fit ----

namespace {

enum Q { q_off, q_A1, q_B1, q_A2, q_B2, q_A3, q_B3, q_gam, q_om, q_n };

double model_at(const Eigen::VectorXd& q, double wd, double t) {
    const double e = std::exp(-q(q_gam) * t);
    return q(q_off) + wd * t + q(q_A1) * std::sin(wd * t) + q(q_B1) * std::cos(wd * t) +
           q(q_A2) * std::sin(2 * wd * t) + q(q_B2) * std::cos(2 * wd * t) +
           e * (q(q_A3) * std::sin(q(q_om) * t) + q(q_B3) * std::cos(q(q_om) * t));
}

std::complex<double> project(const std::vector<double>& t, const std::vector<double>& r, double w) {
    std::complex<double> acc{};
    for (std::size_t i = 0; i < t.size(); ++i) acc += r[i] * std::polar(1.0, -w * t[i]);
    return acc * (2.0 / static_cast<double>(t.size()));
}

void amp_phase(double A, double B, const Eigen::MatrixXd& C, int ia, int ib, double& a, double& p, double& sa,
               double& sp) {
    a = std::hypot(A, B);
    p = std::atan2(B, A);
    if (a == 0.0) {
        sa = std::sqrt(std::max(0.0, 0.5 * (C(ia, ia) + C(ib, ib))));
        sp = pi;
        return;
    }
    const double va = (A * A * C(ia, ia) + B * B * C(ib, ib) + 2 * A * B * C(ia, ib)) / (a * a);
    const double vp = (B * B * C(ia, ia) + A * A * C(ib, ib) - 2 * A * B * C(ia, ib)) / (a * a * a * a);
    sa = std::sqrt(std::max(va, 0.0));
    sp = std::sqrt(std::max(vp, 0.0));
}

}  // namespace

std::vector<double> synth_transport_trace(const OscillationFit& p, double wd, const std::vector<double>& times) {
    Eigen::VectorXd q(q_n);
    q << p.phi_offset, p.a1 * std::cos(p.phase1), p.a1 * std::sin(p.phase1), p.a2 * std::cos(p.phase2),
        p.a2 * std::sin(p.phase2), p.a3 * std::cos(p.phase3), p.a3 * std::sin(p.phase3),
        p.tau > 0 ? 1.0 / p.tau : 0.0, p.omega_fit;
    std::vector<double> out;
    out.reserve(times.size());
    for (double t : times) out.push_back(model_at(q, wd, t));
    return out;
}

OscillationFit fit_transport_trace(const std::vector<double>& t, const std::vector<double>& y, double wd) {
    if (t.size() != y.size()) throw DomainError("times and angles differ in length");
    if (t.size() < 12) throw DomainError("need at least 12 samples");
    if (!(wd > 0.0)) throw DomainError("omega_drive must be positive");
    const auto [tmin_it, tmax_it] = std::minmax_element(t.begin(), t.end());
    const double span = *tmax_it - *tmin_it;
    if (span * wd < 2.0 * two_pi) throw DomainError("trace must span at least two drive periods");
    const std::size_t n = t.size();

    // seeds: drive harmonics by projection, free oscillation from the residual periodogram
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = y[i] - wd * t[i];
    const double off = num::mean(r);
    for (double& v : r) v -= off;
    const auto h1 = project(t, r, wd), h2 = project(t, r, 2 * wd);
    std::vector<double> r2(n);
    for (std::size_t i = 0; i < n; ++i) {
        r2[i] = r[i] - (std::real(h1) * std::cos(wd * t[i]) - std::imag(h1) * std::sin(wd * t[i])) -
                (std::real(h2) * std::cos(2 * wd * t[i]) - std::imag(h2) * std::sin(2 * wd * t[i]));
    }
    std::vector<double> dts(n - 1);
    std::vector<double> ts(t);
    std::sort(ts.begin(), ts.end());
    for (std::size_t i = 0; i + 1 < n; ++i) dts[i] = ts[i + 1] - ts[i];
    std::nth_element(dts.begin(), dts.begin() + static_cast<long>(dts.size() / 2), dts.end());
    const double nyq = pi / dts[dts.size() / 2];
    const double dw = two_pi / (4.0 * span), guard = 2.0 * two_pi / span;
    double best_w = 0.0, best_p = -1.0;
    for (double w = 2.0 * two_pi / span; w < 0.95 * nyq; w += dw) {
        if (std::abs(w - wd) < guard || std::abs(w - 2 * wd) < guard) continue;
        const double pw = std::norm(project(t, r2, w));
        if (pw > best_p) {
            best_p = pw;
            best_w = w;
        }
    }
    const double gam0 = 2.0 / span;
    const double atten = (1.0 - std::exp(-gam0 * span)) / (gam0 * span);
    const auto h3 = project(t, r2, best_w) / atten;

    Eigen::VectorXd q0(q_n);
    // a sin(x + p) = a cos p sin x + a sin p cos x; projection gives (B - iA) for B cos + A sin
    q0 << off, -std::imag(h1), std::real(h1), -std::imag(h2), std::real(h2), -std::imag(h3), std::real(h3), gam0, best_w;

    auto fn = [&](const Eigen::VectorXd& q, Eigen::VectorXd& res, Eigen::MatrixXd* J) {
        res.resize(static_cast<Eigen::Index>(n));
        if (q(q_gam) < 0.0) {
            res.setConstant(std::numeric_limits<double>::infinity());
            return;
        }
        if (J) J->resize(static_cast<Eigen::Index>(n), q_n);
        for (std::size_t i = 0; i < n; ++i) {
            const double ti = t[i];
            const auto k = static_cast<Eigen::Index>(i);
            res(k) = y[i] - model_at(q, wd, ti);
            if (!J) continue;
            const double e = std::exp(-q(q_gam) * ti);
            const double so = std::sin(q(q_om) * ti), co = std::cos(q(q_om) * ti);
            const double osc = q(q_A3) * so + q(q_B3) * co;
            (*J)(k, q_off) = 1.0;
            (*J)(k, q_A1) = std::sin(wd * ti);
            (*J)(k, q_B1) = std::cos(wd * ti);
            (*J)(k, q_A2) = std::sin(2 * wd * ti);
            (*J)(k, q_B2) = std::cos(2 * wd * ti);
            (*J)(k, q_A3) = e * so;
            (*J)(k, q_B3) = e * co;
            (*J)(k, q_gam) = -ti * e * osc;
            (*J)(k, q_om) = e * ti * (q(q_A3) * co - q(q_B3) * so);
        }
    };
    num::LmOptions lo;
    lo.max_iter = 500;
    const num::LmResult res = num::levenberg_marquardt(num::dense_evaluator(fn), q0, lo);
    const Eigen::MatrixXd C = res.covariance(n);
    const Eigen::VectorXd& q = res.p;

    OscillationFit f;
    f.phi_offset = q(q_off);
    f.sigma.phi_offset = std::sqrt(std::max(0.0, C(q_off, q_off)));
    amp_phase(q(q_A1), q(q_B1), C, q_A1, q_B1, f.a1, f.phase1, f.sigma.a1, f.sigma.phase1);
    amp_phase(q(q_A2), q(q_B2), C, q_A2, q_B2, f.a2, f.phase2, f.sigma.a2, f.sigma.phase2);
    amp_phase(q(q_A3), q(q_B3), C, q_A3, q_B3, f.a3, f.phase3, f.sigma.a3, f.sigma.phase3);
    f.omega_fit = q(q_om);
    f.sigma.omega_fit = std::sqrt(std::max(0.0, C(q_om, q_om)));
    const double gam = q(q_gam);
    f.tau = gam > 0.0 ? 1.0 / gam : std::numeric_limits<double>::infinity();
    f.sigma.tau = gam > 0.0 ? std::sqrt(std::max(0.0, C(q_gam, q_gam))) / (gam * gam) : std::numeric_limits<double>::infinity();
    f.residual_rms = std::sqrt(res.chi2 / static_cast<double>(n));
    f.iterations = res.iterations;
    return f;
}

// ---- JSON ----

namespace {

std::vector<std::pair<double, double>> table_from_json(const nlohmann::json& j, const char* key) {
    std::vector<std::pair<double, double>> out;
    if (!j.contains(key)) return out;
    for (const auto& e : j.at(key)) {
        if (!e.is_array() || e.size() != 2) throw ConfigError(std::string(key) + " entries must be [t, value] pairs");
        out.emplace_back(e[0].get<double>(), e[1].get<double>());
    }
    return out;
}

}  // namespace

TransportSchedule schedule_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("schedule must be a JSON object");
    try {
        TransportSchedule s;
        s.phi_ddot = j.value("phi_ddot_rad_s2", 0.0);
        s.t_accel = j.value("t_accel_s", 0.0);
        s.omega_final = j.value("omega_final_rad_s", s.phi_ddot * s.t_accel);
        s.jump_start = j.value("jump_start_rad", 0.0);
        s.jump_end = j.value("jump_end_rad", 0.0);
        s.hold_time = j.value("hold_time_s", 0.0);
        s.delta_ramp = table_from_json(j, "delta_ramp");
        s.omega_phi_table = table_from_json(j, "omega_phi_table");
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("schedule: ") + e.what());
    }
}

nlohmann::json schedule_to_json(const TransportSchedule& s) {
    nlohmann::json j;
    j["phi_ddot_rad_s2"] = s.phi_ddot;
    j["t_accel_s"] = s.t_accel;
    j["omega_final_rad_s"] = s.omega_final;
    j["jump_start_rad"] = s.jump_start;
    j["jump_end_rad"] = s.jump_end;
    j["hold_time_s"] = s.hold_time;
    auto tab = [](const std::vector<std::pair<double, double>>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& [t, x] : v) a.push_back({t, x});
        return a;
    };
    j["delta_ramp"] = tab(s.delta_ramp);
    j["omega_phi_table"] = tab(s.omega_phi_table);
    return j;
}

}  // namespace taap::transport
