#pragma once

#include <optional>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "taap/potential.hpp"

namespace taap::transport {

struct TransportSchedule {
    double phi_ddot = 0.0;     // rad/s^2
    double t_accel = 0.0;      // s
    double omega_final = 0.0;  // rad/s
    double jump_start = 0.0;   // rad
    double jump_end = 0.0;     // rad
    std::vector<std::pair<double, double>> delta_ramp;       // (t, delta)
    std::vector<std::pair<double, double>> omega_phi_table;  // (t, omega_phi)
    double hold_time = 0.0;    // s

    void validate() const;
    double t_end() const { return t_accel + hold_time; }
};

double bang_bang_jump(double phi_ddot, double omega_phi);

// Schedule with omega_final = phi_ddot t_accel and jumps from omega_phi at the jump times
// (omega_phi_table when given, else omega_phi_static).
TransportSchedule bang_bang_schedule(double phi_ddot, double t_accel, double hold_time, double omega_phi_static,
                                     std::vector<std::pair<double, double>> omega_phi_table = {});

enum class Side { left, right };

struct TrapPosition {
    double phi;
    std::optional<double> delta;  // empty without a delta ramp
};

TrapPosition trap_trajectory(const TransportSchedule& s, double t, Side side = Side::right);

struct ParticleState {
    double phi = 0.0;
    double phi_dot = 0.0;
};

struct TrajectoryPoint {
    double t;
    double phi;
    double phi_dot;
};

enum class Restoring { pendulum, harmonic };

// Reduced azimuthal model: phi'' = -omega_phi(t)^2 F(phi - phi_trap(t)) + corrugation.
struct PendulumModel {
    double omega_phi = 0.0;  // static value, rad/s
    double radius = 0.0;     // m, enters delta(t) g / 2R under a delta ramp
    double gravity = constants::g;
    Restoring restoring = Restoring::pendulum;
    // static lab-frame landscape: phi'' += sum_k k a_k sin(k phi + p_k), i.e. potential
    // per unit m R^2 equal to sum_k a_k cos(k phi + p_k)
    double corr_a1 = 0.0, corr_p1 = 0.0, corr_a2 = 0.0, corr_p2 = 0.0;

    static PendulumModel from(const potential::TrapCharacterization& ch, double delta);
    static PendulumModel from(const potential::RingAnalytics& ra);

    double omega_sq(const TransportSchedule& s, double t) const;
    double omega_max(const TransportSchedule& s) const;
};

std::vector<TrajectoryPoint> integrate_pendulum(const TransportSchedule& s, const PendulumModel& model,
                                                ParticleState state0, double dt, double t_end,
                                                int record_every = 1);

double pendulum_energy(const PendulumModel& model, const TransportSchedule& s, double t, const ParticleState& st);

struct State3D {
    Position r;
    Velocity v;
};

struct Trajectory3DPoint {
    double t;
    State3D state;
    double phi;
    double phi_dot;
};

// Full 3-D velocity Verlet in the phase-averaged potential. The tilt direction phi0 follows
// phi_trap(t) + pi so the low point of the ring tracks the schedule.
std::vector<Trajectory3DPoint> integrate_3d(const field::FieldConfig& c, const TransportSchedule& s, State3D state0,
                                            double dt, double t_end, int n_quad = 64, int record_every = 1);

double centrifugal_radius(double R0, double Omega, double omega_r);
double angular_momentum(double R, double phi_dot, const field::AtomSpecies& species);  // units of hbar

struct OscillationFit {
    double phi_offset = 0.0;
    double a1 = 0.0, a2 = 0.0, a3 = 0.0;
    double phase1 = 0.0, phase2 = 0.0, phase3 = 0.0;
    double omega_fit = 0.0;
    double tau = 0.0;
    double residual_rms = 0.0;
    struct {
        double phi_offset, a1, a2, a3, phase1, phase2, phase3, omega_fit, tau;
    } sigma{};
    int iterations = 0;
};

OscillationFit fit_transport_trace(const std::vector<double>& times, const std::vector<double>& angles,
                                   double omega_drive);

std::vector<double> synth_transport_trace(const OscillationFit& p, double omega_drive, const std::vector<double>& times);

TransportSchedule schedule_from_json(const nlohmann::json& j);
nlohmann::json schedule_to_json(const TransportSchedule& s);

}  // namespace taap::transport
