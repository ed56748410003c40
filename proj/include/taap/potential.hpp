#pragma once

#include <optional>
#include <vector>

#include "taap/field.hpp"

namespace taap::potential {

using field::AtomSpecies;
using field::FieldConfig;

double larmor_frequency(const Field& B, const AtomSpecies& species);

// Upper dressed state |m_F| hbar sqrt(Delta^2 + Omega^2), plus M g z when gravity is on.
double adiabatic_potential(const FieldConfig& c, const Position& r, double theta_m, bool gravity);

// Phase-averaged dressed potential with a cached quadrature grid.
class TaapEvaluator {
public:
    TaapEvaluator(const FieldConfig& c, int n_quad = 64, bool gravity = false);

    double operator()(const Position& r) const;
    double without_gravity(const Position& r) const;

    const FieldConfig& config() const { return cfg_; }
    int n_quad() const { return static_cast<int>(sin_.size()); }
    bool gravity() const { return gravity_; }

private:
    FieldConfig cfg_;
    std::vector<double> sin_;
    bool gravity_;
    double gamma_, rabi_, scale_;
};

double taap_potential(const FieldConfig& c, const Position& r, int n_quad = 64, bool gravity = false);

struct RingAnalytics {
    double R_est = 0.0;
    double omega_0 = 0.0;
    double beta_m = 0.0;
    double omega_r = 0.0;
    double omega_z = 0.0;
    double omega_phi = 0.0;
    double V_bottom = 0.0;
    double R_used = 0.0;  // radius entering omega_phi
};

RingAnalytics analytic_ring(const FieldConfig& c, std::optional<double> R = std::nullopt);

struct ProfilePoint {
    double phi;
    double V;
    double rho;
    double z;
};

struct TrapCharacterization {
    double ring_radius = 0.0;   // circle through the per-azimuth minima
    Position ring_center{};
    double z_min = 0.0;
    double phi_min = 0.0;
    double V_min = 0.0;
    Position min_position{};
    double omega_r_num = 0.0;
    double omega_z_num = 0.0;
    double omega_phi_num = 0.0;
    std::vector<ProfilePoint> azimuthal_profile;
    double hessian[3][3]{};     // local (rho, z, phi) frame at the minimum, J/m^2
    int sweeps = 0;
};

struct CharacterizeOptions {
    int n_quad = 64;
    int n_phi = 36;
    bool gravity = true;
    double tol = 1e-12;          // m, golden-section bracket
    double hessian_step = 0.5e-6;
    int max_sweeps = 4000;
};

TrapCharacterization characterize_numeric(const FieldConfig& c, const CharacterizeOptions& opt = {});

struct AdiabaticityReport {
    double omega_m_over_omega_r = 0.0;
    double omega_m_over_omega_z = 0.0;
    double larmor_min_over_omega_m = 0.0;
    double larmor_min = 0.0;
};

inline constexpr double adiabatic_margin = 10.0;

AdiabaticityReport adiabaticity_check(const FieldConfig& c, const TrapCharacterization& ch);
AdiabaticityReport adiabaticity_check(const FieldConfig& c, const RingAnalytics& ra);

}  // namespace taap::potential
