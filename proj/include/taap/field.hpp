#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "taap/constants.hpp"
#include "taap/vec3.hpp"

namespace taap::field {

struct AtomSpecies {
    std::string name = "Rb87";
    double mass = constants::m_Rb87;
    double g_F = -0.5;
    double m_F = -1.0;
    double scattering_length = constants::a_Rb87;
    double mu_B = constants::mu_B;
    double gravity = constants::g;

    void validate() const;
};

AtomSpecies rubidium87();

// projected: only the RF component perpendicular to the local slow field couples
// (vertical linear polarization). uniform: constant kappa*|g_F|mu_B B_rf/hbar.
enum class Coupling { projected, uniform };

struct FieldConfig {
    double alpha = 0.7;                  // T/m
    double B_m = 1.4e-4;                 // T
    double delta = 0.0;
    double phi0 = 0.0;                   // rad
    double omega_m = constants::two_pi * 5.02e3;
    double B_rf = 0.0;                   // T
    double omega_rf = constants::two_pi * 2.55e6;
    double kappa = 1.0;
    Coupling coupling = Coupling::projected;
    AtomSpecies species{};

    void validate() const;

    // Omega_rf = kappa |g_F| mu_B B_rf / hbar
    double rabi_frequency() const;
    void set_rabi_frequency(double omega_rabi);
};

// Methods parameters: 70 G/cm, 1.4 G, 5.02 kHz, 2.55 MHz, Omega_rf = 2pi 357 kHz.
FieldConfig reference_config(double delta = 0.0);

inline constexpr double zero_field_threshold = 1e-12;  // T

Field quadrupole_field(double alpha, const Position& r);
Field modulation_direction(const FieldConfig& c);
Field instantaneous_field(const FieldConfig& c, const Position& r, double theta_m);
double rf_coupling(const FieldConfig& c, const Position& r, double theta_m);

FieldConfig field_config_from_json(const nlohmann::json& j);
nlohmann::json field_config_to_json(const FieldConfig& c);

}  // namespace taap::field
