#include "taap/field.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "taap/errors.hpp"

namespace taap::field {

using namespace constants;

void AtomSpecies::validate() const {
    if (!(mass > 0.0)) throw ConfigError("species mass must be positive");
    if (!(std::abs(g_F * m_F) > 0.0)) throw ConfigError("species |g_F m_F| must be positive");
    if (!(scattering_length > 0.0)) throw ConfigError("species scattering length must be positive");
}

AtomSpecies rubidium87() { return AtomSpecies{}; }

void FieldConfig::validate() const {
    if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
    if (!(B_m >= 0.0)) throw ConfigError("B_m must be non-negative");
    if (!(delta >= 0.0 && delta < 1.0)) throw ConfigError("delta must lie in [0, 1)");
    if (!(omega_m > 0.0)) throw ConfigError("omega_m must be positive");
    if (!(omega_rf > 0.0)) throw ConfigError("omega_rf must be positive");
    if (!(B_rf > 0.0)) throw ConfigError("B_rf must be positive");
    if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
    if (!std::isfinite(phi0)) throw ConfigError("phi0 must be finite");
    species.validate();
}

double FieldConfig::rabi_frequency() const {
    return kappa * std::abs(species.g_F) * species.mu_B * B_rf / hbar;
}

void FieldConfig::set_rabi_frequency(double omega_rabi) {
    B_rf = omega_rabi * hbar / (kappa * std::abs(species.g_F) * species.mu_B);
}

FieldConfig reference_config(double delta) {
    FieldConfig c;
    c.alpha = 0.7;  // 70 G/cm
    c.B_m = 1.4 * gauss;
    c.delta = delta;
    c.omega_m = two_pi * 5.02e3;
    c.omega_rf = two_pi * 2.55e6;
    c.set_rabi_frequency(two_pi * 357e3);
    return c;
}

Field quadrupole_field(double alpha, const Position& r) {
    return {alpha * r.x, alpha * r.y, -2.0 * alpha * r.z};
}

Field modulation_direction(const FieldConfig& c) {
    return {c.delta * std::cos(c.phi0), c.delta * std::sin(c.phi0), 1.0};
}

Field instantaneous_field(const FieldConfig& c, const Position& r, double theta_m) {
    return quadrupole_field(c.alpha, r) + (c.B_m * std::sin(theta_m)) * modulation_direction(c);
}

double rf_coupling(const FieldConfig& c, const Position& r, double theta_m) {
    const Field B = instantaneous_field(c, r, theta_m);
    const double b = B.norm();
    if (b < zero_field_threshold) throw ZeroField("field magnitude below threshold at quadrupole node");
    const double full = c.rabi_frequency();
    if (c.coupling == Coupling::uniform) return full;
    return full * std::hypot(B.x, B.y) / b;
}

namespace {

double get_number(const nlohmann::json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end()) throw ConfigError(std::string("missing field config key '") + key + "'");
    if (!it->is_number()) throw ConfigError(std::string("field config key '") + key + "' must be a number");
    return it->get<double>();
}

AtomSpecies species_from_json(const nlohmann::json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "Rb87") return rubidium87();
        throw ConfigError("unknown species '" + j.get<std::string>() + "' (known: Rb87)");
    }
    if (!j.is_object()) throw ConfigError("species must be a name or an object");
    AtomSpecies s;
    s.name = j.value("name", std::string("custom"));
    s.mass = get_number(j, "mass_amu") * amu;
    s.g_F = get_number(j, "g_F");
    s.m_F = get_number(j, "m_F");
    s.scattering_length = get_number(j, "a_bohr") * bohr_radius;
    return s;
}

}  // namespace

FieldConfig field_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("field config must be a JSON object");
    FieldConfig c;
    if (j.contains("species")) c.species = species_from_json(j.at("species"));
    c.alpha = get_number(j, "alpha_G_per_cm") * 1e-2;  // G/cm -> T/m
    c.B_m = get_number(j, "B_m_G") * gauss;
    c.delta = j.contains("delta") ? get_number(j, "delta") : 0.0;
    c.phi0 = (j.contains("phi0_deg") ? get_number(j, "phi0_deg") : 0.0) * pi / 180.0;
    c.omega_m = two_pi * get_number(j, "f_m_kHz") * 1e3;
    c.omega_rf = two_pi * get_number(j, "f_rf_MHz") * 1e6;
    if (j.contains("kappa")) c.kappa = get_number(j, "kappa");
    if (j.contains("coupling")) {
        const auto s = j.at("coupling").get<std::string>();
        if (s == "projected") c.coupling = Coupling::projected;
        else if (s == "uniform") c.coupling = Coupling::uniform;
        else throw ConfigError("coupling must be 'projected' or 'uniform'");
    }
    const bool has_b = j.contains("B_rf_G"), has_o = j.contains("Omega_rf_kHz");
    if (has_b == has_o) throw ConfigError("give exactly one of 'B_rf_G' or 'Omega_rf_kHz'");
    if (has_b) c.B_rf = get_number(j, "B_rf_G") * gauss;
    else c.set_rabi_frequency(two_pi * get_number(j, "Omega_rf_kHz") * 1e3);
    c.validate();
    return c;
}

nlohmann::json field_config_to_json(const FieldConfig& c) {
    nlohmann::json j;
    j["alpha_G_per_cm"] = c.alpha * 1e2;
    j["B_m_G"] = c.B_m / gauss;
    j["delta"] = c.delta;
    j["phi0_deg"] = c.phi0 * 180.0 / pi;
    j["f_m_kHz"] = c.omega_m / two_pi / 1e3;
    j["B_rf_G"] = c.B_rf / gauss;
    j["f_rf_MHz"] = c.omega_rf / two_pi / 1e6;
    j["kappa"] = c.kappa;
    j["coupling"] = c.coupling == Coupling::uniform ? "uniform" : "projected";
    if (c.species.name == "Rb87") {
        j["species"] = "Rb87";
    } else {
        j["species"] = {{"name", c.species.name}, {"mass_amu", c.species.mass / amu},
                        {"g_F", c.species.g_F}, {"m_F", c.species.m_F},
                        {"a_bohr", c.species.scattering_length / bohr_radius}};
    }
    return j;
}

}  // namespace taap::field
