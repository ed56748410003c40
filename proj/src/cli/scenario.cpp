#include <fstream>
#include <sstream>

#include "taap/cli.hpp"
#include "taap/errors.hpp"

namespace taap::cli {

using nlohmann::json;
using namespace constants;

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("'") + key + "': " + e.what());
    }
}

void reject_unknown(const json& j, const char* where, std::initializer_list<const char*> keys) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : keys) known = known || it.key() == k;
        if (!known) throw ConfigError(std::string("unknown key '") + it.key() + "' in " + where);
    }
}

transport::Restoring restoring_from(const std::string& s) {
    if (s == "pendulum") return transport::Restoring::pendulum;
    if (s == "harmonic") return transport::Restoring::harmonic;
    throw ConfigError("transport.model must be 'pendulum' or 'harmonic', got '" + s + "'");
}

TransportConfig transport_from_json(const json& j) {
    reject_unknown(j, "transport",
                   {"model", "omega_phi_Hz", "radius_um", "dt_s", "t_end_s", "record_every", "schedule", "bang_bang",
                    "initial", "fit", "noise_mrad"});
    TransportConfig t;
    t.restoring = restoring_from(get_or<std::string>(j, "model", "pendulum"));
    if (j.contains("omega_phi_Hz")) t.omega_phi = two_pi * get_or<double>(j, "omega_phi_Hz", 0.0);
    if (j.contains("radius_um")) t.radius = get_or<double>(j, "radius_um", 0.0) * 1e-6;
    t.dt = get_or<double>(j, "dt_s", t.dt);
    if (j.contains("t_end_s")) t.t_end = get_or<double>(j, "t_end_s", 0.0);
    t.record_every = get_or<int>(j, "record_every", t.record_every);
    t.fit = get_or<bool>(j, "fit", true);
    t.noise = get_or<double>(j, "noise_mrad", 0.0) * 1e-3;
    if (j.contains("initial")) {
        const auto& i = j.at("initial");
        t.initial.phi = get_or<double>(i, "phi_rad", 0.0);
        t.initial.phi_dot = get_or<double>(i, "phi_dot_rad_s", 0.0);
    }
    const bool has_s = j.contains("schedule"), has_b = j.contains("bang_bang");
    if (has_s == has_b) throw ConfigError("transport needs exactly one of 'schedule' or 'bang_bang'");
    if (has_s) {
        t.schedule = transport::schedule_from_json(j.at("schedule"));
    } else {
        const auto& b = j.at("bang_bang");
        reject_unknown(b, "bang_bang", {"phi_ddot_rad_s2", "t_accel_s", "hold_time_s", "jumps"});
        if (!t.omega_phi) throw ConfigError("bang_bang needs transport.omega_phi_Hz");
        t.schedule = transport::bang_bang_schedule(get_or<double>(b, "phi_ddot_rad_s2", 0.0),
                                                   get_or<double>(b, "t_accel_s", 0.0),
                                                   get_or<double>(b, "hold_time_s", 0.0), *t.omega_phi);
        if (!get_or<bool>(b, "jumps", true)) t.schedule.jump_start = t.schedule.jump_end = 0.0;
    }
    t.schedule.validate();
    if (!(t.dt > 0.0)) throw ConfigError("transport.dt_s must be positive");
    if (t.record_every < 1) throw ConfigError("transport.record_every must be >= 1");
    if (t.noise < 0.0) throw ConfigError("transport.noise_mrad must be >= 0");
    if (t.omega_phi && !(*t.omega_phi > 0.0)) throw ConfigError("transport.omega_phi_Hz must be positive");
    return t;
}

json transport_to_json(const TransportConfig& t) {
    json j;
    j["model"] = t.restoring == transport::Restoring::pendulum ? "pendulum" : "harmonic";
    if (t.omega_phi) j["omega_phi_Hz"] = *t.omega_phi / two_pi;
    if (t.radius) j["radius_um"] = *t.radius * 1e6;
    j["dt_s"] = t.dt;
    if (t.t_end) j["t_end_s"] = *t.t_end;
    j["record_every"] = t.record_every;
    j["schedule"] = transport::schedule_to_json(t.schedule);
    j["initial"] = {{"phi_rad", t.initial.phi}, {"phi_dot_rad_s", t.initial.phi_dot}};
    j["fit"] = t.fit;
    j["noise_mrad"] = t.noise * 1e3;
    return j;
}

imaging::EnsembleSpec ensemble_from_json(const json& j) {
    reject_unknown(j, "ensemble", {"N_thermal", "T_nK", "N_bec", "mu_nK", "seed"});
    imaging::EnsembleSpec e;
    e.N_thermal = get_or<std::size_t>(j, "N_thermal", 0);
    e.T = get_or<double>(j, "T_nK", 0.0) * nK;
    e.N_bec = get_or<std::size_t>(j, "N_bec", 0);
    e.mu = get_or<double>(j, "mu_nK", 0.0) * nK * k_B;
    e.seed = get_or<std::uint64_t>(j, "seed", 1);
    e.validate();
    return e;
}

imaging::RingPotential ring_from_json(const json& j, const field::AtomSpecies& sp) {
    reject_unknown(j, "ring",
                   {"R_um", "f_r_Hz", "f_z_Hz", "delta", "phi0_deg", "V_c_nK", "h1", "phi1_deg", "h2", "phi2_deg"});
    imaging::RingPotential r;
    r.species = sp;
    r.R = get_or<double>(j, "R_um", r.R * 1e6) * 1e-6;
    r.omega_r = two_pi * get_or<double>(j, "f_r_Hz", r.omega_r / two_pi);
    r.omega_z = two_pi * get_or<double>(j, "f_z_Hz", r.omega_z / two_pi);
    r.delta = get_or<double>(j, "delta", 0.0);
    r.phi0 = get_or<double>(j, "phi0_deg", 0.0) * pi / 180.0;
    r.V_c = get_or<double>(j, "V_c_nK", 0.0) * nK * k_B;
    r.h1 = get_or<double>(j, "h1", 0.0);
    r.phi1 = get_or<double>(j, "phi1_deg", 0.0) * pi / 180.0;
    r.h2 = get_or<double>(j, "h2", 0.0);
    r.phi2 = get_or<double>(j, "phi2_deg", 0.0) * pi / 180.0;
    if (!(r.R > 0.0) || !(r.omega_r > 0.0) || !(r.omega_z > 0.0)) throw ConfigError("ring: R and frequencies must be positive");
    if (r.h1 < 0.0 || r.h2 < 0.0) throw ConfigError("ring: h1, h2 must be >= 0");
    return r;
}

json ring_to_json(const imaging::RingPotential& r) {
    return {{"R_um", r.R * 1e6},       {"f_r_Hz", r.omega_r / two_pi},     {"f_z_Hz", r.omega_z / two_pi},
            {"delta", r.delta},        {"phi0_deg", r.phi0 * 180.0 / pi},  {"V_c_nK", r.V_c / (k_B * nK)},
            {"h1", r.h1},              {"phi1_deg", r.phi1 * 180.0 / pi},  {"h2", r.h2},
            {"phi2_deg", r.phi2 * 180.0 / pi}};
}

}  // namespace

Scenario default_scenario() {
    Scenario s;
    s.field = field::reference_config();
    return s;
}

Scenario scenario_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("scenario must be a JSON object");
    reject_unknown(j, "scenario", {"field", "characterize", "transport", "ensemble", "ring", "imaging", "seed", "out_dir"});
    Scenario s = default_scenario();
    if (j.contains("field")) s.field = field::field_config_from_json(j.at("field"));
    if (j.contains("characterize")) {
        const auto& c = j.at("characterize");
        reject_unknown(c, "characterize", {"gravity", "n_quad", "n_phi"});
        s.characterize.gravity = get_or<bool>(c, "gravity", s.characterize.gravity);
        s.characterize.n_quad = get_or<int>(c, "n_quad", s.characterize.n_quad);
        s.characterize.n_phi = get_or<int>(c, "n_phi", s.characterize.n_phi);
        if (s.characterize.n_quad < 8) throw ConfigError("characterize.n_quad must be >= 8");
        if (s.characterize.n_phi < 8) throw ConfigError("characterize.n_phi must be >= 8");
    }
    if (j.contains("transport")) s.transport = transport_from_json(j.at("transport"));
    if (j.contains("ensemble")) s.ensemble = ensemble_from_json(j.at("ensemble"));
    if (j.contains("ring")) s.ring = ring_from_json(j.at("ring"), s.field.species);
    if (j.contains("imaging")) {
        const auto& m = j.at("imaging");
        reject_unknown(m, "imaging", {"pixel_size_um", "half_extent_um", "psf_um", "noise_fraction", "T_anchor"});
        auto& im = s.imaging;
        im.pixel_size = get_or<double>(m, "pixel_size_um", im.pixel_size * 1e6) * 1e-6;
        im.half_extent = get_or<double>(m, "half_extent_um", im.half_extent * 1e6) * 1e-6;
        im.psf = get_or<double>(m, "psf_um", 0.0) * 1e-6;
        im.noise_fraction = get_or<double>(m, "noise_fraction", 0.0);
        im.T_anchor = get_or<double>(m, "T_anchor", 1.0);
        if (!(im.pixel_size > 0.0) || !(im.half_extent > im.pixel_size))
            throw ConfigError("imaging: need 0 < pixel_size_um < half_extent_um");
        if (im.psf < 0.0 || im.noise_fraction < 0.0 || !(im.T_anchor > 0.0))
            throw ConfigError("imaging: psf_um, noise_fraction must be >= 0 and T_anchor > 0");
    }
    s.seed = get_or<std::uint64_t>(j, "seed", s.seed);
    s.out_dir = get_or<std::string>(j, "out_dir", s.out_dir.string());
    return s;
}

json scenario_to_json(const Scenario& s) {
    json j;
    j["field"] = field::field_config_to_json(s.field);
    j["characterize"] = {{"gravity", s.characterize.gravity},
                         {"n_quad", s.characterize.n_quad},
                         {"n_phi", s.characterize.n_phi}};
    if (s.transport) j["transport"] = transport_to_json(*s.transport);
    if (s.ensemble) {
        const auto& e = *s.ensemble;
        j["ensemble"] = {{"N_thermal", e.N_thermal}, {"T_nK", e.T / nK},
                         {"N_bec", e.N_bec},         {"mu_nK", e.mu / (k_B * nK)},
                         {"seed", e.seed}};
    }
    if (s.ring) j["ring"] = ring_to_json(*s.ring);
    j["imaging"] = {{"pixel_size_um", s.imaging.pixel_size * 1e6},
                    {"half_extent_um", s.imaging.half_extent * 1e6},
                    {"psf_um", s.imaging.psf * 1e6},
                    {"noise_fraction", s.imaging.noise_fraction},
                    {"T_anchor", s.imaging.T_anchor}};
    j["seed"] = s.seed;
    j["out_dir"] = s.out_dir.string();
    return j;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        // byte offset -> line/column
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ConfigError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
    }
    try {
        return scenario_from_json(j);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

}  // namespace taap::cli
