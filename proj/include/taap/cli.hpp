#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taap/imaging.hpp"
#include "taap/potential.hpp"
#include "taap/transport.hpp"

namespace taap::cli {

enum Exit : int { ok = 0, acceptance_failure = 1, config_error = 2, runtime_error = 3 };

struct TransportConfig {
    transport::TransportSchedule schedule;
    transport::Restoring restoring = transport::Restoring::pendulum;
    std::optional<double> omega_phi;  // rad/s; otherwise from the field characterization
    std::optional<double> radius;     // m
    double dt = 1e-4;
    std::optional<double> t_end;
    int record_every = 10;
    transport::ParticleState initial{};
    bool fit = true;
    double noise = 0.0;  // rad, added to the fitted trace
};

struct ImagingConfig {
    double pixel_size = 6e-6;
    double half_extent = 600e-6;
    double psf = 0.0;
    double noise_fraction = 0.0;  // of the image peak
    double T_anchor = 1.0;
};

struct Scenario {
    field::FieldConfig field;
    potential::CharacterizeOptions characterize{};
    std::optional<TransportConfig> transport;
    std::optional<imaging::EnsembleSpec> ensemble;
    std::optional<imaging::RingPotential> ring;
    ImagingConfig imaging;
    std::uint64_t seed = 1;
    std::filesystem::path out_dir = "taap-out";
};

Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& s);
// Parse errors carry line/column.
Scenario load_scenario(const std::filesystem::path& path);
Scenario default_scenario();

struct RunContext {
    bool quiet = false;
    std::ostream* log = nullptr;
};

// ---- output helpers ----

std::string format_g(double v, int digits);
void write_text(const std::filesystem::path& p, const std::string& s);
void write_json(const std::filesystem::path& p, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& p);
void write_csv(const std::filesystem::path& p, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows, int digits);
void write_profile_csv(const std::filesystem::path& p, const std::vector<potential::ProfilePoint>& prof);
void write_image(const std::filesystem::path& stem, const imaging::DensityImage& img);
imaging::DensityImage read_image(const std::filesystem::path& stem);

// ---- subcommands; each returns an exit code and writes into scenario.out_dir ----

int cmd_characterize(const Scenario& s, const RunContext& ctx);
int cmd_transport(const Scenario& s, const RunContext& ctx);
int cmd_image_fit(const Scenario& s, const RunContext& ctx);

struct Verdict {
    std::string item;
    std::string quantity;
    double computed = 0.0;
    double published = 0.0;
    std::string tolerance;
    bool pass = false;
    bool asserted = true;  // informational lines never fail the item
};

const std::vector<std::string>& reproduce_items();
std::vector<Verdict> reproduce(const std::string& item, std::uint64_t seed);
int cmd_reproduce(const std::string& item, const Scenario& s, const RunContext& ctx);

}  // namespace taap::cli
