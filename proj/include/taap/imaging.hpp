#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "taap/field.hpp"
#include "taap/numerics.hpp"

namespace taap::imaging {

using field::AtomSpecies;

struct EnsembleSpec {
    std::size_t N_thermal = 0;
    double T = 0.0;   // K
    std::size_t N_bec = 0;
    double mu = 0.0;  // J
    std::uint64_t seed = 1;

    void validate() const;
};

using PotentialFn = std::function<double(const Position&)>;

// Proposal volume for rejection sampling: an axis-aligned box or a cylindrical annulus.
struct SamplingRegion {
    enum class Kind { box, annulus } kind = Kind::box;
    Position lo{}, hi{};
    double rho_min = 0.0, rho_max = 0.0, z_min = 0.0, z_max = 0.0;

    static SamplingRegion box(Position lo, Position hi);
    static SamplingRegion annulus(double rho_min, double rho_max, double z_min, double z_max);
    Position draw(num::CounterRng& rng) const;
    bool contains(const Position& r) const;
    double volume() const;
};

// Ring radius +- 6 thermal widths; vertical extent +- 6 widths about z_center.
SamplingRegion ring_region(double R, double sigma_rho, double sigma_z, double z_center = 0.0);
double thermal_width(double T, double omega, double mass);

struct SamplingStats {
    std::size_t proposals = 0;
    std::size_t accepted = 0;
    int restarts = 0;
    double floor = 0.0;
    double acceptance() const { return proposals ? static_cast<double>(accepted) / static_cast<double>(proposals) : 0.0; }
};

std::vector<Position> sample_thermal(const PotentialFn& U, double T, std::size_t N, const SamplingRegion& region,
                                     std::uint64_t seed, SamplingStats* stats = nullptr);
// density proportional to max(0, mu - U)
std::vector<Position> sample_thomas_fermi(const PotentialFn& U, double mu, std::size_t N, const SamplingRegion& region,
                                          std::uint64_t seed, SamplingStats* stats = nullptr);

// Tilted ring: harmonic radial/vertical confinement about (R, 0), tilt -(delta/2) m g R cos(phi - phi0),
// plus an azimuthal landscape V_c (1 + h1 cos(phi + phi1) + h2 cos(2 phi + phi2)).
struct RingPotential {
    double R = 436e-6;
    double omega_r = constants::two_pi * 85.3;
    double omega_z = constants::two_pi * 46.2;
    double delta = 0.0;
    double phi0 = 0.0;
    double V_c = 0.0;
    double h1 = 0.0, phi1 = 0.0, h2 = 0.0, phi2 = 0.0;
    AtomSpecies species{};

    double operator()(const Position& r) const;
    double azimuthal(double phi) const;
};

// ---- images ----

struct ImageGrid {
    std::size_t n_rows = 0, n_cols = 0;
    double pixel_size = 0.0;              // m
    double origin_x = 0.0, origin_y = 0.0;  // lower corner of pixel (0, 0), m

    double x(std::size_t col) const { return origin_x + (static_cast<double>(col) + 0.5) * pixel_size; }
    double y(std::size_t row) const { return origin_y + (static_cast<double>(row) + 0.5) * pixel_size; }
    std::size_t size() const { return n_rows * n_cols; }
    static ImageGrid centered(double half_extent, double pixel_size);
};

struct DensityImage {
    ImageGrid grid;
    std::vector<double> data;  // row-major, atoms/m^2

    double& at(std::size_t row, std::size_t col) { return data[row * grid.n_cols + col]; }
    double at(std::size_t row, std::size_t col) const { return data[row * grid.n_cols + col]; }
    double total() const;  // integrated atom number
};

DensityImage render_image(const std::vector<Position>& atoms, const ImageGrid& grid, double sigma_psf = 0.0);
DensityImage render_image(const std::function<double(double, double)>& column_density, const ImageGrid& grid,
                          int supersample = 1, double sigma_psf = 0.0);
void gaussian_blur(DensityImage& img, double sigma);
void add_gaussian_noise(DensityImage& img, double sigma, std::uint64_t seed);

// Mean image value in n_bins azimuthal sectors of the annulus [rho_lo, rho_hi] around (cx, cy).
std::vector<double> azimuthal_profile(const DensityImage& img, double cx, double cy, double rho_lo, double rho_hi,
                                      int n_bins);

// ---- bimodal ring fit ----

struct RingFitResult {
    double j0 = 1.0, k0 = 0.0;
    double rho0 = 0.0, delta_rho = 0.0;  // m
    double T_fit = 1.0, mu_fit = 2.0;
    double h1 = 0.0, h2 = 0.0;
    double phi1 = 0.0, phi2 = 0.0;
    double center_x = 0.0, center_y = 0.0;  // m
    double ellipticity = 0.0, ellipticity_angle = 0.0;
    double residual_rms = 0.0;
    struct Sigma {
        double j0, k0, rho0, delta_rho, T_fit, mu_fit, h1, h2, phi1, phi2, center_x, center_y, ellipticity;
    } sigma{};
    int iterations = 0;
    std::size_t n_pixels = 0;
};

struct FitOptions {
    bool fit_center = true;
    bool fit_ellipticity = false;
    bool fit_thermal = true;
    bool fit_condensate = true;
    int max_iter = 300;
    double T_anchor = 1.0;  // energy scale held fixed when no init is given
};

// m(phi) = h1 cos(phi + phi1) + h2 cos(2 phi + phi2)
double modulation(double phi, double h1, double phi1, double h2, double phi2);
struct Extrema {
    double min, max, phi_min, phi_max;
};
Extrema modulation_extrema(double h1, double phi1, double h2, double phi2);

DensityImage synth_ring_od(const RingFitResult& fit, const ImageGrid& grid);
RingFitResult fit_ring_image(const DensityImage& image, std::optional<RingFitResult> init = std::nullopt,
                             const FitOptions& opt = {}, DensityImage* residual = nullptr);
// Rough ring parameters from centroid, radial profile and azimuthal harmonics.
RingFitResult bootstrap_ring(const DensityImage& image);

double flatness_from_fit(const RingFitResult& fit, double T_phys);

struct ResidualHarmonics {
    double power1 = 0.0, power2 = 0.0;
    double noise_power = 0.0;  // expectation of either power for white residuals
    std::size_t n_pixels = 0;
};
ResidualHarmonics residual_ring_harmonics(const DensityImage& residual, const RingFitResult& fit);

// ---- derived observables ----

double density_variation(double deltaE, double v, const AtomSpecies& sp);
double speed_of_sound(double n, const AtomSpecies& sp);
double peak_density(double N, double omega_ho, const AtomSpecies& sp);
double mach(double v, double c);
double corrugation_attenuation(double k, double z);

struct Atom {
    Position r;
    Velocity v;
};

std::vector<Position> tof_expand(const std::vector<Atom>& atoms, double t, double gravity = constants::g);
// mean distance from the x-y centroid
double cloud_radius(const std::vector<Position>& pos);
double tof_model(double R0, double Omega, double t);

struct TofFit {
    double R0 = 0.0, Omega = 0.0;
    double sigma_R0 = 0.0, sigma_Omega = 0.0;
};
TofFit fit_tof_radius(const std::vector<double>& radii, const std::vector<double>& times);

// ---- serialization ----

nlohmann::json image_metadata(const ImageGrid& g);
ImageGrid grid_from_metadata(const nlohmann::json& j);
nlohmann::json fit_to_json(const RingFitResult& f);
RingFitResult fit_from_json(const nlohmann::json& j);

}  // namespace taap::imaging
