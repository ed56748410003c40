#include <algorithm>
#include <cmath>
#include <limits>

#include "taap/errors.hpp"
#include "taap/imaging.hpp"

namespace taap::imaging {

using namespace constants;

void EnsembleSpec::validate() const {
    if (N_thermal > 0 && !(T > 0.0)) throw ConfigError("ensemble T must be positive when N_thermal > 0");
    if (N_bec > 0 && !(mu > 0.0)) throw ConfigError("ensemble mu must be positive when N_bec > 0");
}

SamplingRegion SamplingRegion::box(Position lo, Position hi) {
    if (!(hi.x > lo.x && hi.y > lo.y && hi.z > lo.z)) throw DomainError("empty sampling box");
    SamplingRegion r;
    r.kind = Kind::box;
    r.lo = lo;
    r.hi = hi;
    return r;
}

SamplingRegion SamplingRegion::annulus(double rho_min, double rho_max, double z_min, double z_max) {
    if (!(rho_min >= 0.0 && rho_max > rho_min && z_max > z_min)) throw DomainError("empty sampling annulus");
    SamplingRegion r;
    r.kind = Kind::annulus;
    r.rho_min = rho_min;
    r.rho_max = rho_max;
    r.z_min = z_min;
    r.z_max = z_max;
    return r;
}

Position SamplingRegion::draw(num::CounterRng& rng) const {
    if (kind == Kind::box) return {rng.uniform(lo.x, hi.x), rng.uniform(lo.y, hi.y), rng.uniform(lo.z, hi.z)};
    const double a = rho_min * rho_min, b = rho_max * rho_max;
    const double rho = std::sqrt(a + (b - a) * rng.uniform());
    const double phi = two_pi * rng.uniform();
    return cylindrical(rho, phi, rng.uniform(z_min, z_max));
}

bool SamplingRegion::contains(const Position& r) const {
    if (kind == Kind::box)
        return r.x >= lo.x && r.x <= hi.x && r.y >= lo.y && r.y <= hi.y && r.z >= lo.z && r.z <= hi.z;
    const double rho = r.rho();
    return rho >= rho_min && rho <= rho_max && r.z >= z_min && r.z <= z_max;
}

double SamplingRegion::volume() const {
    if (kind == Kind::box) return (hi.x - lo.x) * (hi.y - lo.y) * (hi.z - lo.z);
    return pi * (rho_max * rho_max - rho_min * rho_min) * (z_max - z_min);
}

SamplingRegion ring_region(double R, double sigma_rho, double sigma_z, double z_center) {
    return SamplingRegion::annulus(std::max(0.0, R - 6.0 * sigma_rho), R + 6.0 * sigma_rho, z_center - 6.0 * sigma_z,
                                   z_center + 6.0 * sigma_z);
}

double thermal_width(double T, double omega, double mass) { return std::sqrt(k_B * T / mass) / omega; }

namespace {

constexpr std::size_t chunk_size = 4096;
constexpr std::size_t pilot_size = 65536;

template <class Weight>
std::vector<Position> rejection_sample(const PotentialFn& U, std::size_t N, const SamplingRegion& region,
                                       std::uint64_t seed, std::uint64_t kind, Weight weight, double cap,
                                       SamplingStats* stats) {
    double floor = std::numeric_limits<double>::infinity();
    Position best{};
    {
        num::CounterRng rng(seed, num::stream_id(num::Module::ensemble, (kind << 52) | (1ull << 51)));
        for (std::size_t i = 0; i < pilot_size; ++i) {
            const Position r = region.draw(rng);
            const double u = U(r);
            if (u < floor) {
                floor = u;
                best = r;
            }
        }
    }
    if (!std::isfinite(floor)) throw DomainError("potential is not finite on the sampling region");
    // compass search from the best pilot point so that restarts stay rare
    {
        const Position ext = region.kind == SamplingRegion::Kind::box
                                 ? region.hi - region.lo
                                 : Position{region.rho_max - region.rho_min, region.rho_max - region.rho_min,
                                            region.z_max - region.z_min};
        double step = 0.01;
        const Position axes[3] = {{ext.x, 0, 0}, {0, ext.y, 0}, {0, 0, ext.z}};
        for (int it = 0; it < 10000 && step > 1e-10; ++it) {
            bool moved = false;
            for (const auto& a : axes)
                for (double sgn : {1.0, -1.0}) {
                    const Position r = best + a * (sgn * step);
                    if (!region.contains(r)) continue;
                    const double u = U(r);
                    if (u < floor) {
                        floor = u;
                        best = r;
                        moved = true;
                    }
                }
            if (!moved) step *= 0.5;
        }
    }
    if (floor >= cap) throw LowAcceptance("target density vanishes on the sampling region");

    const std::size_t n_chunks = (N + chunk_size - 1) / chunk_size;
    SamplingStats st;
    for (int attempt = 0; attempt < 16; ++attempt) {
        std::vector<std::vector<Position>> parts(n_chunks);
        std::vector<std::size_t> props(n_chunks, 0);
        std::vector<double> low(n_chunks, floor);
        num::parallel_for(n_chunks, [&](std::size_t c) {
            const std::size_t quota = std::min(chunk_size, N - c * chunk_size);
            num::CounterRng rng(seed, num::stream_id(num::Module::ensemble,
                                                     (kind << 52) | (static_cast<std::uint64_t>(attempt) << 40) | c));
            auto& out = parts[c];
            out.reserve(quota);
            std::size_t p = 0;
            while (out.size() < quota) {
                const Position r = region.draw(rng);
                const double u = U(r);
                ++p;
                if (u < low[c]) low[c] = u;
                if (rng.uniform() < weight(u, floor)) out.push_back(r);
                if (p >= 1000000 && static_cast<double>(out.size()) < 1e-4 * static_cast<double>(p))
                    throw LowAcceptance("rejection-sampling acceptance below 1e-4; sampling region too large");
            }
            props[c] = p;
        });
        const double new_floor = *std::min_element(low.begin(), low.end());
        st.proposals = 0;
        for (auto p : props) st.proposals += p;
        if (new_floor < floor) {
            floor = new_floor;
            ++st.restarts;
            continue;
        }
        std::vector<Position> all;
        all.reserve(N);
        for (auto& part : parts) all.insert(all.end(), part.begin(), part.end());
        st.accepted = all.size();
        st.floor = floor;
        if (stats) *stats = st;
        return all;
    }
    throw LowAcceptance("potential floor kept moving during rejection sampling");
}

}  // namespace

std::vector<Position> sample_thermal(const PotentialFn& U, double T, std::size_t N, const SamplingRegion& region,
                                     std::uint64_t seed, SamplingStats* stats) {
    if (!(T > 0.0)) throw DomainError("temperature must be positive");
    const double kT = k_B * T;
    return rejection_sample(
        U, N, region, seed, 1, [kT](double u, double fl) { return std::exp(-(u - fl) / kT); },
        std::numeric_limits<double>::infinity(), stats);
}

std::vector<Position> sample_thomas_fermi(const PotentialFn& U, double mu, std::size_t N, const SamplingRegion& region,
                                          std::uint64_t seed, SamplingStats* stats) {
    return rejection_sample(
        U, N, region, seed, 2, [mu](double u, double fl) { return std::max(0.0, mu - u) / (mu - fl); }, mu, stats);
}

double RingPotential::azimuthal(double phi) const {
    const double tilt = -0.5 * delta * species.mass * species.gravity * R * std::cos(phi - phi0);
    return tilt + V_c * (1.0 + h1 * std::cos(phi + phi1) + h2 * std::cos(2.0 * phi + phi2));
}

double RingPotential::operator()(const Position& r) const {
    const double rho = r.rho();
    const double phi = std::atan2(r.y, r.x);
    const double m = species.mass;
    return 0.5 * m * omega_r * omega_r * (rho - R) * (rho - R) + 0.5 * m * omega_z * omega_z * r.z * r.z + azimuthal(phi);
}

}  // namespace taap::imaging
