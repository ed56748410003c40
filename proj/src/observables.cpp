#include <algorithm>
#include <cmath>

#include "taap/errors.hpp"
#include "taap/imaging.hpp"

namespace taap::imaging {

using namespace constants;

double density_variation(double deltaE, double v, const AtomSpecies& sp) {
    if (!(v > 0.0)) throw DomainError("flow speed must be positive");
    const double arg = 1.0 + 2.0 * deltaE / (sp.mass * v * v);
    if (arg < 0.0) throw FlowBlocked("barrier exceeds the kinetic energy of the flow");
    // sqrt(1+x) - 1 without cancellation for tiny x
    const double x = arg - 1.0;
    return x / (std::sqrt(arg) + 1.0);
}

double speed_of_sound(double n, const AtomSpecies& sp) {
    if (n < 0.0) throw DomainError("density must be non-negative");
    const double U0 = 4.0 * pi * hbar * hbar * sp.scattering_length / sp.mass;
    return std::sqrt(n * U0 / sp.mass);
}

double peak_density(double N, double omega_ho, const AtomSpecies& sp) {
    if (!(N > 0.0) || !(omega_ho > 0.0)) throw DomainError("atom number and trap frequency must be positive");
    const double k = sp.mass * omega_ho / (hbar * std::sqrt(sp.scattering_length));
    return std::pow(15.0 * N * k * k * k, 0.4) / (8.0 * pi);
}

double mach(double v, double c) {
    if (!(c > 0.0)) throw DomainError("speed of sound must be positive");
    return v / c;
}

double corrugation_attenuation(double k, double z) {
    const double kz = k * z;
    if (!(kz > 0.0)) throw DomainError("k z must be positive");
    return std::exp(-kz) / std::sqrt(kz);
}

std::vector<Position> tof_expand(const std::vector<Atom>& atoms, double t, double gravity) {
    std::vector<Position> out;
    out.reserve(atoms.size());
    for (const auto& a : atoms)
        out.push_back({a.r.x + a.v.x * t, a.r.y + a.v.y * t, a.r.z + a.v.z * t - 0.5 * gravity * t * t});
    return out;
}

double cloud_radius(const std::vector<Position>& pos) {
    if (pos.empty()) throw DomainError("empty cloud");
    double cx = 0.0, cy = 0.0;
    for (const auto& p : pos) {
        cx += p.x;
        cy += p.y;
    }
    cx /= static_cast<double>(pos.size());
    cy /= static_cast<double>(pos.size());
    double r = 0.0;
    for (const auto& p : pos) r += std::hypot(p.x - cx, p.y - cy);
    return r / static_cast<double>(pos.size());
}

double tof_model(double R0, double Omega, double t) {
    const double w = Omega * t;
    return R0 * std::sqrt(1.0 + w * w);
}

TofFit fit_tof_radius(const std::vector<double>& radii, const std::vector<double>& times) {
    if (radii.size() != times.size()) throw DomainError("radii and times differ in length");
    const std::size_t n = radii.size();
    if (n < 3) throw DomainError("need at least three (radius, time) pairs");

    // R^2 = R0^2 + (R0 Omega)^2 t^2 is linear; use it for the seed
    double st = 0, st2 = 0, sy = 0, sty = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = times[i] * times[i], y = radii[i] * radii[i];
        st += x;
        st2 += x * x;
        sy += y;
        sty += x * y;
    }
    const double nn = static_cast<double>(n);
    const double den = nn * st2 - st * st;
    double b = den != 0.0 ? (nn * sty - st * sy) / den : 0.0;
    double a = (sy - b * st) / nn;
    if (!(a > 0.0)) a = radii.front() * radii.front();
    if (!(b > 0.0)) b = a / (times.back() * times.back() + 1e-300);
    Eigen::VectorXd q0(2);
    q0 << std::sqrt(a), std::sqrt(b / a);

    auto fn = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
        r.resize(static_cast<Eigen::Index>(n));
        if (J) J->resize(static_cast<Eigen::Index>(n), 2);
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            const double t = times[i], w = q(1) * t, s = std::sqrt(1.0 + w * w);
            r(k) = radii[i] - q(0) * s;
            if (J) {
                (*J)(k, 0) = s;
                (*J)(k, 1) = q(0) * w * t / s;
            }
        }
    };
    num::LmOptions lo;
    lo.max_iter = 200;
    const num::LmResult res = num::levenberg_marquardt(num::dense_evaluator(fn), q0, lo);
    const Eigen::MatrixXd C = res.covariance(n);
    TofFit f;
    f.R0 = res.p(0);
    f.Omega = std::abs(res.p(1));
    f.sigma_R0 = std::sqrt(std::max(0.0, C(0, 0)));
    f.sigma_Omega = std::sqrt(std::max(0.0, C(1, 1)));
    return f;
}

}  // namespace taap::imaging
