#include "taap/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "taap/errors.hpp"
#include "taap/numerics.hpp"
#include "taap/simd.hpp"

namespace taap::potential {

using namespace constants;

double larmor_frequency(const Field& B, const AtomSpecies& s) { return s.mu_B * std::abs(s.g_F) * B.norm() / hbar; }

double adiabatic_potential(const FieldConfig& c, const Position& r, double theta_m, bool gravity) {
    const Field B = field::instantaneous_field(c, r, theta_m);
    const double om = field::rf_coupling(c, r, theta_m);
    const double det = larmor_frequency(B, c.species) - c.omega_rf;
    double U = std::abs(c.species.m_F) * hbar * std::sqrt(det * det + om * om);
    if (gravity) U += c.species.mass * c.species.gravity * r.z;
    return U;
}

TaapEvaluator::TaapEvaluator(const FieldConfig& c, int n_quad, bool gravity) : cfg_(c), gravity_(gravity) {
    if (n_quad < 8) throw ConfigError("n_quad must be at least 8");
    sin_.resize(static_cast<std::size_t>(n_quad));
    for (int k = 0; k < n_quad; ++k) sin_[static_cast<std::size_t>(k)] = std::sin(two_pi * k / n_quad);
    gamma_ = c.species.mu_B * std::abs(c.species.g_F) / hbar;
    rabi_ = c.rabi_frequency();
    scale_ = std::abs(c.species.m_F) * hbar;
}

double TaapEvaluator::without_gravity(const Position& r) const {
    const Field q = field::quadrupole_field(cfg_.alpha, r);
    const Field d = cfg_.B_m * field::modulation_direction(cfg_);
    simd::TaapInput in{{q.x, q.y, q.z}, {d.x, d.y, d.z}, sin_.data(), sin_.size(),
                       gamma_, cfg_.omega_rf, rabi_, cfg_.coupling == field::Coupling::projected};
    const simd::TaapSum s = simd::taap_phase_average(in);
    if (s.min_field < field::zero_field_threshold) throw ZeroField("field magnitude below threshold during modulation cycle");
    return scale_ * s.mean_root;
}

double TaapEvaluator::operator()(const Position& r) const {
    double U = without_gravity(r);
    if (gravity_) U += cfg_.species.mass * cfg_.species.gravity * r.z;
    return U;
}

double taap_potential(const FieldConfig& c, const Position& r, int n_quad, bool gravity) {
    return TaapEvaluator(c, n_quad, gravity)(r);
}

RingAnalytics analytic_ring(const FieldConfig& c, std::optional<double> R) {
    const auto& s = c.species;
    const double rabi = c.rabi_frequency();
    if (!(rabi > 0.0)) throw DomainError("Rabi frequency must be positive");
    RingAnalytics a;
    a.beta_m = std::abs(s.g_F) * s.mu_B * c.B_m / (hbar * c.omega_rf);
    a.omega_0 = std::abs(s.m_F * s.g_F) * s.mu_B * c.alpha / std::sqrt(s.mass * hbar * rabi);
    const double b2 = 1.0 + a.beta_m * a.beta_m;
    a.omega_r = a.omega_0 * std::pow(b2, -0.25);
    a.omega_z = 2.0 * a.omega_0 * std::sqrt(std::max(0.0, 1.0 - 1.0 / std::sqrt(b2)));
    a.R_est = hbar * c.omega_rf / (std::abs(s.g_F) * s.mu_B * c.alpha);
    a.R_used = R.value_or(a.R_est);
    a.omega_phi = std::sqrt(c.delta * s.gravity / (2.0 * a.R_used));
    a.V_bottom = std::abs(s.m_F) * hbar * rabi;
    return a;
}

namespace {

struct Point2 {
    double rho, z, V;
};

class RingSolver {
public:
    RingSolver(const TaapEvaluator& U, const CharacterizeOptions& opt, double R_est)
        : U_(U), opt_(opt), rho_lo_(0.2 * R_est), rho_hi_(3.0 * R_est), z_lim_(1.5 * R_est), R_est_(R_est) {}

    double at(double rho, double z, double phi) const { return U_(cylindrical(rho, phi, z)); }

    // coordinate descent with golden-section line searches plus a pattern move per sweep
    Point2 minimize(double phi, double rho, double z, int* sweeps_out = nullptr) const {
        double step_r = 0.01 * R_est_, step_z = 0.01 * R_est_;
        for (int sweep = 1; sweep <= opt_.max_sweeps; ++sweep) {
            const double r_start = rho, z_start = z;
            rho = line(
                [&](double r) { return at(r, z, phi); }, rho, step_r, rho_lo_, rho_hi_);
            z = line(
                [&](double zz) { return at(rho, zz, phi); }, z, step_z, -z_lim_, z_lim_);
            const double dr = rho - r_start, dz = z - z_start;
            step_r = std::max(2.0 * std::abs(dr), 1e-9);
            step_z = std::max(2.0 * std::abs(dz), 1e-9);
            const double move = std::hypot(dr, dz);
            if (move > 0.0) {
                try {
                    auto g = [&](double t) {
                        const double r = rho + t * dr, zz = z + t * dz;
                        if (r < rho_lo_ || r > rho_hi_ || std::abs(zz) > z_lim_) return std::numeric_limits<double>::infinity();
                        return at(r, zz, phi);
                    };
                    const num::Bracket br = num::bracket_minimum(g, 0.0, 1.0, -1e6, 1e6, 40);
                    const auto m = num::golden_section(g, br.a, br.c, opt_.tol / move);
                    if (m.f < at(rho, z, phi)) {
                        rho += m.x * dr;
                        z += m.x * dz;
                    }
                } catch (const NoMinimum&) {
                }
            }
            if (move < 10.0 * opt_.tol) {
                if (sweeps_out) *sweeps_out = sweep;
                return {rho, z, at(rho, z, phi)};
            }
        }
        throw NoMinimum("coordinate descent exceeded its sweep budget");
    }

private:
    template <class F>
    double line(F&& f, double x0, double step, double lo, double hi) const {
        const num::Bracket br = num::bracket_minimum(f, x0, step, lo, hi);
        const double x = num::golden_section(f, br.a, br.c, opt_.tol).x;
        return f(x) <= f(x0) ? x : x0;
    }

    const TaapEvaluator& U_;
    CharacterizeOptions opt_;
    double rho_lo_, rho_hi_, z_lim_, R_est_;
};

void fit_ring_circle(const std::vector<ProfilePoint>& pts, TrapCharacterization& ch) {
    const auto n = static_cast<Eigen::Index>(pts.size());
    Eigen::MatrixXd P(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& q = pts[static_cast<std::size_t>(i)];
        P.row(i) << q.rho * std::cos(q.phi), q.rho * std::sin(q.phi), q.z;
    }
    const Eigen::RowVector3d c = P.colwise().mean();
    if (n < 3) {
        double s = 0.0;
        for (const auto& q : pts) s += q.rho;
        ch.ring_radius = s / static_cast<double>(n);
        ch.ring_center = {0.0, 0.0, c(2)};
        return;
    }
    const Eigen::MatrixXd D = P.rowwise() - c;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(D, Eigen::ComputeThinV);
    const Eigen::Vector3d e1 = svd.matrixV().col(0), e2 = svd.matrixV().col(1);
    Eigen::MatrixXd A(n, 3);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double u = D.row(i).dot(e1), v = D.row(i).dot(e2);
        A.row(i) << 2.0 * u, 2.0 * v, 1.0;
        b(i) = u * u + v * v;
    }
    const Eigen::Vector3d s = A.colPivHouseholderQr().solve(b);
    ch.ring_radius = std::sqrt(s(2) + s(0) * s(0) + s(1) * s(1));
    const Eigen::Vector3d cc = c.transpose() + s(0) * e1 + s(1) * e2;
    ch.ring_center = {cc(0), cc(1), cc(2)};
}

}  // namespace

TrapCharacterization characterize_numeric(const FieldConfig& c, const CharacterizeOptions& opt) {
    c.validate();
    if (opt.n_phi < 1) throw ConfigError("n_phi must be positive");
    const TaapEvaluator U(c, opt.n_quad, opt.gravity);
    const RingAnalytics ra = analytic_ring(c);
    const RingSolver solver(U, opt, ra.R_est);

    const auto n_phi = static_cast<std::size_t>(opt.n_phi);
    std::vector<ProfilePoint> prof(n_phi);
    std::vector<int> sweeps(n_phi);
    num::parallel_for(n_phi, [&](std::size_t i) {
        const double phi = two_pi * static_cast<double>(i) / static_cast<double>(n_phi);
        const Point2 p = solver.minimize(phi, ra.R_est, 0.0, &sweeps[i]);
        prof[i] = {phi, p.V, p.rho, p.z};
    });

    TrapCharacterization ch;
    ch.azimuthal_profile = prof;
    for (int s : sweeps) ch.sweeps = std::max(ch.sweeps, s);
    fit_ring_circle(prof, ch);

    // refine the azimuth of the lowest point
    std::size_t imin = 0;
    for (std::size_t i = 1; i < n_phi; ++i)
        if (prof[i].V < prof[imin].V) imin = i;
    double phi_min = prof[imin].phi, rho_m = prof[imin].rho, z_m = prof[imin].z;
    const double dphi = two_pi / static_cast<double>(n_phi);
    const double spread = std::abs(prof[(imin + n_phi / 2) % n_phi].V - prof[imin].V);
    if (n_phi >= 3 && spread > 1e-12 * std::abs(prof[imin].V)) {
        auto g = [&](double phi) { return solver.minimize(phi, prof[imin].rho, prof[imin].z).V; };
        const auto m = num::golden_section(g, phi_min - dphi, phi_min + dphi, 1e-9);
        const Point2 p = solver.minimize(m.x, prof[imin].rho, prof[imin].z);
        phi_min = m.x;
        rho_m = p.rho;
        z_m = p.z;
    }
    phi_min = std::remainder(phi_min, two_pi);
    if (phi_min < 0.0) phi_min += two_pi;
    ch.phi_min = phi_min;
    ch.z_min = z_m;
    ch.min_position = cylindrical(rho_m, phi_min, z_m);
    ch.V_min = U(ch.min_position);

    // Hessian in local (rho, z, arc length) coordinates; equals the Cartesian one at a minimum
    const double h = opt.hessian_step;
    auto f = [&](const Eigen::Vector3d& d) {
        return U(cylindrical(rho_m + d(0), phi_min + d(2) / rho_m, z_m + d(1)));
    };
    Eigen::Matrix3d H;
    const double f0 = f(Eigen::Vector3d::Zero());
    for (int a = 0; a < 3; ++a) {
        const Eigen::Vector3d ea = Eigen::Vector3d::Unit(a) * h;
        H(a, a) = (f(ea) - 2.0 * f0 + f(-ea)) / (h * h);
        for (int b = a + 1; b < 3; ++b) {
            const Eigen::Vector3d eb = Eigen::Vector3d::Unit(b) * h;
            H(a, b) = H(b, a) = (f(ea + eb) - f(ea - eb) - f(-ea + eb) + f(-ea - eb)) / (4.0 * h * h);
        }
    }
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) ch.hessian[a][b] = H(a, b);

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(H);
    const Eigen::Vector3d ev = es.eigenvalues();
    const Eigen::Matrix3d V = es.eigenvectors();
    const double scale = ev.cwiseAbs().maxCoeff();
    auto freq = [&](int k) {
        double lam = ev(k);
        if (lam < 0.0) {
            if (lam < -1e-6 * scale) throw NoMinimum("Hessian at the ring minimum is not positive semi-definite");
            lam = 0.0;
        }
        return std::sqrt(lam / c.species.mass);
    };
    int kphi = 0;
    for (int k = 1; k < 3; ++k)
        if (std::abs(V(2, k)) > std::abs(V(2, kphi))) kphi = k;
    int kz = -1, kr = -1;
    for (int k = 0; k < 3; ++k) {
        if (k == kphi) continue;
        if (kz < 0 || std::abs(V(1, k)) > std::abs(V(1, kz))) kz = k;
    }
    for (int k = 0; k < 3; ++k)
        if (k != kphi && k != kz) kr = k;
    ch.omega_phi_num = freq(kphi);
    ch.omega_z_num = freq(kz);
    ch.omega_r_num = freq(kr);
    return ch;
}

namespace {

double min_larmor(const FieldConfig& c, const std::vector<Position>& ring) {
    constexpr int n_theta = 256;
    double lmin = std::numeric_limits<double>::infinity();
    for (const auto& r : ring)
        for (int k = 0; k < n_theta; ++k)
            lmin = std::min(lmin, larmor_frequency(field::instantaneous_field(c, r, two_pi * k / n_theta), c.species));
    return lmin;
}

AdiabaticityReport check(const FieldConfig& c, double w_r, double w_z, const std::vector<Position>& ring) {
    AdiabaticityReport rep;
    const double inf = std::numeric_limits<double>::infinity();
    rep.omega_m_over_omega_r = w_r > 0.0 ? c.omega_m / w_r : inf;
    rep.omega_m_over_omega_z = w_z > 0.0 ? c.omega_m / w_z : inf;
    rep.larmor_min = min_larmor(c, ring);
    rep.larmor_min_over_omega_m = rep.larmor_min / c.omega_m;
    std::string fail;
    if (rep.omega_m_over_omega_r < adiabatic_margin) fail += " omega_m >> omega_r fails;";
    if (rep.omega_m_over_omega_z < adiabatic_margin) fail += " omega_m >> omega_z fails;";
    if (rep.larmor_min_over_omega_m < adiabatic_margin) fail += " Larmor_min >> omega_m fails;";
    if (!fail.empty()) throw AdiabaticityViolation("adiabaticity violated:" + fail);
    return rep;
}

}  // namespace

AdiabaticityReport adiabaticity_check(const FieldConfig& c, const TrapCharacterization& ch) {
    std::vector<Position> ring;
    for (const auto& p : ch.azimuthal_profile) ring.push_back(cylindrical(p.rho, p.phi, p.z));
    if (ring.empty()) ring.push_back(ch.min_position);
    return check(c, ch.omega_r_num, ch.omega_z_num, ring);
}

AdiabaticityReport adiabaticity_check(const FieldConfig& c, const RingAnalytics& ra) {
    std::vector<Position> ring;
    for (int i = 0; i < 36; ++i) ring.push_back(cylindrical(ra.R_est, two_pi * i / 36.0, 0.0));
    return check(c, ra.omega_r, ra.omega_z, ring);
}

}  // namespace taap::potential
