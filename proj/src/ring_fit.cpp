#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>

#include <nlohmann/json.hpp>

#include "taap/errors.hpp"
#include "taap/imaging.hpp"
#include "taap/simd.hpp"

namespace taap::imaging {

using namespace constants;
namespace sp = simd;

double modulation(double phi, double h1, double phi1, double h2, double phi2) {
    return h1 * std::cos(phi + phi1) + h2 * std::cos(2.0 * phi + phi2);
}

Extrema modulation_extrema(double h1, double phi1, double h2, double phi2) {
    constexpr int n = 4096;
    const double h = two_pi / n;
    auto f = [&](double x) { return modulation(x, h1, phi1, h2, phi2); };
    int imin = 0, imax = 0;
    std::array<double, n> v{};
    for (int i = 0; i < n; ++i) {
        v[static_cast<std::size_t>(i)] = f(i * h);
        if (v[static_cast<std::size_t>(i)] < v[static_cast<std::size_t>(imin)]) imin = i;
        if (v[static_cast<std::size_t>(i)] > v[static_cast<std::size_t>(imax)]) imax = i;
    }
    auto refine = [&](int i) {
        const double fm = v[static_cast<std::size_t>((i + n - 1) % n)], f0 = v[static_cast<std::size_t>(i)],
                     fp = v[static_cast<std::size_t>((i + 1) % n)];
        const double den = fm - 2.0 * f0 + fp;
        const double x = i * h + (den != 0.0 ? 0.5 * h * (fm - fp) / den : 0.0);
        return std::pair{x, f(x)};
    };
    auto [xmin, fmin] = refine(imin);
    auto [xmax, fmax] = refine(imax);
    if (fmin > v[static_cast<std::size_t>(imin)]) std::tie(xmin, fmin) = std::pair{imin * h, v[static_cast<std::size_t>(imin)]};
    if (fmax < v[static_cast<std::size_t>(imax)]) std::tie(xmax, fmax) = std::pair{imax * h, v[static_cast<std::size_t>(imax)]};
    return {fmin, fmax, xmin, xmax};
}

double flatness_from_fit(const RingFitResult& fit, double T_phys) {
    if (!(T_phys > 0.0)) throw DomainError("T_phys must be positive");
    if (!(fit.T_fit > 0.0)) throw DomainError("fit energy scale must be positive");
    const Extrema e = modulation_extrema(fit.h1, fit.phi1, fit.h2, fit.phi2);
    return k_B * T_phys * (e.max - e.min) / fit.T_fit;
}

namespace {

constexpr double um = 1e-6;

using ParamVec = std::array<double, sp::ring_param_count>;

ParamVec to_params(const RingFitResult& f, double scale) {
    ParamVec p{};
    p[sp::j0] = f.j0 / scale;
    p[sp::k0] = f.k0 / scale;
    p[sp::rho0] = f.rho0 / um;
    p[sp::drho] = f.delta_rho / um;
    p[sp::mu] = f.mu_fit;
    p[sp::temp] = f.T_fit;
    p[sp::c1] = f.h1 * std::cos(f.phi1);
    p[sp::s1] = f.h1 * std::sin(f.phi1);
    p[sp::c2] = f.h2 * std::cos(f.phi2);
    p[sp::s2] = f.h2 * std::sin(f.phi2);
    p[sp::cx] = f.center_x / um;
    p[sp::cy] = f.center_y / um;
    p[sp::ec] = f.ellipticity * std::cos(2.0 * f.ellipticity_angle);
    p[sp::es] = f.ellipticity * std::sin(2.0 * f.ellipticity_angle);
    return p;
}

RingFitResult from_params(const ParamVec& p, double scale) {
    RingFitResult f;
    f.j0 = p[sp::j0] * scale;
    f.k0 = p[sp::k0] * scale;
    f.rho0 = p[sp::rho0] * um;
    f.delta_rho = p[sp::drho] * um;
    f.mu_fit = p[sp::mu];
    f.T_fit = p[sp::temp];
    f.h1 = std::hypot(p[sp::c1], p[sp::s1]);
    f.phi1 = std::atan2(p[sp::s1], p[sp::c1]);
    f.h2 = std::hypot(p[sp::c2], p[sp::s2]);
    f.phi2 = std::atan2(p[sp::s2], p[sp::c2]);
    f.center_x = p[sp::cx] * um;
    f.center_y = p[sp::cy] * um;
    f.ellipticity = std::hypot(p[sp::ec], p[sp::es]);
    f.ellipticity_angle = 0.5 * std::atan2(p[sp::es], p[sp::ec]);
    return f;
}

struct PixelSet {
    std::vector<double> x, y, d;
    double scale = 1.0;

    explicit PixelSet(const DensityImage& img) {
        const auto& g = img.grid;
        x.reserve(g.size());
        y.reserve(g.size());
        d.reserve(g.size());
        double mx = 0.0;
        for (double v : img.data) mx = std::max(mx, std::abs(v));
        scale = mx > 0.0 ? mx : 1.0;
        for (std::size_t r = 0; r < g.n_rows; ++r)
            for (std::size_t c = 0; c < g.n_cols; ++c) {
                x.push_back(g.x(c) / um);
                y.push_back(g.y(r) / um);
                d.push_back(img.at(r, c) / scale);
            }
    }
    sp::RingPixels view() const { return {x.data(), y.data(), d.data(), x.size()}; }
};

bool valid(const ParamVec& p) {
    return p[sp::drho] > 0.0 && p[sp::rho0] > 0.0 && p[sp::mu] > 0.0 && p[sp::temp] > 0.0 &&
           std::hypot(p[sp::ec], p[sp::es]) < 0.5;
}

struct Stage {
    ParamVec p;
    num::LmResult lm;
    std::vector<int> active;
};

Stage run_lm(const PixelSet& px, ParamVec p, const std::vector<int>& active, int max_iter) {
    const auto view = px.view();
    const auto na = static_cast<Eigen::Index>(active.size());
    auto expand = [&](const Eigen::VectorXd& q) {
        ParamVec full = p;
        for (Eigen::Index i = 0; i < na; ++i) full[static_cast<std::size_t>(active[static_cast<std::size_t>(i)])] = q(i);
        return full;
    };
    num::NormalEvaluator ev = [&](const Eigen::VectorXd& q, bool with_j) {
        const ParamVec full = expand(q);
        num::NormalEquations ne;
        if (!valid(full)) {
            ne.chi2 = std::numeric_limits<double>::infinity();
            return ne;
        }
        const sp::RingNormal rn = sp::ring_normal(view, full.data(), with_j);
        ne.chi2 = rn.chi2;
        if (with_j) {
            ne.JtJ.resize(na, na);
            ne.Jtr.resize(na);
            for (Eigen::Index a = 0; a < na; ++a) {
                const int ia = active[static_cast<std::size_t>(a)];
                ne.Jtr(a) = rn.Jtr[static_cast<std::size_t>(ia)];
                for (Eigen::Index b = 0; b < na; ++b)
                    ne.JtJ(a, b) = rn.JtJ[static_cast<std::size_t>(ia * sp::ring_param_count + active[static_cast<std::size_t>(b)])];
            }
        }
        return ne;
    };
    Eigen::VectorXd q0(na);
    for (Eigen::Index i = 0; i < na; ++i) q0(i) = p[static_cast<std::size_t>(active[static_cast<std::size_t>(i)])];
    num::LmOptions lo;
    lo.max_iter = max_iter;
    lo.chi2_rel_tol = 1e-13;
    Stage st;
    st.lm = num::levenberg_marquardt(ev, q0, lo);
    st.p = expand(st.lm.p);
    st.active = active;
    return st;
}

std::vector<int> active_set(const FitOptions& opt, bool thermal_only) {
    std::vector<int> a;
    if (opt.fit_thermal) a.push_back(sp::j0);
    if (opt.fit_condensate && !thermal_only) {
        a.push_back(sp::k0);
        if (opt.fit_thermal) a.push_back(sp::mu);
    }
    for (int k : {sp::rho0, sp::drho, sp::c1, sp::s1, sp::c2, sp::s2}) a.push_back(k);
    if (opt.fit_center) {
        a.push_back(sp::cx);
        a.push_back(sp::cy);
    }
    if (opt.fit_ellipticity) {
        a.push_back(sp::ec);
        a.push_back(sp::es);
    }
    return a;
}

double sig(const Eigen::MatrixXd& C, const std::vector<int>& active, int k) {
    for (std::size_t i = 0; i < active.size(); ++i)
        if (active[i] == k) {
            const auto ii = static_cast<Eigen::Index>(i);
            return std::sqrt(std::max(0.0, C(ii, ii)));
        }
    return 0.0;
}

double cov(const Eigen::MatrixXd& C, const std::vector<int>& active, int a, int b) {
    Eigen::Index ia = -1, ib = -1;
    for (std::size_t i = 0; i < active.size(); ++i) {
        if (active[i] == a) ia = static_cast<Eigen::Index>(i);
        if (active[i] == b) ib = static_cast<Eigen::Index>(i);
    }
    return ia < 0 || ib < 0 ? 0.0 : C(ia, ib);
}

void polar_sigma(double c, double s, double vc, double vs, double vcs, double& sh, double& sphi) {
    const double h2 = c * c + s * s;
    if (h2 == 0.0) {
        sh = std::sqrt(std::max(0.0, 0.5 * (vc + vs)));
        sphi = pi;
        return;
    }
    sh = std::sqrt(std::max(0.0, (c * c * vc + s * s * vs + 2 * c * s * vcs) / h2));
    sphi = std::sqrt(std::max(0.0, (s * s * vc + c * c * vs - 2 * c * s * vcs) / (h2 * h2)));
}

}  // namespace

DensityImage synth_ring_od(const RingFitResult& fit, const ImageGrid& grid) {
    DensityImage img{grid, std::vector<double>(grid.size(), 0.0)};
    std::vector<double> x, y;
    x.reserve(grid.size());
    y.reserve(grid.size());
    for (std::size_t r = 0; r < grid.n_rows; ++r)
        for (std::size_t c = 0; c < grid.n_cols; ++c) {
            x.push_back(grid.x(c) / um);
            y.push_back(grid.y(r) / um);
        }
    const ParamVec p = to_params(fit, 1.0);
    sp::ring_model({x.data(), y.data(), nullptr, x.size()}, p.data(), img.data.data());
    return img;
}

RingFitResult bootstrap_ring(const DensityImage& img) {
    const auto& g = img.grid;
    if (g.size() == 0) throw RingNotFound("empty image");
    const double peak = *std::max_element(img.data.begin(), img.data.end());
    if (!(peak > 0.0)) throw RingNotFound("image has no positive signal");
    double sw = 0.0, sx = 0.0, sy = 0.0;
    for (std::size_t r = 0; r < g.n_rows; ++r)
        for (std::size_t c = 0; c < g.n_cols; ++c) {
            const double v = img.at(r, c);
            if (v < 0.2 * peak) continue;
            sw += v;
            sx += v * g.x(c);
            sy += v * g.y(r);
        }
    const double cx = sx / sw, cy = sy / sw;

    // radial profile in one-pixel bins
    const double p = g.pixel_size;
    const double rmax = std::hypot(static_cast<double>(g.n_rows), static_cast<double>(g.n_cols)) * p;
    const auto nb = static_cast<std::size_t>(rmax / p) + 1;
    std::vector<double> sum(nb, 0.0), cnt(nb, 0.0);
    for (std::size_t r = 0; r < g.n_rows; ++r)
        for (std::size_t c = 0; c < g.n_cols; ++c) {
            const auto b = static_cast<std::size_t>(std::hypot(g.x(c) - cx, g.y(r) - cy) / p);
            sum[b] += img.at(r, c);
            cnt[b] += 1.0;
        }
    std::vector<double> prof(nb, 0.0);
    for (std::size_t b = 0; b < nb; ++b) prof[b] = cnt[b] > 0 ? sum[b] / cnt[b] : 0.0;
    // light smoothing against pixel noise
    std::vector<double> sm(prof);
    for (std::size_t b = 1; b + 1 < nb; ++b) sm[b] = 0.25 * prof[b - 1] + 0.5 * prof[b] + 0.25 * prof[b + 1];
    const auto ipk = static_cast<std::size_t>(std::max_element(sm.begin(), sm.end()) - sm.begin());
    const double pk = sm[ipk];
    if (ipk < 3 || !(pk > 0.0)) throw RingNotFound("radial profile peaks at the centre; no annulus");
    if (sm[0] > 0.5 * pk && sm[1] > 0.5 * pk) throw RingNotFound("no central hole; image is not annular");
    std::size_t lo = ipk, hi = ipk;
    while (lo > 0 && sm[lo] > 0.5 * pk) --lo;
    while (hi + 1 < nb && sm[hi] > 0.5 * pk) ++hi;
    if (lo == 0 && sm[0] > 0.5 * pk) throw RingNotFound("ring fills the centre");
    const double fwhm = std::max(static_cast<double>(hi - lo), 2.0) * p;

    RingFitResult f;
    f.center_x = cx;
    f.center_y = cy;
    f.rho0 = (static_cast<double>(ipk) + 0.5) * p;
    f.delta_rho = fwhm / (2.0 * std::sqrt(std::log(2.0)));
    f.T_fit = 1.0;

    // azimuthal harmonics of ln(intensity) on the ring
    constexpr int nphi = 64;
    const auto az = azimuthal_profile(img, cx, cy, f.rho0 - 0.5 * fwhm, f.rho0 + 0.5 * fwhm, nphi);
    std::complex<double> a1{}, a2{};
    double lmean = 0.0;
    for (int k = 0; k < nphi; ++k) {
        const double phi = (k + 0.5) * two_pi / nphi;
        const double l = std::log(std::max(az[static_cast<std::size_t>(k)], 1e-3 * pk));
        lmean += l / nphi;
        a1 += l * std::polar(1.0, -phi);
        a2 += l * std::polar(1.0, -2.0 * phi);
    }
    a1 *= 2.0 / nphi;
    a2 *= 2.0 / nphi;
    // ln I = const - (c1 cos - s1 sin + c2 cos2 - s2 sin2) / T
    const double c1 = -std::real(a1), s1 = -std::imag(a1), c2 = -std::real(a2), s2 = -std::imag(a2);
    f.h1 = std::hypot(c1, s1);
    f.phi1 = std::atan2(s1, c1);
    f.h2 = std::hypot(c2, s2);
    f.phi2 = std::atan2(s2, c2);
    f.j0 = std::exp(lmean) * std::exp(1.0);
    f.k0 = 0.0;
    f.mu_fit = 2.0;
    return f;
}

RingFitResult fit_ring_image(const DensityImage& image, std::optional<RingFitResult> init, const FitOptions& opt,
                             DensityImage* residual) {
    if (!opt.fit_thermal && !opt.fit_condensate) throw DomainError("nothing to fit");
    const PixelSet px(image);
    const std::size_t n = px.x.size();
    Stage best;
    bool have = false;
    if (init) {
        ParamVec p = to_params(*init, px.scale);
        if (!opt.fit_condensate) p[sp::k0] = 0.0;
        if (!opt.fit_thermal) p[sp::j0] = 0.0;
        best = run_lm(px, p, active_set(opt, false), opt.max_iter);
        have = true;
    } else {
        RingFitResult seed = bootstrap_ring(image);
        if (!(opt.T_anchor > 0.0)) throw DomainError("T_anchor must be positive");
        seed.T_fit = opt.T_anchor;
        seed.h1 *= opt.T_anchor;
        seed.h2 *= opt.T_anchor;
        seed.delta_rho /= std::sqrt(opt.T_anchor);
        seed.j0 *= std::exp(1.0 / opt.T_anchor - 1.0);
        ParamVec p = to_params(seed, px.scale);
        Stage th;
        if (opt.fit_thermal) {
            th = run_lm(px, p, active_set(opt, true), opt.max_iter);
            p = th.p;
        }
        if (!opt.fit_condensate) {
            best = th;
            have = true;
        } else {
            // condensate on top of the thermal fit, several chemical-potential seeds
            for (double mu0 : {1.3, 1.8, 2.5, 4.0}) {
                ParamVec q = p;
                q[sp::mu] = mu0;
                const double shape = std::pow(1.0 - 1.0 / mu0, 1.5);
                q[sp::k0] = 0.5 * (opt.fit_thermal ? q[sp::j0] * std::exp(-1.0 / q[sp::temp]) : 1.0) / shape;
                if (opt.fit_thermal) q[sp::j0] *= 0.5;
                try {
                    Stage s = run_lm(px, q, active_set(opt, false), opt.max_iter);
                    if (!have || s.lm.chi2 < best.lm.chi2) {
                        best = s;
                        have = true;
                    }
                } catch (const FitDiverged&) {
                }
            }
            if (!have) throw FitDiverged("ring fit did not converge from any seed");
        }
    }

    RingFitResult f = from_params(best.p, px.scale);
    f.n_pixels = n;
    f.iterations = best.lm.iterations;
    f.residual_rms = std::sqrt(best.lm.chi2 / static_cast<double>(n)) * px.scale;
    const Eigen::MatrixXd C = best.lm.covariance(n);
    const auto& a = best.active;
    f.sigma.j0 = sig(C, a, sp::j0) * px.scale;
    f.sigma.k0 = sig(C, a, sp::k0) * px.scale;
    f.sigma.rho0 = sig(C, a, sp::rho0) * um;
    f.sigma.delta_rho = sig(C, a, sp::drho) * um;
    f.sigma.mu_fit = sig(C, a, sp::mu);
    f.sigma.T_fit = 0.0;
    f.sigma.center_x = sig(C, a, sp::cx) * um;
    f.sigma.center_y = sig(C, a, sp::cy) * um;
    const auto& p = best.p;
    polar_sigma(p[sp::c1], p[sp::s1], cov(C, a, sp::c1, sp::c1), cov(C, a, sp::s1, sp::s1), cov(C, a, sp::c1, sp::s1),
                f.sigma.h1, f.sigma.phi1);
    polar_sigma(p[sp::c2], p[sp::s2], cov(C, a, sp::c2, sp::c2), cov(C, a, sp::s2, sp::s2), cov(C, a, sp::c2, sp::s2),
                f.sigma.h2, f.sigma.phi2);
    double dummy = 0.0;
    polar_sigma(p[sp::ec], p[sp::es], cov(C, a, sp::ec, sp::ec), cov(C, a, sp::es, sp::es), cov(C, a, sp::ec, sp::es),
                f.sigma.ellipticity, dummy);

    if (residual) {
        *residual = synth_ring_od(f, image.grid);
        for (std::size_t i = 0; i < n; ++i) residual->data[i] = image.data[i] - residual->data[i];
    }
    return f;
}

ResidualHarmonics residual_ring_harmonics(const DensityImage& res, const RingFitResult& fit) {
    const auto& g = res.grid;
    std::complex<double> c1{}, c2{};
    double s = 0.0, s2 = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < g.n_rows; ++r)
        for (std::size_t c = 0; c < g.n_cols; ++c) {
            const double dx = g.x(c) - fit.center_x, dy = g.y(r) - fit.center_y;
            if (std::abs(std::hypot(dx, dy) - fit.rho0) > 2.0 * fit.delta_rho) continue;
            const double v = res.at(r, c), phi = std::atan2(dy, dx);
            c1 += v * std::polar(1.0, -phi);
            c2 += v * std::polar(1.0, -2.0 * phi);
            s += v;
            s2 += v * v;
            ++n;
        }
    ResidualHarmonics h;
    h.n_pixels = n;
    if (n < 2) return h;
    const double nn = static_cast<double>(n);
    const double var = (s2 - s * s / nn) / (nn - 1.0);
    h.power1 = std::norm(c1 * (2.0 / nn));
    h.power2 = std::norm(c2 * (2.0 / nn));
    h.noise_power = 4.0 * var / nn;
    return h;
}

nlohmann::json fit_to_json(const RingFitResult& f) {
    nlohmann::json j;
    j["j0"] = f.j0;
    j["k0"] = f.k0;
    j["rho0_m"] = f.rho0;
    j["delta_rho_m"] = f.delta_rho;
    j["T_fit"] = f.T_fit;
    j["mu_fit"] = f.mu_fit;
    j["h1"] = f.h1;
    j["h2"] = f.h2;
    j["phi1_rad"] = f.phi1;
    j["phi2_rad"] = f.phi2;
    j["center_x_m"] = f.center_x;
    j["center_y_m"] = f.center_y;
    j["ellipticity"] = f.ellipticity;
    j["ellipticity_angle_rad"] = f.ellipticity_angle;
    j["residual_rms"] = f.residual_rms;
    j["iterations"] = f.iterations;
    j["n_pixels"] = f.n_pixels;
    const auto& s = f.sigma;
    j["sigma"] = {{"j0", s.j0},         {"k0", s.k0},       {"rho0_m", s.rho0},         {"delta_rho_m", s.delta_rho},
                  {"T_fit", s.T_fit},   {"mu_fit", s.mu_fit}, {"h1", s.h1},             {"h2", s.h2},
                  {"phi1_rad", s.phi1}, {"phi2_rad", s.phi2}, {"center_x_m", s.center_x}, {"center_y_m", s.center_y},
                  {"ellipticity", s.ellipticity}};
    return j;
}

RingFitResult fit_from_json(const nlohmann::json& j) {
    try {
        RingFitResult f;
        f.j0 = j.at("j0").get<double>();
        f.k0 = j.at("k0").get<double>();
        f.rho0 = j.at("rho0_m").get<double>();
        f.delta_rho = j.at("delta_rho_m").get<double>();
        f.T_fit = j.at("T_fit").get<double>();
        f.mu_fit = j.at("mu_fit").get<double>();
        f.h1 = j.at("h1").get<double>();
        f.h2 = j.at("h2").get<double>();
        f.phi1 = j.at("phi1_rad").get<double>();
        f.phi2 = j.at("phi2_rad").get<double>();
        f.center_x = j.value("center_x_m", 0.0);
        f.center_y = j.value("center_y_m", 0.0);
        f.ellipticity = j.value("ellipticity", 0.0);
        f.ellipticity_angle = j.value("ellipticity_angle_rad", 0.0);
        f.residual_rms = j.value("residual_rms", 0.0);
        f.iterations = j.value("iterations", 0);
        f.n_pixels = j.value("n_pixels", std::size_t{0});
        if (j.contains("sigma")) {
            const auto& s = j.at("sigma");
            f.sigma = {s.value("j0", 0.0),       s.value("k0", 0.0),       s.value("rho0_m", 0.0),
                       s.value("delta_rho_m", 0.0), s.value("T_fit", 0.0),  s.value("mu_fit", 0.0),
                       s.value("h1", 0.0),       s.value("h2", 0.0),       s.value("phi1_rad", 0.0),
                       s.value("phi2_rad", 0.0), s.value("center_x_m", 0.0), s.value("center_y_m", 0.0),
                       s.value("ellipticity", 0.0)};
        }
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("fit JSON: ") + e.what());
    }
}

}  // namespace taap::imaging
