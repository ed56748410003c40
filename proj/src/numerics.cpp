#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <thread>

#include <boost/math/distributions/chi_squared.hpp>

#include "taap/errors.hpp"
#include "taap/numerics.hpp"

namespace taap::num {

unsigned worker_count() {
    if (const char* env = std::getenv("TAAP_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return static_cast<unsigned>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min<std::size_t>(worker_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            const std::size_t lo = n * w / workers, hi = n * (w + 1) / workers;
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

Minimum1D golden_section(const std::function<double(double)>& f, double a, double b, double tol, int max_eval) {
    constexpr double invphi = 0.6180339887498949;
    if (a > b) std::swap(a, b);
    double c = b - invphi * (b - a), d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    int evals = 2;
    while (b - a > tol && evals < max_eval) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
        ++evals;
    }
    return fc < fd ? Minimum1D{c, fc, evals} : Minimum1D{d, fd, evals};
}

Bracket bracket_minimum(const std::function<double(double)>& f, double x0, double step, double lo, double hi,
                        int max_expand) {
    constexpr double grow = 1.618033988749895;
    double a = x0, b = std::clamp(x0 + step, lo, hi);
    double fa = f(a), fb = f(b);
    if (fb > fa) {
        std::swap(a, b);
        std::swap(fa, fb);
    }
    double c = std::clamp(b + grow * (b - a), lo, hi);
    double fc = f(c);
    for (int i = 0; i < max_expand; ++i) {
        if (fc > fb) {
            if (a > c) std::swap(a, c);
            return {a, b, c};
        }
        if (c == lo || c == hi) break;
        a = b;
        fa = fb;
        b = c;
        fb = fc;
        c = std::clamp(b + grow * (b - a), lo, hi);
        fc = f(c);
    }
    throw NoMinimum("no bracketing minimum inside the search domain");
}

Eigen::MatrixXd LmResult::covariance(std::size_t n_residuals) const {
    const auto n_par = static_cast<std::size_t>(p.size());
    const double dof = n_residuals > n_par ? static_cast<double>(n_residuals - n_par) : 1.0;
    // invert the unit-diagonal scaled matrix so parameter units do not matter
    const Eigen::VectorXd d = JtJ.diagonal().unaryExpr([](double v) { return v > 0.0 ? 1.0 / std::sqrt(v) : 0.0; });
    const Eigen::MatrixXd M = d.asDiagonal() * JtJ * d.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    const Eigen::VectorXd ev = es.eigenvalues();
    const double cut = std::max(ev.cwiseAbs().maxCoeff(), 1e-300) * 1e-13;
    const Eigen::VectorXd inv = ev.unaryExpr([cut](double v) { return v > cut ? 1.0 / v : 0.0; });
    const Eigen::MatrixXd Minv = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
    return (chi2 / dof) * d.asDiagonal() * Minv * d.asDiagonal();
}

LmResult levenberg_marquardt(const NormalEvaluator& eval, Eigen::VectorXd p, const LmOptions& opt) {
    NormalEquations ne = eval(p, true);
    if (!std::isfinite(ne.chi2)) throw FitDiverged("initial residual is not finite");
    LmResult res;
    res.chi2_initial = ne.chi2;
    double lambda = opt.lambda0;
    const auto n = p.size();
    int it = 0;
    bool converged = false;
    while (it < opt.max_iter && !converged) {
        ++it;
        if (ne.chi2 == 0.0) {
            converged = true;
            break;
        }
        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd A = ne.JtJ;
            const double floor = 1e-12 * std::max(ne.JtJ.diagonal().maxCoeff(), 1e-300);
            for (Eigen::Index i = 0; i < n; ++i) A(i, i) += lambda * std::max(ne.JtJ(i, i), floor);
            const Eigen::VectorXd dp = A.ldlt().solve(ne.Jtr);
            if (!dp.allFinite()) {
                lambda *= 10.0;
            } else {
                const Eigen::VectorXd trial = p + dp;
                NormalEquations tne = eval(trial, false);
                if (std::isfinite(tne.chi2) && tne.chi2 <= ne.chi2) {
                    const double drop = (ne.chi2 - tne.chi2) / ne.chi2;
                    const double step = dp.norm() / (p.norm() + 1e-300);
                    p = trial;
                    ne = eval(p, true);
                    lambda = std::max(lambda * 0.1, 1e-12);
                    accepted = true;
                    if (drop < opt.chi2_rel_tol || step < opt.step_rel_tol) converged = true;
                } else {
                    lambda *= 10.0;
                }
            }
            if (!accepted && lambda > 1e16) {
                // no downhill direction left at this precision
                converged = true;
                break;
            }
        }
    }
    if (!converged) throw FitDiverged("Levenberg-Marquardt exceeded its iteration budget");
    if (!(ne.chi2 <= res.chi2_initial)) throw FitDiverged("fit did not reduce the residual");
    res.p = p;
    res.JtJ = ne.JtJ;
    res.chi2 = ne.chi2;
    res.iterations = it;
    res.converged = true;
    return res;
}

NormalEvaluator dense_evaluator(ResidualFn fn) {
    return [fn = std::move(fn)](const Eigen::VectorXd& p, bool with_jacobian) {
        Eigen::VectorXd r;
        Eigen::MatrixXd J;
        fn(p, r, with_jacobian ? &J : nullptr);
        NormalEquations ne;
        ne.chi2 = r.squaredNorm();
        if (with_jacobian) {
            ne.JtJ = J.transpose() * J;
            ne.Jtr = J.transpose() * r;
        }
        return ne;
    };
}

double chi_square_sf(double stat, double dof) {
    if (dof <= 0) return 1.0;
    boost::math::chi_squared dist(dof);
    return boost::math::cdf(boost::math::complement(dist, std::max(stat, 0.0)));
}

ChiSquareTest chi_square_test(std::span<const double> observed, std::span<const double> prob, double min_expected) {
    double total = 0.0, ptot = 0.0;
    for (double o : observed) total += o;
    for (double q : prob) ptot += q;
    std::vector<double> obs, expct;
    double o_acc = 0.0, e_acc = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        o_acc += observed[i];
        e_acc += total * prob[i] / ptot;
        if (e_acc >= min_expected) {
            obs.push_back(o_acc);
            expct.push_back(e_acc);
            o_acc = e_acc = 0.0;
        }
    }
    if (e_acc > 0.0 || o_acc > 0.0) {
        if (expct.empty()) {
            obs.push_back(o_acc);
            expct.push_back(e_acc);
        } else {
            obs.back() += o_acc;
            expct.back() += e_acc;
        }
    }
    ChiSquareTest t;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const double d = obs[i] - expct[i];
        t.statistic += d * d / expct[i];
    }
    t.dof = static_cast<int>(obs.size()) - 1;
    t.p_value = chi_square_sf(t.statistic, t.dof);
    return t;
}

double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double F = cdf(x[i]);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - F, F - static_cast<double>(i) / n});
    }
    return d;
}

double kolmogorov_sf(double d, std::size_t n) {
    const double sn = std::sqrt(static_cast<double>(n));
    const double lam = (sn + 0.12 + 0.11 / sn) * d;
    if (lam < 0.2) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lam * lam);
        sum += (k % 2 ? 2.0 : -2.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(sum, 0.0, 1.0);
}

double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace taap::num
