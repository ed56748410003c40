#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace taap::num {

// ---- counter-based random numbers ----

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key);

enum class Module : std::uint64_t { potential = 1, transport = 2, ensemble = 3, imaging = 4, cli = 5, test = 15 };

inline std::uint64_t stream_id(Module m, std::uint64_t sub) {
    return (static_cast<std::uint64_t>(m) << 56) ^ sub;
}

class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next_u64();
    double uniform();        // [0, 1)
    double uniform_open();   // (0, 1)
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    double normal();

private:
    void refill();

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int used_ = 4;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// ---- deterministic parallel map ----

unsigned worker_count();
// Runs fn(i) for i in [0, n). Work is split statically; fn must only write slot i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// ---- 1-D minimization ----

struct Minimum1D {
    double x;
    double f;
    int evaluations;
};

Minimum1D golden_section(const std::function<double(double)>& f, double a, double b, double tol,
                         int max_eval = 400);

struct Bracket {
    double a, b, c;  // f(b) < f(a), f(b) < f(c)
};

// Expands from [x0, x0 + step] downhill; throws NoMinimum when no bracket within max_expand
// steps or when the bracket leaves [lo, hi].
Bracket bracket_minimum(const std::function<double(double)>& f, double x0, double step, double lo,
                        double hi, int max_expand = 60);

// ---- Levenberg-Marquardt over normal equations ----

struct NormalEquations {
    Eigen::MatrixXd JtJ;
    Eigen::VectorXd Jtr;  // J^T (data - model)
    double chi2 = 0.0;
};

using NormalEvaluator = std::function<NormalEquations(const Eigen::VectorXd&, bool with_jacobian)>;

struct LmOptions {
    int max_iter = 200;
    double chi2_rel_tol = 1e-12;
    double step_rel_tol = 1e-12;
    double lambda0 = 1e-3;
};

struct LmResult {
    Eigen::VectorXd p;
    Eigen::MatrixXd JtJ;
    double chi2 = 0.0;
    double chi2_initial = 0.0;
    int iterations = 0;
    bool converged = false;

    // s^2 (J^T J)^-1 with s^2 = chi2 / (n - p); pseudo-inverse on singular directions
    Eigen::MatrixXd covariance(std::size_t n_residuals) const;
};

// Throws FitDiverged if the iteration budget is exhausted or chi2 ends above its start.
LmResult levenberg_marquardt(const NormalEvaluator& eval, Eigen::VectorXd p0, const LmOptions& opt = {});

// Convenience for small problems with an explicit residual vector and Jacobian.
using ResidualFn = std::function<void(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* J)>;
NormalEvaluator dense_evaluator(ResidualFn fn);

// ---- statistics ----

double chi_square_sf(double stat, double dof);

struct ChiSquareTest {
    double statistic = 0.0;
    int dof = 0;
    double p_value = 0.0;
};

// Pearson test of counts against probabilities; adjacent bins are merged until each has
// expectation >= min_expected.
ChiSquareTest chi_square_test(std::span<const double> observed, std::span<const double> probabilities,
                              double min_expected = 5.0);

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);
double kolmogorov_sf(double d, std::size_t n);

double mean(std::span<const double> v);
double variance(std::span<const double> v);

}  // namespace taap::num
