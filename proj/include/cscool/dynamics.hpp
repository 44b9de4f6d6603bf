#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "cscool/config.hpp"
#include "cscool/params.hpp"

namespace cscool {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct UnstableError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SolverFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Linearized Langevin model in the quadrature basis
/// (X_c, Y_c, x_1, p_1, ..., x_N, p_N), vacuum variance 1/2.
struct LinearModel {
    std::vector<std::string> basis;
    Mat drift;      ///< M: dv/dt = M v + noise
    Mat diffusion;  ///< D: symmetric PSD, from MV + VM^T + D = 0
    std::uint64_t params_hash = 0;

    int n_modes() const { return (static_cast<int>(drift.rows()) - 2) / 2; }
};

/// Drift and diffusion of the coherent-scattering model:
///   dXc = Delta Yc - (kappa/2) Xc
///   dYc = -Delta Xc - (kappa/2) Yc - sum_j 2 g_j x_j
///   dx_j = Omega_j p_j
///   dp_j = -Omega_j x_j - gamma_j p_j - 2 g_j Xc
/// Diffusion: D_XcXc = D_YcYc = kappa/2, D_pp,j = 2 Gamma_j + gamma_j
/// (recoil-dominated limit: momentum-only diffusion, gamma n_th -> Gamma).
inline LinearModel build_model(const SystemParams& p) {
    check_invariants(p);
    const int n = static_cast<int>(p.modes.size());
    const int dim = 2 + 2 * n;
    LinearModel m;
    m.basis = {"X_c", "Y_c"};
    m.drift = Mat::Zero(dim, dim);
    m.diffusion = Mat::Zero(dim, dim);
    m.params_hash = params_hash(p);

    const double kappa = p.cavity.kappa;
    const double delta = p.cavity.detuning;
    m.drift(0, 0) = -kappa / 2.0;
    m.drift(0, 1) = delta;
    m.drift(1, 0) = -delta;
    m.drift(1, 1) = -kappa / 2.0;
    m.diffusion(0, 0) = kappa / 2.0;
    m.diffusion(1, 1) = kappa / 2.0;

    for (int j = 0; j < n; ++j) {
        const auto& mode = p.modes[static_cast<std::size_t>(j)];
        const int ix = 2 + 2 * j;
        const int ip = ix + 1;
        m.basis.push_back("x_" + mode.label);
        m.basis.push_back("p_" + mode.label);
        m.drift(ix, ip) = mode.omega;
        m.drift(ip, ix) = -mode.omega;
        m.drift(ip, ip) = -mode.gamma;
        m.drift(1, ix) = -2.0 * mode.g;
        m.drift(ip, 0) = -2.0 * mode.g;
        m.diffusion(ip, ip) = 2.0 * mode.heating + mode.gamma;
    }
    return m;
}

/// Stable means every drift eigenvalue satisfies Re(lambda) < -tol, with
/// tol tied to the fastest decay scale to reject marginal numerics.
inline bool is_hurwitz(const Mat& drift, double scale) {
    Eigen::EigenSolver<Mat> es(drift, /*computeEigenvectors=*/false);
    const double tol = 1e-6 * scale;
    for (int i = 0; i < es.eigenvalues().size(); ++i)
        if (es.eigenvalues()[i].real() >= -tol) return false;
    return true;
}

/// Dense continuous Lyapunov solve M V + V M^T + D = 0 via the Kronecker
/// product; matrices here are at most ~8x8 so the n^2 x n^2 system is cheap.
inline Mat solve_lyapunov(const Mat& drift, const Mat& diffusion) {
    const int n = static_cast<int>(drift.rows());
    Mat K = Mat::Zero(n * n, n * n);
    // vec(MV + VM^T) = (I (x) M + M (x) I) vec(V), column-major vec
    for (int i = 0; i < n; ++i)
        K.block(i * n, i * n, n, n) += drift;
    for (int c = 0; c < n; ++c)
        for (int r = 0; r < n; ++r)
            for (int b = 0; b < n; ++b)
                K(r + n * c, r + n * b) += drift(c, b);
    Vec d = Eigen::Map<const Vec>(diffusion.data(), n * n);
    Eigen::ColPivHouseholderQR<Mat> qr(K);
    if (qr.rank() < n * n)
        throw SolverFailure("Lyapunov operator is singular (marginal mode)");
    Vec v = qr.solve(-d);
    const double resid = (K * v + d).norm();
    if (!(resid <= 1e-8 * std::max(1.0, d.norm())))
        throw SolverFailure("Lyapunov solve did not converge, residual " +
                            std::to_string(resid));
    Mat V = Eigen::Map<const Mat>(v.data(), n, n);
    return 0.5 * (V + V.transpose());
}

struct SteadyState {
    Mat covariance;
    std::vector<double> occupations;  ///< per mode, basis order
    bool stable = false;
};

inline double occupation_from_covariance(const Mat& V, int mode_index) {
    const int ix = 2 + 2 * mode_index;
    return (V(ix, ix) + V(ix + 1, ix + 1) - 1.0) / 2.0;
}

/// Steady-state covariance of a stable model. Throws UnstableError when the
/// drift is not Hurwitz (no steady state exists).
inline SteadyState solve_steady_state(const LinearModel& m) {
    const double scale = m.drift.cwiseAbs().maxCoeff();
    SteadyState s;
    s.stable = is_hurwitz(m.drift, scale);
    if (!s.stable)
        throw UnstableError("drift matrix is not Hurwitz: no steady state");
    s.covariance = solve_lyapunov(m.drift, m.diffusion);
    for (int j = 0; j < m.n_modes(); ++j)
        s.occupations.push_back(occupation_from_covariance(s.covariance, j));
    return s;
}

struct NoNetCooling : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Weak-coupling rate picture: anti-Stokes/Stokes scattering rates
///   A_-/+ = g^2 kappa / ((kappa/2)^2 + (Delta -/+ Omega)^2)
/// give n_pred = (Gamma + A_+) / (A_- - A_+). Throws NoNetCooling when
/// Stokes heating wins (A_- <= A_+, e.g. blue detuning).
inline double rate_equation_occupation(const SystemParams& p, const std::string& label) {
    const auto& m = p.mode(label);
    const double kappa = p.cavity.kappa;
    const double delta = p.cavity.detuning;
    const double g2k = m.g * m.g * kappa;
    const double a_minus = g2k / (kappa * kappa / 4.0 + (delta - m.omega) * (delta - m.omega));
    const double a_plus = g2k / (kappa * kappa / 4.0 + (delta + m.omega) * (delta + m.omega));
    const double net = a_minus - a_plus + m.gamma;
    if (!(net > 0.0))
        throw NoNetCooling("no net cooling for mode '" + label + "'");
    return (m.heating + a_plus) / net;
}

struct StepTooLarge : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct CovarianceTrajectory {
    std::vector<double> times;
    std::vector<std::vector<double>> occupations;  ///< per time, per mode
    Mat final_covariance;
};

/// Deterministic RK4 integration of dV/dt = M V + V M^T + D from
/// V(0) = identity/2. Independent verification path for the Lyapunov solve.
inline CovarianceTrajectory time_domain_oracle(const LinearModel& m, double t_final,
                                               double dt, int sample_stride = 0) {
    const double scale = m.drift.cwiseAbs().maxCoeff();
    if (!(dt > 0.0) || dt * scale > 0.05)
        throw StepTooLarge("dt must satisfy dt < 0.05 / max drift scale");

    const auto rhs = [&](const Mat& V) -> Mat {
        return m.drift * V + V * m.drift.transpose() + m.diffusion;
    };

    const int n_steps = static_cast<int>(std::ceil(t_final / dt));
    if (sample_stride <= 0) sample_stride = std::max(1, n_steps / 512);

    CovarianceTrajectory tr;
    Mat V = 0.5 * Mat::Identity(m.drift.rows(), m.drift.cols());
    const int n_modes = m.n_modes();
    const auto sample = [&](double t) {
        tr.times.push_back(t);
        std::vector<double> occ(static_cast<std::size_t>(n_modes));
        for (int j = 0; j < n_modes; ++j)
            occ[static_cast<std::size_t>(j)] = occupation_from_covariance(V, j);
        tr.occupations.push_back(std::move(occ));
    };
    sample(0.0);
    for (int i = 0; i < n_steps; ++i) {
        const Mat k1 = rhs(V);
        const Mat k2 = rhs(V + 0.5 * dt * k1);
        const Mat k3 = rhs(V + 0.5 * dt * k2);
        const Mat k4 = rhs(V + dt * k3);
        V += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if ((i + 1) % sample_stride == 0 || i + 1 == n_steps) sample((i + 1) * dt);
    }
    tr.final_covariance = V;
    return tr;
}

/// Smallest symplectic eigenvalue of a covariance matrix; >= 1/2 for any
/// physical Gaussian state (Heisenberg bound).
inline double min_symplectic_eigenvalue(const Mat& V) {
    const int n = static_cast<int>(V.rows());
    Mat omega = Mat::Zero(n, n);
    for (int j = 0; j < n / 2; ++j) {
        omega(2 * j, 2 * j + 1) = 1.0;
        omega(2 * j + 1, 2 * j) = -1.0;
    }
    Eigen::EigenSolver<Mat> es(omega * V, /*computeEigenvectors=*/false);
    double lo = std::numeric_limits<double>::infinity();
    for (int i = 0; i < es.eigenvalues().size(); ++i)
        lo = std::min(lo, std::abs(es.eigenvalues()[i]));
    return lo;
}

} // namespace cscool
