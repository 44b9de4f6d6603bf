#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include <Eigen/Dense>

namespace cscool {

struct FitDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LevMarOptions {
    int max_iterations = 200;
    double ftol = 1e-12;      ///< relative cost decrease below this -> converged
    double gtol = 1e-12;      ///< max |gradient| below this -> converged
    double lambda0 = 1e-3;
};

struct LevMarResult {
    Eigen::VectorXd params;
    Eigen::MatrixXd covariance;  ///< (J^T J)^-1 * chi2 / dof
    double chi2 = 0.0;
    int dof = 0;
    int iterations = 0;
};

/// Dense Levenberg-Marquardt with analytic Jacobian.
/// residual(p, r): fills r with model(p) - data (size fixed by caller).
/// jacobian(p, J): fills J with d residual / d p.
inline LevMarResult levmar(
    const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& residual,
    const std::function<void(const Eigen::VectorXd&, Eigen::MatrixXd&)>& jacobian,
    Eigen::VectorXd p0, int n_residuals, const LevMarOptions& opt = {}) {
    const int n_params = static_cast<int>(p0.size());
    if (n_residuals <= n_params)
        throw FitDiverged("underdetermined fit: fewer residuals than parameters");

    Eigen::VectorXd r(n_residuals);
    Eigen::MatrixXd J(n_residuals, n_params);

    Eigen::VectorXd p = std::move(p0);
    residual(p, r);
    double cost = r.squaredNorm();
    if (!std::isfinite(cost)) throw FitDiverged("non-finite initial residual");

    double lambda = opt.lambda0;
    LevMarResult out;
    int it = 0;
    for (; it < opt.max_iterations; ++it) {
        jacobian(p, J);
        Eigen::MatrixXd JtJ = J.transpose() * J;
        Eigen::VectorXd g = J.transpose() * r;
        if (g.cwiseAbs().maxCoeff() < opt.gtol) break;

        bool stepped = false;
        for (int tries = 0; tries < 24; ++tries) {
            Eigen::MatrixXd H = JtJ;
            H.diagonal() += lambda * JtJ.diagonal().cwiseMax(1e-30);
            Eigen::VectorXd step = H.ldlt().solve(-g);
            Eigen::VectorXd p_try = p + step;
            Eigen::VectorXd r_try(n_residuals);
            residual(p_try, r_try);
            const double cost_try = r_try.squaredNorm();
            if (std::isfinite(cost_try) && cost_try < cost) {
                const double drop = (cost - cost_try) / std::max(cost, 1e-300);
                p = std::move(p_try);
                r = std::move(r_try);
                cost = cost_try;
                lambda = std::max(lambda * 0.3, 1e-14);
                stepped = true;
                if (drop < opt.ftol) it = opt.max_iterations;  // converged
                break;
            }
            lambda *= 10.0;
        }
        if (!stepped) break;  // no downhill step found at any damping
    }

    jacobian(p, J);
    Eigen::MatrixXd JtJ = J.transpose() * J;
    out.dof = n_residuals - n_params;
    out.chi2 = cost;
    Eigen::MatrixXd inv = JtJ.completeOrthogonalDecomposition().pseudoInverse();
    out.covariance = inv * (cost / static_cast<double>(out.dof));
    out.params = std::move(p);
    out.iterations = it;
    if (!out.params.allFinite()) throw FitDiverged("fit produced non-finite parameters");
    return out;
}

} // namespace cscool
