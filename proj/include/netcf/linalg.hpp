#pragma once

#include "netcf/errors.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <vector>

namespace netcf {

// Row-major design matrix helper used across estimators.
struct DesignMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data; // rows x cols, row-major

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct RidgeOptions {
    // Column left unpenalized (the intercept). Set to -1 to penalize all.
    int intercept_col = 0;
    double cond_warn_threshold = 1e12;
};

struct RidgeResult {
    std::vector<double> beta;
    double condition = 0.0;
    bool ill_conditioned = false;
};

// Solves (X'X + alpha P) beta = X'y with P the identity except a zero at the
// intercept column. At alpha = 0 the normal equations must be nonsingular.
inline RidgeResult ridge_fit_full(const DesignMatrix& X, const std::vector<double>& y,
                                  double alpha, const RidgeOptions& opts = {}) {
    if (X.rows == 0 || X.cols == 0) throw ContractError("ridge_fit: empty design");
    if (y.size() != X.rows) throw ContractError("ridge_fit: y length != row count");
    if (alpha < 0.0) throw ConfigError("ridge_fit: alpha must be >= 0");

    const auto n = static_cast<Eigen::Index>(X.rows);
    const auto k = static_cast<Eigen::Index>(X.cols);
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        Xm(X.data.data(), n, k);
    Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);

    Eigen::MatrixXd G = Xm.transpose() * Xm;
    Eigen::VectorXd b = Xm.transpose() * yv;
    if (alpha > 0.0) {
        for (Eigen::Index j = 0; j < k; ++j) {
            if (opts.intercept_col >= 0 && j == static_cast<Eigen::Index>(opts.intercept_col)) continue;
            G(j, j) += alpha;
        }
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    if (es.info() != Eigen::Success) throw SolverError("ridge_fit: eigen decomposition failed");
    Eigen::VectorXd ev = es.eigenvalues();
    const double emax = ev(k - 1);
    const double emin = ev(0);
    const double tol = static_cast<double>(k) * 1e-13 * std::max(emax, 1.0);
    if (alpha == 0.0) {
        if (emin <= tol)
            throw SolverError("ridge_fit: normal equations singular at alpha=0; use alpha>0 "
                              "or provide batches with distinct treatment variation");
    } else {
        // the penalized system is nonsingular by construction; floor tiny or
        // rounding-negative eigenvalues instead of failing
        for (Eigen::Index j = 0; j < k; ++j) ev(j) = std::max(ev(j), alpha * 1e-9);
    }

    RidgeResult r;
    r.condition = emax / std::max(emin, std::numeric_limits<double>::min());
    r.ill_conditioned = r.condition > opts.cond_warn_threshold;

    Eigen::VectorXd beta = es.eigenvectors() *
                           (es.eigenvectors().transpose() * b).cwiseQuotient(ev);
    r.beta.assign(beta.data(), beta.data() + k);
    return r;
}

inline std::vector<double> ridge_fit(const DesignMatrix& X, const std::vector<double>& y,
                                     double alpha, const RidgeOptions& opts = {}) {
    return ridge_fit_full(X, y, alpha, opts).beta;
}

// Multi-output least squares: solves (X'X + alpha P) B = X'Y column-wise.
// Returns B as row-major (cols_in x cols_out).
inline std::vector<double> ridge_fit_multi(const DesignMatrix& X, const DesignMatrix& Y,
                                           double alpha, const RidgeOptions& opts = {}) {
    if (Y.rows != X.rows) throw ContractError("ridge_fit_multi: row counts differ");
    std::vector<double> out(X.cols * Y.cols);
    std::vector<double> ycol(X.rows);
    for (std::size_t c = 0; c < Y.cols; ++c) {
        for (std::size_t r = 0; r < X.rows; ++r) ycol[r] = Y.at(r, c);
        auto beta = ridge_fit(X, ycol, alpha, opts);
        for (std::size_t j = 0; j < X.cols; ++j) out[j * Y.cols + c] = beta[j];
    }
    return out;
}

} // namespace netcf
