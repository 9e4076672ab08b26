#pragma once

#include "fogas/common.hpp"

#include <cmath>
#include <string>

namespace fogas {

/// Regularized empirical feature covariance beta*I + (1/n) sum phi_i phi_i^T together
/// with its Cholesky factorization. All Lambda^{-1} products go through the factor.
class Covariance {
public:
    Covariance(double beta, Eigen::MatrixXd lambda_mat, Index n)
        : beta_(beta), lambda_(std::move(lambda_mat)), n_(n) {
        if (lambda_.rows() != lambda_.cols()) throw ShapeError("covariance must be square");
        const double scale = std::max(1.0, lambda_.cwiseAbs().maxCoeff());
        if ((lambda_ - lambda_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
            throw ArgumentError("covariance is not symmetric");
        llt_.compute(lambda_);
        if (llt_.info() != Eigen::Success) throw ArgumentError("covariance is not positive definite");
        const Eigen::MatrixXd L = llt_.matrixL();
        if (L.diagonal().minCoeff() <= 0.0 || !L.allFinite())
            throw ArgumentError("covariance is not positive definite");
    }

    /// Wraps an arbitrary symmetric positive-definite matrix (n = 0, beta = 0).
    static Covariance from_matrix(Eigen::MatrixXd m) { return Covariance(0.0, std::move(m), 0); }

    double beta() const noexcept { return beta_; }
    Index n() const noexcept { return n_; }
    Index dim() const noexcept { return lambda_.rows(); }
    const Eigen::MatrixXd& matrix() const noexcept { return lambda_; }

    Vector solve(const Vector& v) const { return llt_.solve(v); }
    Eigen::MatrixXd solve(const Eigen::MatrixXd& m) const { return llt_.solve(m); }
    Vector apply(const Vector& v) const { return lambda_ * v; }

    /// ||v||^2 in the Lambda^{-1} norm, v^T Lambda^{-1} v.
    double inv_norm_sq(const Vector& v) const {
        const Vector w = llt_.matrixL().solve(v);
        return w.squaredNorm();
    }

    /// ||v||^2 in the Lambda norm, v^T Lambda v.
    double norm_sq(const Vector& v) const { return v.dot(lambda_ * v); }

private:
    double beta_;
    Eigen::MatrixXd lambda_;
    Index n_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

}  // namespace fogas
