#pragma once

#include "fogas/common.hpp"
#include "fogas/covariance.hpp"
#include "fogas/linear_mdp.hpp"
#include "fogas/offline_data.hpp"
#include "fogas/oracle.hpp"
#include "fogas/policy.hpp"
#include "fogas/solver.hpp"

#include <cmath>
#include <ostream>
#include <vector>

// Analysis quantities of a recorded run: Lagrangian values, player regrets,
// gap-estimation error and the duality-gap identities. These tools read the true
// transition weights and every state, unlike the solver.

namespace fogas {

/// v_{theta,pi}(x) = sum_a pi(a|x) <theta, phi(x,a)> over all states.
inline Vector value_of_parameter(const Matrix& phi, const TabularPolicy& policy, const Vector& theta) {
    const Vector q = phi * theta;
    const Index A = policy.num_actions();
    Vector v(policy.num_states());
    for (Index x = 0; x < policy.num_states(); ++x) v(x) = policy.probs().row(x).dot(q.segment(x * A, A));
    return v;
}

/// Phi^T mu_{lambda,pi} with mu_{lambda,pi}(x,a) = pi(a|x) [(1-gamma) nu0(x) + gamma <psi(x), lambda>],
/// for any d x X transition-weight matrix (true or estimated).
inline Vector feature_flow(const Matrix& phi, const Eigen::MatrixXd& psi, double gamma, Index x0,
                           const TabularPolicy& policy, const Vector& lambda) {
    Vector state_mass = gamma * (psi.transpose() * lambda);
    state_mass(x0) += 1.0 - gamma;
    const Index A = policy.num_actions();
    Vector out = Vector::Zero(phi.cols());
    for (Index x = 0; x < policy.num_states(); ++x)
        for (Index a = 0; a < A; ++a)
            out += (policy(x, a) * state_mass(x)) * phi.row(x * A + a).transpose();
    return out;
}

namespace detail {

inline double lagrangian(const Matrix& phi, const Eigen::MatrixXd& psi, const Vector& omega, double gamma,
                         Index x0, const Vector& lambda, const TabularPolicy& policy, const Vector& theta) {
    const Vector v = value_of_parameter(phi, policy, theta);
    return (1.0 - gamma) * v(x0) + lambda.dot(omega + gamma * (psi * v) - theta);
}

}  // namespace detail

/// f(lambda, pi; theta) = (1-gamma) v_{theta,pi}(x0) + <lambda, omega + gamma Psi v_{theta,pi} - theta>.
inline double eval_f(const LinearMdp& mdp, const Vector& lambda, const TabularPolicy& policy,
                     const Vector& theta) {
    return detail::lagrangian(mdp.phi(), mdp.psi(), mdp.omega(), mdp.gamma(), mdp.x0(), lambda, policy, theta);
}

/// The same objective written as <lambda, omega> + <theta, Phi^T mu_{lambda,pi} - lambda>.
inline double eval_f_dual_form(const LinearMdp& mdp, const Vector& lambda, const TabularPolicy& policy,
                               const Vector& theta) {
    const Vector flow = feature_flow(mdp.phi(), mdp.psi(), mdp.gamma(), mdp.x0(), policy, lambda);
    return lambda.dot(mdp.omega()) + theta.dot(flow - lambda);
}

/// f with the estimated transition weights in place of the true ones.
inline double eval_f_hat(const FeatureModel& model, const PsiHat& psi_hat, const Vector& lambda,
                         const TabularPolicy& policy, const Vector& theta) {
    return detail::lagrangian(model.phi, psi_hat.dense(), model.omega, model.gamma, model.x0, lambda, policy,
                              theta);
}

/// Comparator points (lambda*, pi*, theta*_t = theta^{pi_t}) and the oracle returns they imply.
struct Comparators {
    Vector lambda_star;
    TabularPolicy pi_star;
    double rho_star = 0.0;
    std::vector<Vector> theta_stars;   // theta^{pi_t}
    std::vector<Vector> value_stars;   // v^{pi_t}
    std::vector<double> iterate_returns;  // rho(pi_t)
};

inline void require_trajectory(const FogasRun& run) {
    if (!run.trajectory) throw Error("run has no recorded trajectory; rerun with record_trajectory");
}

/// Canonical comparators: lambda* = Phi^T mu^{pi*}, and the true value parameters of every iterate.
inline Comparators canonical_comparators(const LinearMdp& mdp, const FogasRun& run, const TabularPolicy& pi_star) {
    require_trajectory(run);
    const PolicyEvaluation star = evaluate_policy(mdp, pi_star);
    Comparators c{star.lambda_pi, pi_star, star.return_value, {}, {}, {}};
    for (long t = 1; t <= run.T(); ++t) {
        const PolicyEvaluation ev = evaluate_policy(mdp, run.policy_at(t).materialize(mdp));
        c.theta_stars.push_back(ev.theta_pi);
        c.value_stars.push_back(ev.v);
        c.iterate_returns.push_back(ev.return_value);
    }
    return c;
}

struct PlayerRegrets {
    double pi = 0.0;      // R_T(pi*)
    double lambda = 0.0;  // R_T(lambda*)
    double theta = 0.0;   // R_T(theta*_{1:T})
};

/// Unnormalized regret sums of the three players against the given comparators.
inline PlayerRegrets player_regrets(const FogasRun& run, const LinearMdp& mdp, const PsiHat& psi_hat,
                                    const Comparators& comp) {
    require_trajectory(run);
    const auto& traj = *run.trajectory;
    const Eigen::MatrixXd psi_hat_dense = psi_hat.dense();
    const double gamma = mdp.gamma();
    const Index A = mdp.num_actions();

    Vector nu_star = gamma * (mdp.psi().transpose() * comp.lambda_star);
    nu_star(mdp.x0()) += 1.0 - gamma;

    PlayerRegrets r;
    for (long t = 1; t <= run.T(); ++t) {
        const auto i = static_cast<std::size_t>(t - 1);
        const TabularPolicy pi_t = run.policy_at(t).materialize(mdp);
        const Vector& theta = traj.thetas[i];
        const Vector& lambda = traj.lambdas[i];

        const Vector q = mdp.phi() * theta;
        for (Index x = 0; x < mdp.num_states(); ++x) {
            double s = 0.0;
            for (Index a = 0; a < A; ++a) s += (comp.pi_star(x, a) - pi_t(x, a)) * q(x * A + a);
            r.pi += nu_star(x) * s;
        }

        const Vector v = value_of_parameter(mdp.phi(), pi_t, theta);
        r.lambda += (comp.lambda_star - lambda).dot(mdp.omega() + gamma * (psi_hat_dense * v) - theta);

        const Vector flow_hat = feature_flow(mdp.phi(), psi_hat_dense, gamma, mdp.x0(), pi_t, lambda);
        r.theta += (theta - comp.theta_stars[i]).dot(flow_hat - lambda);
    }
    return r;
}

/// err = sum_t <lambda*, (Psi - Psi_hat) v_{theta_t,pi_t}> + sum_t <lambda_t, (Psi_hat - Psi) v^{pi_t}>.
inline double gap_estimation_error(const FogasRun& run, const LinearMdp& mdp, const PsiHat& psi_hat,
                                   const Comparators& comp) {
    require_trajectory(run);
    const auto& traj = *run.trajectory;
    const Eigen::MatrixXd diff = mdp.psi() - psi_hat.dense();
    double err = 0.0;
    for (long t = 1; t <= run.T(); ++t) {
        const auto i = static_cast<std::size_t>(t - 1);
        const TabularPolicy pi_t = run.policy_at(t).materialize(mdp);
        const Vector v = value_of_parameter(mdp.phi(), pi_t, traj.thetas[i]);
        err += comp.lambda_star.dot(diff * v);
        err -= traj.lambdas[i].dot(diff * comp.value_stars[i]);
    }
    return err;
}

/// (1/T) sum_t f(lambda*, pi*; theta_t) - f(lambda_t, pi_t; theta*_t).
inline double dynamic_duality_gap(const FogasRun& run, const LinearMdp& mdp, const Comparators& comp) {
    require_trajectory(run);
    const auto& traj = *run.trajectory;
    double sum = 0.0;
    for (long t = 1; t <= run.T(); ++t) {
        const auto i = static_cast<std::size_t>(t - 1);
        const TabularPolicy pi_t = run.policy_at(t).materialize(mdp);
        sum += eval_f(mdp, comp.lambda_star, comp.pi_star, traj.thetas[i]) -
               eval_f(mdp, traj.lambdas[i], pi_t, comp.theta_stars[i]);
    }
    return sum / static_cast<double>(run.T());
}

/// ln A / (alpha T) + alpha R^2 D^2 / 2; infinite when alpha = 0.
inline double pi_regret_bound(const FogasConfig& c, Index num_actions, double R) {
    if (c.alpha <= 0.0) return num_actions == 1 ? 0.0 : INFINITY;
    return std::log(static_cast<double>(num_actions)) / (c.alpha * static_cast<double>(c.T)) +
           c.alpha * R * R * c.D_theta * c.D_theta / 2.0;
}

/// (1/(2 eta T) + rho/2) ||lambda*||^2 + eta C / 2 - (rho / 2T) sum_t ||lambda_t||^2, norms in Lambda^{-1}.
inline double lambda_regret_bound(const FogasRun& run, double lambda_star_norm_sq, Index dim, double R,
                                  double gamma) {
    const FogasConfig& c = run.config;
    const double T = static_cast<double>(c.T);
    const double C = gradient_norm_bound(c.beta, dim, c.D_theta, R, gamma);
    double iterate_sum = 0.0;
    for (double s : run.lambda_norm_sq) iterate_sum += s;
    return (1.0 / (2.0 * c.eta * T) + c.rho / 2.0) * lambda_star_norm_sq + c.eta * C / 2.0 -
           c.rho / (2.0 * T) * iterate_sum;
}

struct GapReport {
    double gap = 0.0;
    double regret_pi = 0.0;      // R_T(pi*) / T
    double regret_lambda = 0.0;  // R_T(lambda*) / T
    double regret_theta = 0.0;   // R_T(theta*) / T
    double err_psi_scaled = 0.0; // (gamma / T) err
    double decomposition_residual = 0.0;
    double suboptimality_lhs = 0.0;  // (1/T) sum_t rho(pi*) - rho(pi_t)
    double identity_residual = 0.0;
    bool identity_applicable = true;  // D_theta == sqrt(d)/(1-gamma)
    double pi_regret_bound = 0.0;
    double lambda_regret_bound = 0.0;
    double gradient_bound = 0.0;
    double max_grad_norm_sq = 0.0;
    double coverage_ratio = 0.0;
};

inline bool canonical_radius(const FogasConfig& c, Index dim, double gamma) {
    const double expected = std::sqrt(static_cast<double>(dim)) / (1.0 - gamma);
    return std::abs(c.D_theta - expected) <= 1e-12 * expected;
}

/// Fills every diagnostic for a recorded run against comparator policy pi_star.
inline GapReport duality_gap_report(const FogasRun& run, const LinearMdp& mdp, const OfflineDataset& data,
                                    const TabularPolicy& pi_star) {
    require_trajectory(run);
    const FeatureModel model = features_of(mdp);
    const Covariance cov = build_covariance(model, data, run.config.beta);
    const PsiHat psi_hat = estimate_psi(model, data, cov);
    const Comparators comp = canonical_comparators(mdp, run, pi_star);
    const double T = static_cast<double>(run.T());

    GapReport rep;
    rep.gap = dynamic_duality_gap(run, mdp, comp);
    const PlayerRegrets reg = player_regrets(run, mdp, psi_hat, comp);
    rep.regret_pi = reg.pi / T;
    rep.regret_lambda = reg.lambda / T;
    rep.regret_theta = reg.theta / T;
    rep.err_psi_scaled = mdp.gamma() / T * gap_estimation_error(run, mdp, psi_hat, comp);
    rep.decomposition_residual =
        std::abs(rep.gap - (rep.regret_pi + rep.regret_lambda + rep.regret_theta + rep.err_psi_scaled));

    double sub = 0.0;
    for (double rho_t : comp.iterate_returns) sub += comp.rho_star - rho_t;
    rep.suboptimality_lhs = sub / T;
    rep.identity_residual = std::abs(rep.suboptimality_lhs - rep.gap);
    rep.identity_applicable = canonical_radius(run.config, mdp.dim(), mdp.gamma());

    rep.coverage_ratio = coverage_ratio(comp.lambda_star, cov);
    rep.pi_regret_bound = pi_regret_bound(run.config, mdp.num_actions(), mdp.feature_bound());
    rep.lambda_regret_bound =
        lambda_regret_bound(run, rep.coverage_ratio, mdp.dim(), mdp.feature_bound(), mdp.gamma());
    rep.gradient_bound = gradient_norm_bound(run.config.beta, mdp.dim(), run.config.D_theta,
                                             mdp.feature_bound(), mdp.gamma());
    for (double g : run.grad_norm_sq) rep.max_grad_norm_sq = std::max(rep.max_grad_norm_sq, g);
    return rep;
}

inline void write_gap_report_header(std::ostream& out) {
    out << "gap,regret_pi,regret_lambda,regret_theta,err_psi_scaled,decomposition_residual,"
           "identity_residual,suboptimality\n";
}

inline void write_gap_report_row(std::ostream& out, const GapReport& r) {
    const auto old = out.precision(17);
    out << r.gap << ',' << r.regret_pi << ',' << r.regret_lambda << ',' << r.regret_theta << ','
        << r.err_psi_scaled << ',' << r.decomposition_residual << ',' << r.identity_residual << ','
        << r.suboptimality_lhs << '\n';
    out.precision(old);
}

}  // namespace fogas
