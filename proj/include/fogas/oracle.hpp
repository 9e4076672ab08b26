#pragma once

#include "fogas/common.hpp"
#include "fogas/covariance.hpp"
#include "fogas/linear_mdp.hpp"
#include "fogas/policy.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace fogas {

/// Exact tabular quantities of a policy. Returns and occupancies are normalized:
/// mu sums to one and return_value = <mu, r> = (1-gamma) v(x0).
struct PolicyEvaluation {
    Vector q;           // over (x,a)
    Vector v;           // over x
    Vector theta_pi;    // omega + gamma * Psi v, so that q = Phi theta_pi
    Vector mu;          // state-action occupancy
    Vector nu;          // state occupancy
    Vector lambda_pi;   // Phi^T mu
    double return_value = 0.0;
};

namespace detail {

/// P_pi(x, x') = sum_a pi(a|x) p(x'|x,a).
inline Eigen::MatrixXd state_transitions(const LinearMdp& mdp, const TabularPolicy& policy) {
    const Index X = mdp.num_states();
    Eigen::MatrixXd p_pi = Eigen::MatrixXd::Zero(X, X);
    for (Index x = 0; x < X; ++x)
        for (Index a = 0; a < mdp.num_actions(); ++a)
            p_pi.row(x) += policy(x, a) * mdp.transitions().row(mdp.pair(x, a));
    return p_pi;
}

inline void check_policy_shape(const LinearMdp& mdp, const TabularPolicy& policy) {
    if (policy.num_states() != mdp.num_states() || policy.num_actions() != mdp.num_actions())
        throw ShapeError("policy table shape does not match the MDP");
}

}  // namespace detail

/// Solves the Bellman equation and the flow condition of `policy` by dense LU.
inline PolicyEvaluation evaluate_policy(const LinearMdp& mdp, const TabularPolicy& policy) {
    detail::check_policy_shape(mdp, policy);
    const Index X = mdp.num_states();
    const Index A = mdp.num_actions();
    const double gamma = mdp.gamma();

    const Eigen::MatrixXd p_pi = detail::state_transitions(mdp, policy);
    Vector r_pi = Vector::Zero(X);
    for (Index x = 0; x < X; ++x)
        for (Index a = 0; a < A; ++a) r_pi(x) += policy(x, a) * mdp.rewards()(mdp.pair(x, a));

    const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(X, X) - gamma * p_pi;
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu_t(system.transpose());

    PolicyEvaluation ev;
    ev.v = lu.solve(r_pi);
    ev.q = mdp.rewards() + gamma * (mdp.transitions() * ev.v);
    ev.theta_pi = mdp.omega() + gamma * (mdp.psi() * ev.v);
    ev.nu = lu_t.solve((1.0 - gamma) * mdp.initial_distribution());
    ev.mu.resize(mdp.num_pairs());
    for (Index x = 0; x < X; ++x)
        for (Index a = 0; a < A; ++a) ev.mu(mdp.pair(x, a)) = ev.nu(x) * policy(x, a);
    ev.lambda_pi = mdp.phi().transpose() * ev.mu;
    ev.return_value = ev.mu.dot(mdp.rewards());
    if (!ev.v.allFinite() || !ev.nu.allFinite()) throw Error("policy evaluation: singular system");
    return ev;
}

struct OptimalSolution {
    TabularPolicy policy;
    PolicyEvaluation evaluation;
    long iterations;
};

/// Value iteration on q until successive iterates differ by at most
/// tol * (1-gamma) / (2*gamma) in sup-norm, then the greedy policy (ties go to the
/// lowest action index), evaluated exactly.
inline OptimalSolution solve_optimal(const LinearMdp& mdp, double tol = 1e-10,
                                     long max_iterations = 1'000'000) {
    if (!(tol > 0.0)) throw ArgumentError("tol must be > 0");
    const Index X = mdp.num_states();
    const Index A = mdp.num_actions();
    const double gamma = mdp.gamma();
    const double stop = tol * (1.0 - gamma) / (2.0 * gamma);

    Vector v = Vector::Zero(X);
    Vector q;
    long it = 0;
    for (; it < max_iterations; ++it) {
        q = mdp.rewards() + gamma * (mdp.transitions() * v);
        Vector next(X);
        for (Index x = 0; x < X; ++x) next(x) = q.segment(x * A, A).maxCoeff();
        const double change = (next - v).cwiseAbs().maxCoeff();
        v = std::move(next);
        if (change <= stop) break;
    }
    q = mdp.rewards() + gamma * (mdp.transitions() * v);

    std::vector<Index> greedy(static_cast<std::size_t>(X));
    for (Index x = 0; x < X; ++x) {
        Index best = 0;
        for (Index a = 1; a < A; ++a)
            if (q(x * A + a) > q(x * A + best)) best = a;
        greedy[static_cast<std::size_t>(x)] = best;
    }
    TabularPolicy policy = TabularPolicy::deterministic(greedy, A);
    PolicyEvaluation ev = evaluate_policy(mdp, policy);
    return OptimalSolution{std::move(policy), std::move(ev), it + 1};
}

/// Feature coverage ratio lambda*^T Lambda^{-1} lambda*.
inline double coverage_ratio(const Vector& lambda_star, const Covariance& cov) {
    if (lambda_star.size() != cov.dim()) throw ShapeError("lambda length differs from covariance dim");
    return cov.inv_norm_sq(lambda_star);
}

struct LpResiduals {
    double flow = 0.0;     // ||E^T mu - (1-gamma) nu0 - gamma Psi^T lambda||_inf
    double feature = 0.0;  // ||lambda - Phi^T mu||_inf
};

/// Residuals of the two equality constraints of the feature-space primal LP.
inline LpResiduals relaxed_lp_residuals(const LinearMdp& mdp, const Vector& mu, const Vector& lambda) {
    if (mu.size() != mdp.num_pairs()) throw ShapeError("mu length differs from X*A");
    if (lambda.size() != mdp.dim()) throw ShapeError("lambda length differs from dim");
    Vector state_mass = Vector::Zero(mdp.num_states());
    for (Index x = 0; x < mdp.num_states(); ++x)
        state_mass(x) = mu.segment(x * mdp.num_actions(), mdp.num_actions()).sum();
    const Vector flow = state_mass - (1.0 - mdp.gamma()) * mdp.initial_distribution() -
                        mdp.gamma() * (mdp.psi().transpose() * lambda);
    const Vector feat = lambda - mdp.phi().transpose() * mu;
    return LpResiduals{flow.cwiseAbs().maxCoeff(), feat.cwiseAbs().maxCoeff()};
}

/// Residuals at (mu^pi, Phi^T mu^pi); both vanish for every policy.
inline LpResiduals relaxed_lp_feasibility(const LinearMdp& mdp, const TabularPolicy& policy) {
    const PolicyEvaluation ev = evaluate_policy(mdp, policy);
    return relaxed_lp_residuals(mdp, ev.mu, ev.lambda_pi);
}

}  // namespace fogas
