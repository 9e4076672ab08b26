#pragma once

#include "fogas/common.hpp"
#include "fogas/covariance.hpp"
#include "fogas/linear_mdp.hpp"
#include "fogas/offline_data.hpp"
#include "fogas/policy.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace fogas {

struct FogasConfig {
    long T = 1;
    double D_theta = 1.0;
    double alpha = 0.1;
    double rho = 0.0;
    double eta = 0.1;
    double beta = 1.0;
    double delta = 0.05;
    bool auto_tune = false;
    bool record_trajectory = false;
    std::uint64_t seed = 0;
#ifdef NDEBUG
    bool check_gradient_bound = false;
#else
    bool check_gradient_bound = true;
#endif

    void validate() const {
        if (T < 1) throw ArgumentError("T must be >= 1");
        if (!(D_theta > 0.0)) throw ArgumentError("D_theta must be > 0");
        if (!(alpha >= 0.0)) throw ArgumentError("alpha must be >= 0");
        if (!(eta > 0.0)) throw ArgumentError("eta must be > 0");
        if (!(rho >= 0.0)) throw ArgumentError("rho must be >= 0");
        if (!(beta > 0.0)) throw ArgumentError("beta must be > 0");
        if (auto_tune && !(delta > 0.0 && delta < 1.0)) throw ArgumentError("delta must lie in (0,1)");
    }

    friend bool operator==(const FogasConfig&, const FogasConfig&) = default;
};

/// Smallest T for which the high-probability guarantee is stated: 2 R^2 n ln A / ln(1/delta).
inline long theorem_min_iterations(double R, Index n, Index num_actions, double delta) {
    const double bound = 2.0 * R * R * static_cast<double>(n) * std::log(static_cast<double>(num_actions)) /
                         std::log(1.0 / delta);
    return std::max<long>(1, static_cast<long>(std::ceil(bound)));
}

/// Rates of the main guarantee for a run of T iterations on n samples.
/// A single action gives alpha = 0, which leaves the (unique) policy fixed.
inline FogasConfig theorem_config(Index dim, Index num_actions, double R, double gamma, Index n,
                                  long T, double delta, std::uint64_t seed = 0) {
    if (!(delta > 0.0 && delta < 1.0)) throw ArgumentError("delta must lie in (0,1)");
    if (T < 1) throw ArgumentError("T must be >= 1");
    if (n < 1) throw ArgumentError("n must be >= 1");
    const double d = static_cast<double>(dim);
    const double Td = static_cast<double>(T);
    const double one_minus = 1.0 - gamma;
    const double log_a = std::log(static_cast<double>(num_actions));

    FogasConfig c;
    c.T = T;
    c.D_theta = std::sqrt(d) / one_minus;
    c.beta = R * R / (d * Td);
    c.alpha = std::sqrt(2.0 * one_minus * one_minus * log_a / (R * R * d * Td));
    c.rho = gamma * std::sqrt(320.0 * d * d * std::log(2.0 * Td / delta) /
                              (one_minus * one_minus * static_cast<double>(n)));
    c.eta = std::sqrt(one_minus * one_minus / (27.0 * R * R * d * d * Td));
    c.delta = delta;
    c.auto_tune = true;
    c.seed = seed;
    return c;
}

/// Warning text when T is below the iteration count the guarantee asks for.
inline std::optional<std::string> iteration_warning(const FogasConfig& c, double R, Index n,
                                                    Index num_actions) {
    if (!c.auto_tune) return std::nullopt;
    const long need = theorem_min_iterations(R, n, num_actions, c.delta);
    if (c.T >= need) return std::nullopt;
    return "T = " + std::to_string(c.T) + " is below 2 R^2 n ln A / ln(1/delta) = " +
           std::to_string(need) + "; the guarantee does not apply";
}

/// Upper bound on ||Lambda g_lambda(t)||^2_{Lambda^{-1}} valid at every iteration.
inline double gradient_norm_bound(double beta, Index dim, double D_theta, double R, double gamma) {
    const double d = static_cast<double>(dim);
    const double rd = 1.0 + R * D_theta;
    return 6.0 * beta * (d + D_theta * D_theta) + 3.0 * d * rd * rd +
           3.0 * gamma * gamma * d * R * R * D_theta * D_theta;
}

struct FogasTrajectory {
    std::vector<Vector> lambdas;     // lambda_1 .. lambda_T
    std::vector<Vector> thetas;      // theta_1 .. theta_T
    std::vector<Vector> theta_bars;  // theta_bar_0 .. theta_bar_{T-1}; pi_t = sigma(alpha Phi theta_bar_{t-1})

    friend bool operator==(const FogasTrajectory&, const FogasTrajectory&) = default;
};

struct FogasRun {
    FogasConfig config;
    long chosen_index = 1;  // J in 1..T
    SoftmaxPolicy output_policy;
    Vector lambda_final;     // lambda_{T+1}
    Vector theta_bar_final;  // theta_bar_T
    std::vector<double> grad_norm_sq;    // ||Lambda g_lambda(t)||^2_{Lambda^{-1}}, t = 1..T
    std::vector<double> lambda_norm_sq;  // ||lambda_t||^2_{Lambda^{-1}}, t = 1..T
    std::vector<double> policy_param_norm;  // ||alpha theta_bar_{t-1}||_2, t = 1..T
    std::optional<FogasTrajectory> trajectory;

    long T() const noexcept { return config.T; }

    /// pi_t for t in 1..T; needs the recorded trajectory.
    SoftmaxPolicy policy_at(long t) const {
        if (!trajectory) throw Error("trajectory not recorded; rerun with record_trajectory");
        if (t < 1 || t > config.T) throw ArgumentError("iterate index out of range");
        return SoftmaxPolicy(config.alpha * trajectory->theta_bars[static_cast<std::size_t>(t - 1)]);
    }
};

/// Phi^T mu_hat_{lambda,pi}
///   = (1-gamma) sum_a pi(a|x0) phi(x0,a) + gamma sum_{x'} [sum_a pi(a|x') phi(x',a)] <psi_hat(x'), lambda>,
/// the sum running over observed next-states (the grouped form of the per-sample expression).
inline Vector mu_hat_features(const FeatureModel& model, const PsiHat& psi_hat,
                              const SoftmaxPolicy& policy, const Vector& lambda) {
    if (lambda.size() != model.dim()) throw ShapeError("lambda length differs from dim");
    const auto x0_block = model.state_features(model.x0);
    Vector out = (1.0 - model.gamma) * (x0_block.transpose() * policy.action_probs(x0_block));
    const Vector weights = psi_hat.columns().transpose() * lambda;
    const auto& states = psi_hat.states();
    for (std::size_t k = 0; k < states.size(); ++k) {
        const auto block = model.state_features(states[k]);
        out += model.gamma * weights(static_cast<Index>(k)) * (block.transpose() * policy.action_probs(block));
    }
    return out;
}

/// argmin of <theta, g> over the ball of radius D_theta; the origin when g vanishes.
inline Vector best_response_theta(const Vector& g, double D_theta) {
    if (!(D_theta > 0.0)) throw ArgumentError("D_theta must be > 0");
    const double norm = g.norm();
    if (norm > 1e-14) return -D_theta * g / norm;
    return Vector::Zero(g.size());
}

/// g_lambda = omega + gamma * Psi_hat v - theta, with v given on psi_hat.states().
inline Vector lambda_gradient(const Vector& omega, const PsiHat& psi_hat, const Vector& v_observed,
                              const Vector& theta, double gamma) {
    return omega + gamma * apply_psi_hat_observed(psi_hat, v_observed) - theta;
}

/// Closed-form maximizer of <lambda, g> - ||lambda - lambda_t||^2_{Lambda^{-1}} / (2 eta)
/// - (rho/2) ||lambda||^2_{Lambda^{-1}}.
inline Vector lambda_update(const Vector& lambda_t, const Vector& g, const Covariance& cov, double eta,
                            double rho) {
    if (!(eta > 0.0)) throw ArgumentError("eta must be > 0");
    if (!(rho >= 0.0)) throw ArgumentError("rho must be >= 0");
    return (lambda_t + eta * cov.apply(g)) / (1.0 + rho * eta);
}

namespace detail {

/// pi(.|x)-averaged features sum_a pi(a|x) phi(x,a) for each observed next-state, d x K.
inline Eigen::MatrixXd expected_features(const FeatureModel& model, const std::vector<Index>& states,
                                         const SoftmaxPolicy& policy) {
    Eigen::MatrixXd m(model.dim(), static_cast<Index>(states.size()));
    for (std::size_t k = 0; k < states.size(); ++k) {
        const auto block = model.state_features(states[k]);
        m.col(static_cast<Index>(k)) = block.transpose() * policy.action_probs(block);
    }
    return m;
}

}  // namespace detail

/// Called with (t, pi_t) at the start of every iteration.
using IterateObserver = std::function<void(long, const SoftmaxPolicy&)>;

/// Feature-occupancy gradient ascent. Starts from the uniform policy and lambda_1 = 0,
/// runs T iterations and returns pi_J for J uniform on 1..T (drawn from config.seed).
/// Touches only x0 and the observed next-states of the data.
inline FogasRun run_fogas(const FeatureModel& model, const OfflineDataset& data, const FogasConfig& config,
                          const IterateObserver& observe = {}) {
    config.validate();
    const Index d = model.dim();
    const double gamma = model.gamma;
    const Covariance cov = build_covariance(model, data, config.beta);
    const PsiHat psi_hat = estimate_psi(model, data, cov);
    const auto& states = psi_hat.states();
    const auto x0_block = model.state_features(model.x0);
    const double grad_bound = gradient_norm_bound(config.beta, d, config.D_theta, model.feature_bound, gamma);

    auto rng = make_rng(config.seed, 0x4a);
    std::uniform_int_distribution<long> pick(1, config.T);
    const long J = pick(rng);

    FogasRun run;
    run.config = config;
    run.chosen_index = J;
    run.grad_norm_sq.reserve(static_cast<std::size_t>(config.T));
    run.lambda_norm_sq.reserve(static_cast<std::size_t>(config.T));
    run.policy_param_norm.reserve(static_cast<std::size_t>(config.T));
    if (config.record_trajectory) run.trajectory.emplace();

    Vector lambda = Vector::Zero(d);
    Vector theta_bar = Vector::Zero(d);
    SoftmaxPolicy policy(Vector::Zero(d));

    for (long t = 1; t <= config.T; ++t) {
        if (t == J) run.output_policy = policy;
        if (observe) observe(t, policy);
        if (run.trajectory) {
            run.trajectory->lambdas.push_back(lambda);
            run.trajectory->theta_bars.push_back(theta_bar);
        }
        run.lambda_norm_sq.push_back(cov.inv_norm_sq(lambda));
        run.policy_param_norm.push_back(policy.scale_times_param().norm());

        // value-parameter best response
        const Eigen::MatrixXd m = detail::expected_features(model, states, policy);
        const Vector m0 = x0_block.transpose() * policy.action_probs(x0_block);
        const Vector mu_feat = (1.0 - gamma) * m0 + gamma * (m * (psi_hat.columns().transpose() * lambda));
        const Vector theta = best_response_theta(mu_feat - lambda, config.D_theta);
        if (run.trajectory) run.trajectory->thetas.push_back(theta);

        // policy
        theta_bar += theta;
        if (!theta_bar.allFinite()) throw SolverAbort(t, "theta_bar");
        policy = SoftmaxPolicy(config.alpha * theta_bar);

        // feature occupancy
        const Vector v_observed = m.transpose() * theta;
        const Vector g = lambda_gradient(model.omega, psi_hat, v_observed, theta, gamma);
        const double gnorm = cov.norm_sq(g);
        run.grad_norm_sq.push_back(gnorm);
        if (config.check_gradient_bound && gnorm > grad_bound + 1e-8)
            throw Error("gradient norm bound violated at iteration " + std::to_string(t));
        lambda = lambda_update(lambda, g, cov, config.eta, config.rho);
        if (!lambda.allFinite()) throw SolverAbort(t, "lambda");
    }

    run.lambda_final = lambda;
    run.theta_bar_final = theta_bar;
    return run;
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline nlohmann::json to_json_vec(const Vector& v) {
    return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Vector vec_from_json(const nlohmann::json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

inline nlohmann::json to_json_list(const std::vector<Vector>& vs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Vector& v : vs) arr.push_back(to_json_vec(v));
    return arr;
}

inline std::vector<Vector> list_from_json(const nlohmann::json& j) {
    std::vector<Vector> out;
    for (const auto& item : j) out.push_back(vec_from_json(item));
    return out;
}

}  // namespace detail

inline nlohmann::json config_to_json(const FogasConfig& c) {
    return {{"T", c.T},         {"D_theta", c.D_theta},
            {"alpha", c.alpha}, {"rho", c.rho},
            {"eta", c.eta},     {"beta", c.beta},
            {"delta", c.delta}, {"auto_tune", c.auto_tune},
            {"record_trajectory", c.record_trajectory}, {"seed", c.seed}};
}

inline FogasConfig config_from_json(const nlohmann::json& j) {
    FogasConfig c;
    c.T = j.at("T").get<long>();
    c.D_theta = j.at("D_theta").get<double>();
    c.alpha = j.at("alpha").get<double>();
    c.rho = j.at("rho").get<double>();
    c.eta = j.at("eta").get<double>();
    c.beta = j.at("beta").get<double>();
    c.delta = j.at("delta").get<double>();
    c.auto_tune = j.at("auto_tune").get<bool>();
    c.record_trajectory = j.at("record_trajectory").get<bool>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

inline nlohmann::json run_to_json(const FogasRun& run) {
    nlohmann::json j;
    j["config"] = config_to_json(run.config);
    j["chosen_index"] = run.chosen_index;
    j["output_policy_param"] = detail::to_json_vec(run.output_policy.scale_times_param());
    j["lambda_final"] = detail::to_json_vec(run.lambda_final);
    j["theta_bar_final"] = detail::to_json_vec(run.theta_bar_final);
    j["grad_norm_sq"] = run.grad_norm_sq;
    j["lambda_norm_sq"] = run.lambda_norm_sq;
    j["policy_param_norm"] = run.policy_param_norm;
    if (run.trajectory) {
        j["trajectory"] = {{"lambdas", detail::to_json_list(run.trajectory->lambdas)},
                           {"thetas", detail::to_json_list(run.trajectory->thetas)},
                           {"theta_bars", detail::to_json_list(run.trajectory->theta_bars)}};
    }
    return j;
}

inline FogasRun run_from_json(const nlohmann::json& j) {
    try {
        FogasRun run;
        run.config = config_from_json(j.at("config"));
        run.chosen_index = j.at("chosen_index").get<long>();
        run.output_policy = SoftmaxPolicy(detail::vec_from_json(j.at("output_policy_param")));
        run.lambda_final = detail::vec_from_json(j.at("lambda_final"));
        run.theta_bar_final = detail::vec_from_json(j.at("theta_bar_final"));
        run.grad_norm_sq = j.at("grad_norm_sq").get<std::vector<double>>();
        run.lambda_norm_sq = j.at("lambda_norm_sq").get<std::vector<double>>();
        run.policy_param_norm = j.at("policy_param_norm").get<std::vector<double>>();
        if (j.contains("trajectory")) {
            const auto& tj = j.at("trajectory");
            FogasTrajectory traj{detail::list_from_json(tj.at("lambdas")), detail::list_from_json(tj.at("thetas")),
                                 detail::list_from_json(tj.at("theta_bars"))};
            const auto T = static_cast<std::size_t>(run.config.T);
            if (traj.lambdas.size() != T || traj.thetas.size() != T || traj.theta_bars.size() != T)
                throw Error("run document: trajectory length differs from T");
            run.trajectory = std::move(traj);
        }
        return run;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("invalid run document: ") + e.what());
    }
}

inline void save_run(const std::string& path, const FogasRun& run) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << run_to_json(run).dump(1) << '\n';
}

inline FogasRun load_run(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open run file " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed run document: ") + e.what());
    }
    return run_from_json(j);
}

}  // namespace fogas
