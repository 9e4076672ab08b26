#pragma once

#include "fogas/common.hpp"
#include "fogas/linear_mdp.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace fogas {

/// Stationary stochastic policy stored as an X x A table; row x is pi(.|x).
class TabularPolicy {
public:
    explicit TabularPolicy(Matrix probs, double tol = 1e-10) : probs_(std::move(probs)) {
        if (probs_.rows() < 1 || probs_.cols() < 1) throw ShapeError("empty policy table");
        for (Index x = 0; x < probs_.rows(); ++x) {
            if (probs_.row(x).minCoeff() < 0.0)
                throw ArgumentError("policy row " + std::to_string(x) + " has a negative entry");
            if (std::abs(probs_.row(x).sum() - 1.0) > tol)
                throw ArgumentError("policy row " + std::to_string(x) + " does not sum to 1");
        }
    }

    static TabularPolicy uniform(Index num_states, Index num_actions) {
        return TabularPolicy(Matrix::Constant(num_states, num_actions, 1.0 / num_actions));
    }

    /// Deterministic policy choosing actions[x] in state x.
    static TabularPolicy deterministic(const std::vector<Index>& actions, Index num_actions) {
        Matrix probs = Matrix::Zero(static_cast<Index>(actions.size()), num_actions);
        for (std::size_t x = 0; x < actions.size(); ++x) {
            if (actions[x] < 0 || actions[x] >= num_actions) throw ArgumentError("action out of range");
            probs(static_cast<Index>(x), actions[x]) = 1.0;
        }
        return TabularPolicy(std::move(probs));
    }

    Index num_states() const noexcept { return probs_.rows(); }
    Index num_actions() const noexcept { return probs_.cols(); }
    double operator()(Index x, Index a) const { return probs_(x, a); }
    const Matrix& probs() const noexcept { return probs_; }

    /// Convex combination (1-w) * this + w * other.
    TabularPolicy mix(const TabularPolicy& other, double w) const {
        if (other.probs_.rows() != probs_.rows() || other.probs_.cols() != probs_.cols())
            throw ShapeError("policy shapes differ");
        return TabularPolicy((1.0 - w) * probs_ + w * other.probs_);
    }

private:
    Matrix probs_;
};

/// Numerically stable softmax of a logit vector (max subtracted before exp).
inline Vector stable_softmax(const Vector& logits) {
    Vector p = (logits.array() - logits.maxCoeff()).exp().matrix();
    return p / p.sum();
}

/// Softmax policy pi(a|x) proportional to exp(<phi(x,a), w>), with w = alpha * theta_bar.
/// Only the d-dimensional parameter is stored; rows are computed on demand.
class SoftmaxPolicy {
public:
    SoftmaxPolicy() = default;
    explicit SoftmaxPolicy(Vector scale_times_param) : param_(std::move(scale_times_param)) {
        if (!param_.allFinite()) throw ArgumentError("softmax parameter is not finite");
    }

    const Vector& scale_times_param() const noexcept { return param_; }

    /// pi(.|x) given the A x d block of features of state x.
    template <class Block>
    Vector action_probs(const Block& state_features) const {
        return stable_softmax(state_features * param_);
    }

    Vector action_probs(const FeatureModel& model, Index x) const {
        return action_probs(model.state_features(x));
    }

    TabularPolicy materialize(const Matrix& phi, Index num_actions) const {
        if (phi.cols() != param_.size()) throw ShapeError("softmax parameter length differs from dim");
        const Index X = phi.rows() / num_actions;
        Matrix probs(X, num_actions);
        for (Index x = 0; x < X; ++x)
            probs.row(x) = action_probs(phi.middleRows(x * num_actions, num_actions)).transpose();
        return TabularPolicy(std::move(probs), 1e-12);
    }

    TabularPolicy materialize(const FeatureModel& model) const {
        return materialize(model.phi, model.num_actions);
    }
    TabularPolicy materialize(const LinearMdp& mdp) const {
        return materialize(mdp.phi(), mdp.num_actions());
    }

private:
    Vector param_;
};

inline SoftmaxPolicy softmax_from_logit_param(const LinearMdp& mdp, const Vector& scaled_param) {
    if (scaled_param.size() != mdp.dim()) throw ShapeError("parameter length differs from dim");
    return SoftmaxPolicy(scaled_param);
}

/// One entropy-regularized mirror-ascent step in cumulative form:
/// sigma(alpha * Phi * sum_k theta_k) gains the term alpha * theta_t.
inline SoftmaxPolicy policy_update_step(const SoftmaxPolicy& prev, const Vector& theta_t,
                                        double alpha) {
    if (theta_t.size() != prev.scale_times_param().size())
        throw ShapeError("theta length differs from policy parameter length");
    return SoftmaxPolicy(prev.scale_times_param() + alpha * theta_t);
}

}  // namespace fogas
