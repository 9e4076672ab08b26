#pragma once

#include "fogas/common.hpp"
#include "fogas/covariance.hpp"
#include "fogas/linear_mdp.hpp"
#include "fogas/oracle.hpp"
#include "fogas/policy.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fogas {

struct Transition {
    Index x;
    Index a;
    double r;
    Index x_next;

    friend bool operator==(const Transition&, const Transition&) = default;
};

/// n logged transitions (X_i, A_i, R_i, X'_i). Rewards are kept for completeness;
/// the solver reads omega instead.
struct OfflineDataset {
    std::vector<Transition> transitions;

    Index size() const noexcept { return static_cast<Index>(transitions.size()); }
    friend bool operator==(const OfflineDataset&, const OfflineDataset&) = default;
};

enum class SamplingMode { occupancy, uniform };

inline SamplingMode parse_sampling_mode(const std::string& s) {
    if (s == "occupancy") return SamplingMode::occupancy;
    if (s == "uniform") return SamplingMode::uniform;
    throw ArgumentError("unknown sampling mode '" + s + "' (expected occupancy or uniform)");
}

inline std::string to_string(SamplingMode m) {
    return m == SamplingMode::occupancy ? "occupancy" : "uniform";
}

/// Draws n transitions. (X_i, A_i) comes from the behavior occupancy mu^b (exact
/// categorical draw) or uniformly from X x A; X'_i ~ p(.|X_i, A_i) independently.
inline OfflineDataset collect_dataset(const LinearMdp& mdp, const TabularPolicy& behavior, Index n,
                                      SamplingMode mode, std::uint64_t seed) {
    if (n < 1) throw ArgumentError("n must be >= 1");
    auto rng = make_rng(seed, 0x64617461);
    const Index XA = mdp.num_pairs();

    std::vector<double> pair_weights(static_cast<std::size_t>(XA), 1.0);
    if (mode == SamplingMode::occupancy) {
        const PolicyEvaluation ev = evaluate_policy(mdp, behavior);
        for (Index i = 0; i < XA; ++i) pair_weights[static_cast<std::size_t>(i)] = std::max(0.0, ev.mu(i));
    }
    std::discrete_distribution<Index> pair_dist(pair_weights.begin(), pair_weights.end());

    std::vector<std::discrete_distribution<Index>> next_dist;
    next_dist.reserve(static_cast<std::size_t>(XA));
    for (Index i = 0; i < XA; ++i) {
        std::vector<double> w(static_cast<std::size_t>(mdp.num_states()));
        for (Index x = 0; x < mdp.num_states(); ++x)
            w[static_cast<std::size_t>(x)] = std::max(0.0, mdp.transitions()(i, x));
        next_dist.emplace_back(w.begin(), w.end());
    }

    OfflineDataset data;
    data.transitions.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const Index p = pair_dist(rng);
        const Index x_next = next_dist[static_cast<std::size_t>(p)](rng);
        data.transitions.push_back(
            Transition{p / mdp.num_actions(), p % mdp.num_actions(), mdp.rewards()(p), x_next});
    }
    return data;
}

namespace detail {

inline void check_dataset(const FeatureModel& model, const OfflineDataset& data) {
    if (data.transitions.empty()) throw ArgumentError("dataset is empty");
    for (const Transition& t : data.transitions)
        if (t.x < 0 || t.x >= model.num_states || t.a < 0 || t.a >= model.num_actions ||
            t.x_next < 0 || t.x_next >= model.num_states)
            throw ArgumentError("transition index out of range");
}

}  // namespace detail

inline Covariance build_covariance(const FeatureModel& model, const OfflineDataset& data,
                                   double beta) {
    if (!(beta > 0.0)) throw ArgumentError("beta must be > 0");
    detail::check_dataset(model, data);
    const Index d = model.dim();
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
    for (const Transition& t : data.transitions) {
        const Vector phi_i = model.phi.row(model.pair(t.x, t.a)).transpose();
        gram.selfadjointView<Eigen::Lower>().rankUpdate(phi_i);
    }
    Eigen::MatrixXd lambda = gram.selfadjointView<Eigen::Lower>();
    lambda /= static_cast<double>(data.size());
    lambda.diagonal().array() += beta;
    return Covariance(beta, std::move(lambda), data.size());
}

/// Ridge estimate of the transition weights, stored by observed next-state only.
/// Column psi_hat(x') = (1/n) Lambda^{-1} sum_{i : X'_i = x'} phi_i; every other column is zero.
class PsiHat {
public:
    PsiHat(Index num_states, std::vector<Index> states, Eigen::MatrixXd columns)
        : num_states_(num_states), states_(std::move(states)), columns_(std::move(columns)) {
        if (static_cast<Index>(states_.size()) != columns_.cols())
            throw ShapeError("one column per observed state expected");
    }

    Index num_states() const noexcept { return num_states_; }
    Index dim() const noexcept { return columns_.rows(); }
    /// Observed next-states in increasing order.
    const std::vector<Index>& states() const noexcept { return states_; }
    /// d x K, column k belongs to states()[k].
    const Eigen::MatrixXd& columns() const noexcept { return columns_; }

    Vector column(Index x) const {
        const auto it = std::lower_bound(states_.begin(), states_.end(), x);
        if (it == states_.end() || *it != x) return Vector::Zero(dim());
        return columns_.col(it - states_.begin());
    }

    Eigen::MatrixXd dense() const {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim(), num_states_);
        for (std::size_t k = 0; k < states_.size(); ++k) m.col(states_[k]) = columns_.col(static_cast<Index>(k));
        return m;
    }

private:
    Index num_states_;
    std::vector<Index> states_;
    Eigen::MatrixXd columns_;
};

/// Transitions grouped by next state: the observed states and (1/n) sum of phi_i per group.
struct NextStateGroups {
    std::vector<Index> states;
    Eigen::MatrixXd feature_means;  // d x K
};

inline NextStateGroups group_by_next_state(const FeatureModel& model, const OfflineDataset& data) {
    detail::check_dataset(model, data);
    std::map<Index, Vector> sums;
    for (const Transition& t : data.transitions) {
        auto [it, inserted] = sums.try_emplace(t.x_next, Vector::Zero(model.dim()));
        it->second += model.phi.row(model.pair(t.x, t.a)).transpose();
    }
    NextStateGroups g;
    g.feature_means.resize(model.dim(), static_cast<Index>(sums.size()));
    Index k = 0;
    for (auto& [state, sum] : sums) {
        g.states.push_back(state);
        g.feature_means.col(k++) = sum / static_cast<double>(data.size());
    }
    return g;
}

inline PsiHat estimate_psi(const FeatureModel& model, const OfflineDataset& data,
                           const Covariance& cov) {
    NextStateGroups g = group_by_next_state(model, data);
    Eigen::MatrixXd columns = cov.solve(g.feature_means);
    return PsiHat(model.num_states, std::move(g.states), std::move(columns));
}

inline PsiHat estimate_psi(const FeatureModel& model, const OfflineDataset& data, double beta) {
    return estimate_psi(model, data, build_covariance(model, data, beta));
}

/// Psi_hat * v = (1/n) Lambda^{-1} sum_i phi_i v(X'_i), reading v only at observed states.
inline Vector apply_psi_hat(const PsiHat& psi_hat, const Vector& v) {
    if (v.size() != psi_hat.num_states()) throw ShapeError("value vector length differs from X");
    Vector out = Vector::Zero(psi_hat.dim());
    const auto& states = psi_hat.states();
    for (std::size_t k = 0; k < states.size(); ++k)
        out += psi_hat.columns().col(static_cast<Index>(k)) * v(states[k]);
    return out;
}

/// Same product with v given only on psi_hat.states(), aligned by position.
inline Vector apply_psi_hat_observed(const PsiHat& psi_hat, const Vector& v_observed) {
    if (v_observed.size() != psi_hat.columns().cols()) throw ShapeError("one value per observed state expected");
    return psi_hat.columns() * v_observed;
}

// ---------------------------------------------------------------------------
// CSV: header x,a,r,x_next

inline void write_dataset(std::ostream& out, const OfflineDataset& data) {
    out << "x,a,r,x_next\n";
    std::ostringstream line;
    line.imbue(std::locale::classic());
    line << std::setprecision(17);
    for (const Transition& t : data.transitions) {
        line.str("");
        line << t.x << ',' << t.a << ',' << t.r << ',' << t.x_next << '\n';
        out << line.str();
    }
}

inline OfflineDataset read_dataset(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error("dataset: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "x,a,r,x_next") throw Error("dataset: expected header x,a,r,x_next");
    OfflineDataset data;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream s(line);
        s.imbue(std::locale::classic());
        Transition t{};
        char c1 = 0, c2 = 0, c3 = 0;
        if (!(s >> t.x >> c1 >> t.a >> c2 >> t.r >> c3 >> t.x_next) || c1 != ',' || c2 != ',' || c3 != ',')
            throw Error("dataset: malformed row at line " + std::to_string(lineno));
        data.transitions.push_back(t);
    }
    if (data.transitions.empty()) throw Error("dataset: no rows");
    return data;
}

inline void save_dataset(const std::string& path, const OfflineDataset& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    write_dataset(out, data);
}

inline OfflineDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open dataset file " + path);
    return read_dataset(in);
}

}  // namespace fogas
