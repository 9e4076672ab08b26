#pragma once

#include "fogas/common.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace fogas {

/// Discounted MDP whose transitions and rewards are linear in a known feature map:
/// p(x'|x,a) = <phi(x,a), psi(x')> and r(x,a) = <phi(x,a), omega>.
///
/// State-action pairs are flattened row-major, pair (x,a) lives at row x * A + a.
/// The initial distribution is a point mass at x0.
class LinearMdp {
public:
    LinearMdp(Index num_states, Index num_actions, Matrix phi, Matrix psi, Vector omega,
              double gamma, Index x0)
        : num_states_(num_states), num_actions_(num_actions), phi_(std::move(phi)),
          psi_(std::move(psi)), omega_(std::move(omega)), gamma_(gamma), x0_(x0) {
        if (num_states < 1) throw ShapeError("num_states must be >= 1");
        if (num_actions < 1) throw ShapeError("num_actions must be >= 1");
        const Index d = phi_.cols();
        if (d < 1) throw ShapeError("dim must be >= 1");
        if (phi_.rows() != num_states * num_actions)
            throw ShapeError("phi rows: expected num_states*num_actions = " +
                             std::to_string(num_states * num_actions) + ", got " +
                             std::to_string(phi_.rows()));
        if (psi_.rows() != d)
            throw ShapeError("psi rows: expected dim = " + std::to_string(d) + ", got " +
                             std::to_string(psi_.rows()));
        if (psi_.cols() != num_states)
            throw ShapeError("psi cols: expected num_states = " + std::to_string(num_states) +
                             ", got " + std::to_string(psi_.cols()));
        if (omega_.size() != d)
            throw ShapeError("omega length: expected dim = " + std::to_string(d) + ", got " +
                             std::to_string(omega_.size()));
        if (!(gamma > 0.0 && gamma < 1.0)) throw ArgumentError("gamma must lie in (0,1)");
        if (x0 < 0 || x0 >= num_states) throw ArgumentError("x0 out of range");

        feature_bound_ = phi_.rowwise().norm().maxCoeff();
        transitions_ = phi_ * psi_;
        rewards_ = phi_ * omega_;
    }

    Index num_states() const noexcept { return num_states_; }
    Index num_actions() const noexcept { return num_actions_; }
    Index dim() const noexcept { return phi_.cols(); }
    Index num_pairs() const noexcept { return num_states_ * num_actions_; }
    Index pair(Index x, Index a) const noexcept { return x * num_actions_ + a; }

    const Matrix& phi() const noexcept { return phi_; }
    const Matrix& psi() const noexcept { return psi_; }
    const Vector& omega() const noexcept { return omega_; }
    double gamma() const noexcept { return gamma_; }
    Index x0() const noexcept { return x0_; }
    double feature_bound() const noexcept { return feature_bound_; }

    /// p(.|x,a) stacked as rows, XA x X.
    const Matrix& transitions() const noexcept { return transitions_; }
    /// r(x,a), length XA.
    const Vector& rewards() const noexcept { return rewards_; }

    auto feature(Index x, Index a) const { return phi_.row(pair(x, a)).transpose(); }

    Vector initial_distribution() const {
        Vector nu0 = Vector::Zero(num_states_);
        nu0(x0_) = 1.0;
        return nu0;
    }

    friend bool operator==(const LinearMdp& lhs, const LinearMdp& rhs) {
        return lhs.num_states_ == rhs.num_states_ && lhs.num_actions_ == rhs.num_actions_ &&
               lhs.gamma_ == rhs.gamma_ && lhs.x0_ == rhs.x0_ && lhs.phi_ == rhs.phi_ &&
               lhs.psi_ == rhs.psi_ && lhs.omega_ == rhs.omega_;
    }

private:
    Index num_states_;
    Index num_actions_;
    Matrix phi_;
    Matrix psi_;
    Vector omega_;
    double gamma_;
    Index x0_;
    double feature_bound_ = 0.0;
    Matrix transitions_;
    Vector rewards_;
};

/// The part of a LinearMdp a learner is allowed to see: features, reward weights,
/// discount and initial state. The transition weights psi are absent on purpose.
struct FeatureModel {
    Index num_states;
    Index num_actions;
    Matrix phi;
    Vector omega;
    double gamma;
    Index x0;
    double feature_bound;

    Index dim() const noexcept { return phi.cols(); }
    Index pair(Index x, Index a) const noexcept { return x * num_actions + a; }

    /// Rows phi(x, 0..A-1) as an A x d block.
    auto state_features(Index x) const { return phi.middleRows(x * num_actions, num_actions); }
};

inline FeatureModel features_of(const LinearMdp& mdp) {
    return FeatureModel{mdp.num_states(), mdp.num_actions(), mdp.phi(),  mdp.omega(),
                        mdp.gamma(),      mdp.x0(),          mdp.feature_bound()};
}

struct Violation {
    std::string kind;  // row-sum, negative-probability, reward-range, omega-norm, feature-norm, rank
    Index index;       // offending (x,a) pair row, or -1 when global
    double magnitude;
    std::string message;
};

struct ValidationTolerances {
    double probability_floor = 1e-10;
    double row_sum = 1e-8;
    double reward = 1e-10;
    double omega_norm = 1e-8;
    double rank = 1e-8;
};

/// Checks every structural requirement of a linear MDP. Empty result means valid.
inline std::vector<Violation> validate_linear_mdp(const LinearMdp& mdp,
                                                  const ValidationTolerances& tol = {}) {
    std::vector<Violation> report;
    const Matrix& P = mdp.transitions();
    const Vector& r = mdp.rewards();
    const Index d = mdp.dim();

    for (Index row = 0; row < mdp.num_pairs(); ++row) {
        const Index x = row / mdp.num_actions();
        const Index a = row % mdp.num_actions();
        const std::string where = "(x=" + std::to_string(x) + ",a=" + std::to_string(a) + ")";
        const double min_entry = P.row(row).minCoeff();
        if (min_entry < -tol.probability_floor)
            report.push_back({"negative-probability", row, min_entry,
                              "transition row " + where + " has entry " + std::to_string(min_entry)});
        const double sum = P.row(row).sum();
        if (std::abs(sum - 1.0) > tol.row_sum)
            report.push_back({"row-sum", row, sum - 1.0,
                              "transition row " + where + " sums to " + std::to_string(sum)});
        if (r(row) < -tol.reward || r(row) > 1.0 + tol.reward)
            report.push_back({"reward-range", row, r(row),
                              "reward at " + where + " is " + std::to_string(r(row))});
        const double fnorm = mdp.phi().row(row).norm();
        if (fnorm > mdp.feature_bound())
            report.push_back({"feature-norm", row, fnorm,
                              "feature norm at " + where + " exceeds cached bound"});
    }

    const double wnorm = mdp.omega().norm();
    if (wnorm > std::sqrt(static_cast<double>(d)) + tol.omega_norm)
        report.push_back({"omega-norm", -1, wnorm,
                          "||omega|| = " + std::to_string(wnorm) + " exceeds sqrt(d)"});

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(mdp.phi());
    const auto& sv = svd.singularValues();
    const double ratio = sv(0) > 0.0 ? sv(sv.size() - 1) / sv(0) : 0.0;
    if (mdp.phi().rows() < d || ratio <= tol.rank)
        report.push_back({"rank", -1, ratio, "phi is not full column rank"});
    return report;
}

namespace detail {

/// Point drawn uniformly from the probability simplex (normalized exponentials).
template <class Rng>
Vector draw_simplex(Index size, Rng& rng) {
    std::exponential_distribution<double> expo(1.0);
    Vector v(size);
    for (Index i = 0; i < size; ++i) v(i) = expo(rng);
    double total = v.sum();
    while (!(total > 0.0)) {
        for (Index i = 0; i < size; ++i) v(i) = expo(rng);
        total = v.sum();
    }
    return v / total;
}

}  // namespace detail

/// Random linear MDP built from d anchor next-state distributions q_1..q_d.
/// Each phi(x,a) is a point of the d-simplex, so p(.|x,a) = sum_j phi_j(x,a) q_j
/// is a distribution and rewards <phi, omega> lie in [0,1] for omega in [0,1]^d.
inline LinearMdp generate_linear_mdp(Index num_states, Index num_actions, Index dim, double gamma,
                                     std::uint64_t seed) {
    if (dim < 1) throw ArgumentError("dim must be >= 1");
    if (num_states < 1) throw ArgumentError("states must be >= 1");
    if (num_actions < 1) throw ArgumentError("actions must be >= 1");
    if (dim > num_states * num_actions) throw ArgumentError("dim must be <= states*actions");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ArgumentError("gamma must lie in (0,1)");

    auto rng = make_rng(seed, 0x6d6470);
    Matrix psi(dim, num_states);
    for (Index j = 0; j < dim; ++j) psi.row(j) = detail::draw_simplex(num_states, rng).transpose();

    Matrix phi(num_states * num_actions, dim);
    for (int attempt = 0;; ++attempt) {
        for (Index row = 0; row < phi.rows(); ++row)
            phi.row(row) = detail::draw_simplex(dim, rng).transpose();
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(phi);
        const auto& sv = svd.singularValues();
        if (sv(sv.size() - 1) > 1e-8 * sv(0)) break;
        if (attempt > 1000) throw Error("could not draw a full-rank feature matrix");
    }

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vector omega(dim);
    for (Index j = 0; j < dim; ++j) omega(j) = unit(rng);

    return LinearMdp(num_states, num_actions, std::move(phi), std::move(psi), std::move(omega),
                     gamma, 0);
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline void write_number(std::ostream& out, double value) {
    std::ostringstream s;
    s.imbue(std::locale::classic());
    s << std::setprecision(17) << value;
    out << s.str();
}

inline void write_array(std::ostream& out, const double* data, Index size) {
    out << '[';
    for (Index i = 0; i < size; ++i) {
        if (i) out << ", ";
        write_number(out, data[i]);
    }
    out << ']';
}

inline Matrix read_matrix(const nlohmann::json& values, Index rows, Index cols, const char* name) {
    if (!values.is_array() || static_cast<Index>(values.size()) != rows * cols)
        throw ShapeError(std::string(name) + ": expected " + std::to_string(rows * cols) +
                         " row-major entries");
    Matrix m(rows, cols);
    for (Index i = 0; i < rows * cols; ++i) m.data()[i] = values[static_cast<std::size_t>(i)].get<double>();
    return m;
}

}  // namespace detail

/// Writes the MDP as a JSON document with 17 significant digits per number.
inline void write_mdp(std::ostream& out, const LinearMdp& mdp) {
    out << "{\n";
    out << "  \"num_states\": " << mdp.num_states() << ",\n";
    out << "  \"num_actions\": " << mdp.num_actions() << ",\n";
    out << "  \"dim\": " << mdp.dim() << ",\n";
    out << "  \"gamma\": ";
    detail::write_number(out, mdp.gamma());
    out << ",\n";
    out << "  \"x0\": " << mdp.x0() << ",\n";
    out << "  \"phi\": ";
    detail::write_array(out, mdp.phi().data(), mdp.phi().size());
    out << ",\n  \"psi\": ";
    detail::write_array(out, mdp.psi().data(), mdp.psi().size());
    out << ",\n  \"omega\": ";
    detail::write_array(out, mdp.omega().data(), mdp.omega().size());
    out << "\n}\n";
}

inline LinearMdp read_mdp(std::istream& in) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed MDP document: ") + e.what());
    }
    try {
        const Index X = doc.at("num_states").get<Index>();
        const Index A = doc.at("num_actions").get<Index>();
        const Index d = doc.at("dim").get<Index>();
        if (X < 1 || A < 1 || d < 1) throw ShapeError("dimensions must be >= 1");
        Matrix phi = detail::read_matrix(doc.at("phi"), X * A, d, "phi");
        Matrix psi = detail::read_matrix(doc.at("psi"), d, X, "psi");
        Matrix omega = detail::read_matrix(doc.at("omega"), d, 1, "omega");
        return LinearMdp(X, A, std::move(phi), std::move(psi), Vector(omega.col(0)),
                         doc.at("gamma").get<double>(), doc.at("x0").get<Index>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("invalid MDP document: ") + e.what());
    }
}

inline void save_mdp(const std::string& path, const LinearMdp& mdp) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    write_mdp(out, mdp);
}

inline LinearMdp load_mdp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open MDP file " + path);
    return read_mdp(in);
}

}  // namespace fogas
