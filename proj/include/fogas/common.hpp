#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace fogas {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inconsistent matrix or vector dimensions.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A precondition on a scalar argument failed (non-positive rate, bad index, ...).
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Iterative solver produced a non-finite iterate.
class SolverAbort : public Error {
public:
    SolverAbort(long iteration, std::string quantity)
        : Error("non-finite " + quantity + " at iteration " + std::to_string(iteration)),
          iteration_(iteration), quantity_(std::move(quantity)) {}

    long iteration() const noexcept { return iteration_; }
    const std::string& quantity() const noexcept { return quantity_; }

private:
    long iteration_;
    std::string quantity_;
};

/// Deterministic generator for a (seed, stream) pair. Independent streams let
/// data collection and the solver's output index draw from the same user seed.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace fogas
