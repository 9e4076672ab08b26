#pragma once

#include "fogas/fogas.hpp"

#include <random>

namespace fogas::test_util {

/// Policy with every row drawn uniformly from the simplex.
inline TabularPolicy random_policy(Index num_states, Index num_actions, std::mt19937_64& rng) {
    std::exponential_distribution<double> expo(1.0);
    Matrix p(num_states, num_actions);
    for (Index x = 0; x < num_states; ++x) {
        for (Index a = 0; a < num_actions; ++a) p(x, a) = expo(rng);
        p.row(x) /= p.row(x).sum();
    }
    return TabularPolicy(std::move(p));
}

inline Vector random_vector(Index size, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Vector v(size);
    for (Index i = 0; i < size; ++i) v(i) = normal(rng);
    return v;
}

/// One state, two actions, phi(x0,a_k) = e_k, r = (1, 0).
inline LinearMdp one_state_two_actions(double gamma = 0.9) {
    Matrix phi(2, 2);
    phi << 1.0, 0.0, 0.0, 1.0;
    Matrix psi(2, 1);
    psi << 1.0, 1.0;
    Vector omega(2);
    omega << 1.0, 0.0;
    return LinearMdp(1, 2, std::move(phi), std::move(psi), std::move(omega), gamma, 0);
}

/// n transitions with (x,a) uniform over X x A.
inline OfflineDataset uniform_dataset(const LinearMdp& mdp, Index n, std::uint64_t seed) {
    return collect_dataset(mdp, TabularPolicy::uniform(mdp.num_states(), mdp.num_actions()), n,
                           SamplingMode::uniform, seed);
}

}  // namespace fogas::test_util
