#pragma once

#include <concepts>

#include "lipdf/rng.hpp"
#include "lipdf/types.hpp"

namespace lipdf {

/// A discrete-time state-space model: transition sampler, likelihood of an
/// observation given a state, and an observation simulator.
template <typename M>
concept StateSpaceModel =
    requires(const M& m, const StateVector& x, const Observation& y, RngStream& rng, int t) {
        { m.state_dim() } -> std::convertible_to<int>;
        { m.obs_dim() } -> std::convertible_to<int>;
        { m.sample_transition(x, t, rng) } -> std::convertible_to<StateVector>;
        { m.likelihood(x, y) } -> std::convertible_to<double>;
        { m.simulate_observation(x, rng) } -> std::convertible_to<Observation>;
    };

/// Models that additionally expose the noise-free observation map h(x).
template <typename M>
concept HasNoiselessObservation = requires(const M& m, const StateVector& x) {
    { m.observe_noiseless(x) } -> std::convertible_to<Observation>;
};

}  // namespace lipdf
