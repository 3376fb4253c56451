#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "lipdf/types.hpp"

namespace lipdf {

/// Weighted particle set carried between filter steps.
struct ParticleEnsemble {
    std::vector<StateVector> particles;
    std::vector<double> weights;
    std::uint64_t rng_seed = 0;

    std::size_t size() const { return particles.size(); }

    int dim() const {
        return particles.empty() ? 0 : static_cast<int>(particles.front().size());
    }

    static ParticleEnsemble uniform(std::vector<StateVector> states, std::uint64_t seed = 0) {
        ParticleEnsemble e;
        e.weights.assign(states.size(), states.empty() ? 0.0 : 1.0 / static_cast<double>(states.size()));
        e.particles = std::move(states);
        e.rng_seed = seed;
        return e;
    }
};

/// Scales weights to sum to one, preserving proportions. A zero total mass
/// is recoverable: weights are reset to uniform and `true` is returned so
/// the caller can flag the step as degenerate.
inline bool normalize_weights(ParticleEnsemble& ensemble) {
    if (ensemble.weights.empty())
        throw std::invalid_argument("normalize_weights: empty ensemble");
    double sum = 0.0;
    for (std::size_t i = 0; i < ensemble.weights.size(); ++i) {
        const double w = ensemble.weights[i];
        if (!std::isfinite(w) || w < 0.0)
            throw std::invalid_argument("normalize_weights: weight " + std::to_string(i) +
                                        " is negative or non-finite");
        sum += w;
    }
    if (sum <= 0.0) {
        const double u = 1.0 / static_cast<double>(ensemble.weights.size());
        for (double& w : ensemble.weights) w = u;
        return true;
    }
    for (double& w : ensemble.weights) w /= sum;
    return false;
}

/// 1 / sum(w_i^2), in [1, N] for normalized weights.
inline double effective_sample_size(const std::vector<double>& weights) {
    double sum = 0.0, sumsq = 0.0;
    for (double w : weights) {
        sum += w;
        sumsq += w * w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("effective_sample_size: weights are not normalized (sum = " +
                                    std::to_string(sum) + ")");
    return 1.0 / sumsq;
}

/// Weighted mean over particles, per coordinate.
inline StateVector weighted_mean_estimate(const ParticleEnsemble& ensemble) {
    if (ensemble.particles.empty())
        throw std::invalid_argument("weighted_mean_estimate: empty ensemble");
    StateVector mean = StateVector::Zero(ensemble.particles.front().size());
    for (std::size_t i = 0; i < ensemble.size(); ++i)
        mean += ensemble.weights[i] * ensemble.particles[i];
    return mean;
}

/// Weighted sample covariance about the weighted mean (weights normalized,
/// no small-sample correction).
inline Eigen::MatrixXd weighted_covariance(const ParticleEnsemble& ensemble,
                                           const StateVector& mean) {
    const auto dim = mean.size();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
        const StateVector d = ensemble.particles[i] - mean;
        cov.noalias() += ensemble.weights[i] * d * d.transpose();
    }
    return cov;
}

/// Weighted standard deviation of one coordinate.
inline double weighted_std(const ParticleEnsemble& ensemble, int dim) {
    double mean = 0.0;
    for (std::size_t i = 0; i < ensemble.size(); ++i)
        mean += ensemble.weights[i] * ensemble.particles[i][dim];
    double var = 0.0;
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
        const double d = ensemble.particles[i][dim] - mean;
        var += ensemble.weights[i] * d * d;
    }
    return std::sqrt(std::max(var, 0.0));
}

/// Weighted circular mean of an angular coordinate, in (-pi, pi].
inline double circular_weighted_mean(const ParticleEnsemble& ensemble, int dim) {
    double s = 0.0, c = 0.0;
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
        const double a = ensemble.particles[i][dim];
        s += ensemble.weights[i] * std::sin(a);
        c += ensemble.weights[i] * std::cos(a);
    }
    return std::atan2(s, c);
}

}  // namespace lipdf
