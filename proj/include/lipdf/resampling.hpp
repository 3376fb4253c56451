#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "lipdf/ensemble.hpp"
#include "lipdf/rng.hpp"

namespace lipdf {

enum class ResampleMethod { Systematic, Residual };

namespace detail {

inline void check_normalized(const std::vector<double>& weights) {
    double sum = 0.0;
    for (double w : weights) sum += w;
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("resample: weights are not normalized");
}

}  // namespace detail

/// Offspring counts from systematic resampling with a pinned offset:
/// n_out strata (u0 + i) / n_out walked against the weight CDF.
inline std::vector<int> systematic_offspring_counts(const std::vector<double>& weights,
                                                    int n_out, double u0) {
    detail::check_normalized(weights);
    if (n_out < 1) throw std::invalid_argument("resample: n_out must be >= 1");
    std::vector<int> counts(weights.size(), 0);
    double cum = weights[0];
    std::size_t j = 0;
    for (int i = 0; i < n_out; ++i) {
        const double u = (u0 + i) / static_cast<double>(n_out);
        while (cum < u && j + 1 < weights.size()) cum += weights[++j];
        ++counts[j];
    }
    return counts;
}

inline std::vector<int> systematic_offspring_counts(const std::vector<double>& weights,
                                                    int n_out, RngStream& rng) {
    return systematic_offspring_counts(weights, n_out, rng.uniform01());
}

/// Offspring counts from residual resampling: floor(n_out * w_i) deterministic
/// copies, the remainder drawn systematically from the residual weights.
inline std::vector<int> residual_offspring_counts(const std::vector<double>& weights,
                                                  int n_out, RngStream& rng) {
    detail::check_normalized(weights);
    if (n_out < 1) throw std::invalid_argument("resample: n_out must be >= 1");
    std::vector<int> counts(weights.size());
    std::vector<double> residual(weights.size());
    int assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double scaled = n_out * weights[i];
        counts[i] = static_cast<int>(std::floor(scaled));
        residual[i] = scaled - counts[i];
        assigned += counts[i];
    }
    const int remainder = n_out - assigned;
    if (remainder > 0) {
        double rsum = 0.0;
        for (double r : residual) rsum += r;
        for (double& r : residual) r /= rsum;
        const auto extra = systematic_offspring_counts(residual, remainder, rng.uniform01());
        for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += extra[i];
    }
    return counts;
}

namespace detail {

inline ParticleEnsemble materialize(const ParticleEnsemble& ensemble,
                                    const std::vector<int>& counts) {
    ParticleEnsemble out;
    out.rng_seed = ensemble.rng_seed;
    out.particles.reserve(ensemble.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        for (int c = 0; c < counts[i]; ++c) out.particles.push_back(ensemble.particles[i]);
    out.weights.assign(out.particles.size(), 1.0 / static_cast<double>(out.particles.size()));
    return out;
}

}  // namespace detail

/// Unbiased resample with one uniform offset; output weights uniform 1/N.
inline ParticleEnsemble systematic_resample(const ParticleEnsemble& ensemble, RngStream& rng) {
    return detail::materialize(
        ensemble, systematic_offspring_counts(ensemble.weights,
                                              static_cast<int>(ensemble.size()), rng));
}

inline ParticleEnsemble residual_resample(const ParticleEnsemble& ensemble, RngStream& rng) {
    return detail::materialize(
        ensemble, residual_offspring_counts(ensemble.weights,
                                            static_cast<int>(ensemble.size()), rng));
}

inline ParticleEnsemble resample(const ParticleEnsemble& ensemble, RngStream& rng,
                                 ResampleMethod method) {
    return method == ResampleMethod::Systematic ? systematic_resample(ensemble, rng)
                                                : residual_resample(ensemble, rng);
}

}  // namespace lipdf
