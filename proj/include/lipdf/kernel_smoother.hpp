#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "lipdf/ensemble.hpp"
#include "lipdf/fulcrum_grid.hpp"

namespace lipdf {

enum class KernelKind {
    NearestNeighbor,  // constant weight over the M_j nearest fulcrums
    Uniform           // weight inversely proportional to distance, support radius h
};

struct SmootherConfig {
    KernelKind kernel = KernelKind::NearestNeighbor;
    int neighbor_count = 4;   // M_j, nearest-neighbor kernel
    double bandwidth = 0.0;   // h; <= 0 selects 1.5 x the largest grid spacing
    bool clamp_negative = true;
};

/// Kernel weight for a neighbor at the given distance. The nearest-neighbor
/// kernel is constant over its selected set; the uniform kernel is h / d
/// inside the bandwidth and 0 outside.
inline double kernel_weight(double distance, double bandwidth, KernelKind kind) {
    if (kind == KernelKind::NearestNeighbor) return bandwidth;
    if (distance > bandwidth) return 0.0;
    return bandwidth / distance;  // caller handles distance 0 (exact hit)
}

inline double kernel_weight(const StateVector& query, const StateVector& point,
                            const SmootherConfig& config) {
    return kernel_weight((query - point).norm(), config.bandwidth, config.kernel);
}

struct SmootherFlags {
    int zero_weight_fallbacks = 0;
    int empty_radius_fallbacks = 0;
    int clamped = 0;
};

/// Nadaraya-Watson estimate over pre-selected neighbors: sum(K_i p_i) /
/// sum(K_i). A zero-distance neighbor under the uniform kernel short-circuits
/// to that fulcrum's likelihood; if every kernel weight vanishes, the nearest
/// neighbor's value is used and flagged.
inline double nw_estimate(const std::vector<FulcrumNeighbor>& neighbors,
                          const SmootherConfig& config, SmootherFlags* flags = nullptr) {
    if (neighbors.empty()) throw std::invalid_argument("nw_estimate: no neighbors");
    if (!(config.bandwidth > 0.0)) throw std::invalid_argument("nw_estimate: bandwidth must be positive");

    if (config.kernel == KernelKind::Uniform) {
        for (const auto& nb : neighbors)
            if (nb.distance == 0.0) return nb.likelihood;
    }

    double num = 0.0, den = 0.0;
    for (const auto& nb : neighbors) {
        const double w = kernel_weight(nb.distance, config.bandwidth, config.kernel);
        num += w * nb.likelihood;
        den += w;
    }
    double value;
    if (den <= 0.0) {
        const auto best = std::min_element(neighbors.begin(), neighbors.end(),
                                           [](const FulcrumNeighbor& a, const FulcrumNeighbor& b) {
                                               return a.distance < b.distance ||
                                                      (a.distance == b.distance && a.index < b.index);
                                           });
        value = best->likelihood;
        if (flags) ++flags->zero_weight_fallbacks;
    } else {
        value = num / den;
    }
    if (config.clamp_negative && value < 0.0) {
        value = 0.0;
        if (flags) ++flags->clamped;
    }
    return value;
}

struct SmoothResult {
    std::vector<double> likelihoods;
    SmootherFlags flags;
    double bandwidth = 0.0;  // the bandwidth actually used
};

inline double effective_bandwidth(const FulcrumGrid& grid, const SmootherConfig& config) {
    if (config.bandwidth > 0.0) return config.bandwidth;
    double max_spacing = 0.0;
    for (int l : grid.active_dims)
        max_spacing = std::max(max_spacing, grid.spacing[static_cast<std::size_t>(l)]);
    return max_spacing > 0.0 ? 1.5 * max_spacing : 1.0;
}

/// Infers one likelihood per particle from the evaluated grid; no model
/// calls are made, so the cost is independent of how the fulcrums were
/// scored.
inline SmoothResult smooth_ensemble(const ParticleEnsemble& ensemble, const FulcrumGrid& grid,
                                    const SmootherConfig& config) {
    if (!grid.evaluated())
        throw std::logic_error("smooth_ensemble: grid likelihoods are not set");

    SmootherConfig cfg = config;
    cfg.bandwidth = effective_bandwidth(grid, config);

    SmoothResult result;
    result.bandwidth = cfg.bandwidth;
    result.likelihoods.resize(ensemble.size());

    detail::NeighborWorkspace ws;
    std::vector<FulcrumNeighbor> neighbors;
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
        if (cfg.kernel == KernelKind::NearestNeighbor) {
            detail::nearest_into(grid, ensemble.particles[i], cfg.neighbor_count, ws, neighbors);
        } else {
            auto ball = fulcrums_within(grid, ensemble.particles[i], cfg.bandwidth);
            neighbors = std::move(ball.neighbors);
            if (ball.empty_fallback) ++result.flags.empty_radius_fallbacks;
        }
        result.likelihoods[i] = nw_estimate(neighbors, cfg, &result.flags);
    }
    return result;
}

}  // namespace lipdf
