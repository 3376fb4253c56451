#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "lipdf/ensemble.hpp"
#include "lipdf/model.hpp"
#include "lipdf/types.hpp"

namespace lipdf {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double length() const { return hi - lo; }
    bool contains(double x) const { return x >= lo && x <= hi; }
};

/// Lattice construction parameters. A dimension is partitioned when it is
/// listed active (empty list = all) and its count override is not 1; pinned
/// dimensions hold every fulcrum at the ensemble's weighted mean (circular
/// mean for angular coordinates).
struct GridSpec {
    double margin_scale = 1.0;         // a: boundary margin r = a * sqrt(noise_scale)
    std::vector<double> noise_scale;   // per-dimension Q, state-space units^2
    double resolution = 1.0;           // lambda in the per-dimension count rule
    std::vector<int> count_override;   // empty or per-dimension; 0 = derive, 1 = do not partition
    std::vector<int> active_dims;      // empty = all dimensions
    std::vector<bool> circular;        // empty or per-dimension angular flag
    std::size_t max_points = 1000000;  // total lattice size cap

    bool dim_active(int l, int total_dims) const {
        if (!count_override.empty() && count_override[static_cast<std::size_t>(l)] == 1) return false;
        if (active_dims.empty()) return l >= 0 && l < total_dims;
        return std::find(active_dims.begin(), active_dims.end(), l) != active_dims.end();
    }

    double noise_for(int l) const {
        if (noise_scale.empty()) return 1.0;
        return noise_scale[static_cast<std::size_t>(l)];
    }
};

/// Thrown when a requested lattice would exceed the configured point cap.
class GridCapExceeded : public std::runtime_error {
public:
    GridCapExceeded(std::size_t requested, std::size_t cap)
        : std::runtime_error("fulcrum grid of " + std::to_string(requested) +
                             " points exceeds the cap of " + std::to_string(cap)),
          requested_(requested) {}
    std::size_t requested() const { return requested_; }

private:
    std::size_t requested_;
};

/// Axis-aligned fulcrum lattice covering the particle cloud. `points` holds
/// the full cross product in row-major order (last dimension fastest);
/// pinned dimensions carry a single shared coordinate.
struct FulcrumGrid {
    std::vector<Interval> bounds;
    std::vector<int> counts;
    std::vector<double> spacing;
    std::vector<std::vector<double>> axes;
    std::vector<int> active_dims;
    std::vector<StateVector> points;
    std::vector<double> likelihoods;

    std::size_t size() const { return points.size(); }
    int dim() const { return static_cast<int>(counts.size()); }
    bool evaluated() const { return likelihoods.size() == points.size() && !points.empty(); }
};

/// Particle hull of coordinate l extended by the margin a * sqrt(Q_l).
inline Interval bounding_interval(const ParticleEnsemble& ensemble, int l, const GridSpec& spec) {
    if (ensemble.particles.empty())
        throw std::invalid_argument("bounding_interval: empty ensemble");
    double lo = ensemble.particles[0][l], hi = lo;
    for (const auto& p : ensemble.particles) {
        lo = std::min(lo, p[l]);
        hi = std::max(hi, p[l]);
    }
    double r = 0.0;
    if (spec.margin_scale > 0.0) {
        const double q = spec.noise_for(l);
        if (!(q > 0.0))
            throw std::invalid_argument("bounding_interval: noise_scale must be positive for dimension " +
                                        std::to_string(l));
        r = spec.margin_scale * std::sqrt(q);
    }
    return {lo - r, hi + r};
}

/// Fulcrum count along one dimension: the override when given, otherwise
/// ceil(|I| / (2 lambda) * Q^(-1/2)) with a floor of 2 so spacing is defined.
inline int points_per_dimension(const Interval& interval, const GridSpec& spec, int l) {
    if (!spec.count_override.empty()) {
        const int p = spec.count_override[static_cast<std::size_t>(l)];
        if (p < 0) throw std::invalid_argument("points_per_dimension: negative count override");
        if (p >= 1) return p;
    }
    const double q = spec.noise_for(l);
    if (!(q > 0.0) || !(spec.resolution > 0.0))
        throw std::invalid_argument("points_per_dimension: noise_scale and resolution must be positive");
    const double derived = std::ceil(interval.length() / (2.0 * spec.resolution) / std::sqrt(q));
    return std::max(2, static_cast<int>(derived));
}

/// Builds the lattice over the ensemble. Throws GridCapExceeded when the
/// cross product would exceed spec.max_points.
inline FulcrumGrid build_grid(const ParticleEnsemble& ensemble, const GridSpec& spec) {
    const int dims = ensemble.dim();
    if (dims == 0) throw std::invalid_argument("build_grid: empty ensemble");

    FulcrumGrid grid;
    grid.bounds.resize(static_cast<std::size_t>(dims));
    grid.counts.resize(static_cast<std::size_t>(dims));
    grid.spacing.resize(static_cast<std::size_t>(dims));
    grid.axes.resize(static_cast<std::size_t>(dims));

    std::size_t total = 1;
    for (int l = 0; l < dims; ++l) {
        const auto ul = static_cast<std::size_t>(l);
        if (spec.dim_active(l, dims)) {
            grid.active_dims.push_back(l);
            const Interval iv = bounding_interval(ensemble, l, spec);
            const int m = std::max(2, points_per_dimension(iv, spec, l));
            grid.bounds[ul] = iv;
            grid.counts[ul] = m;
            grid.spacing[ul] = iv.length() / static_cast<double>(m - 1);
            grid.axes[ul].resize(static_cast<std::size_t>(m));
            for (int i = 0; i < m; ++i)
                grid.axes[ul][static_cast<std::size_t>(i)] = iv.lo + i * grid.spacing[ul];
            grid.axes[ul].back() = iv.hi;
        } else {
            const bool circ = !spec.circular.empty() && spec.circular[ul];
            const double pin = circ ? circular_weighted_mean(ensemble, l)
                                    : weighted_mean_estimate(ensemble)[l];
            grid.bounds[ul] = {pin, pin};
            grid.counts[ul] = 1;
            grid.spacing[ul] = 0.0;
            grid.axes[ul] = {pin};
        }
        if (total > spec.max_points / static_cast<std::size_t>(grid.counts[ul]) + 1)
            throw GridCapExceeded(total * static_cast<std::size_t>(grid.counts[ul]), spec.max_points);
        total *= static_cast<std::size_t>(grid.counts[ul]);
    }
    if (total > spec.max_points) throw GridCapExceeded(total, spec.max_points);

    grid.points.reserve(total);
    std::vector<int> idx(static_cast<std::size_t>(dims), 0);
    StateVector point(dims);
    for (std::size_t m = 0; m < total; ++m) {
        for (int l = 0; l < dims; ++l)
            point[l] = grid.axes[static_cast<std::size_t>(l)][static_cast<std::size_t>(idx[static_cast<std::size_t>(l)])];
        grid.points.push_back(point);
        for (int l = dims - 1; l >= 0; --l) {
            if (++idx[static_cast<std::size_t>(l)] < grid.counts[static_cast<std::size_t>(l)]) break;
            idx[static_cast<std::size_t>(l)] = 0;
        }
    }
    return grid;
}

/// Scores every fulcrum against the observation: exactly grid.size()
/// model-likelihood calls.
template <StateSpaceModel M>
void evaluate_fulcrums(FulcrumGrid& grid, const M& model, const Observation& y) {
    if (grid.evaluated())
        throw std::logic_error("evaluate_fulcrums: likelihoods already set");
    grid.likelihoods.resize(grid.size());
    for (std::size_t m = 0; m < grid.size(); ++m) {
        const double p = model.likelihood(grid.points[m], y);
        if (!std::isfinite(p) || p < 0.0)
            throw std::runtime_error("evaluate_fulcrums: likelihood of fulcrum " + std::to_string(m) +
                                     " is negative or non-finite");
        grid.likelihoods[m] = p;
    }
}

struct FulcrumNeighbor {
    std::size_t index = 0;
    double likelihood = 0.0;
    double distance = 0.0;
};

namespace detail {

inline double active_sq_distance(const FulcrumGrid& grid, const StateVector& query,
                                 const StateVector& point) {
    double d2 = 0.0;
    for (int l : grid.active_dims) {
        const double d = query[l] - point[l];
        d2 += d * d;
    }
    return d2;
}

/// Contiguous index window of the `want` nearest axis coordinates, extended
/// through boundary ties so exact-tie ordering survives downstream.
inline std::pair<int, int> axis_window(const std::vector<double>& axis, double q, int want) {
    const int n = static_cast<int>(axis.size());
    if (want >= n) return {0, n - 1};
    auto dist = [&](int i) { return std::abs(axis[static_cast<std::size_t>(i)] - q); };
    int lo = static_cast<int>(std::lower_bound(axis.begin(), axis.end(), q) - axis.begin());
    lo = std::clamp(lo, 0, n - 1);
    if (lo > 0 && dist(lo - 1) <= dist(lo)) --lo;
    int hi = lo;
    while (hi - lo + 1 < want) {
        const double dl = lo > 0 ? dist(lo - 1) : std::numeric_limits<double>::infinity();
        const double dr = hi < n - 1 ? dist(hi + 1) : std::numeric_limits<double>::infinity();
        if (dl <= dr) --lo; else ++hi;
    }
    const double edge = std::max(dist(lo), dist(hi));
    while (lo > 0 && dist(lo - 1) <= edge) --lo;
    while (hi < n - 1 && dist(hi + 1) <= edge) ++hi;
    return {lo, hi};
}

struct Candidate {
    double d2;
    std::size_t index;
    bool operator<(const Candidate& o) const {
        return d2 < o.d2 || (d2 == o.d2 && index < o.index);
    }
};

/// Reusable scratch space for repeated neighbor queries.
struct NeighborWorkspace {
    std::vector<Candidate> candidates;
};

inline void collect_window_candidates(const FulcrumGrid& grid, const StateVector& query, int want,
                                      std::vector<Candidate>& out) {
    const int dims = grid.dim();
    std::vector<std::size_t> stride(static_cast<std::size_t>(dims), 1);
    for (int l = dims - 2; l >= 0; --l)
        stride[static_cast<std::size_t>(l)] =
            stride[static_cast<std::size_t>(l + 1)] * static_cast<std::size_t>(grid.counts[static_cast<std::size_t>(l + 1)]);

    std::vector<std::pair<int, int>> windows(static_cast<std::size_t>(dims), {0, 0});
    for (int l : grid.active_dims)
        windows[static_cast<std::size_t>(l)] =
            axis_window(grid.axes[static_cast<std::size_t>(l)], query[l], want);

    std::vector<int> idx(static_cast<std::size_t>(dims));
    for (int l = 0; l < dims; ++l) idx[static_cast<std::size_t>(l)] = windows[static_cast<std::size_t>(l)].first;
    while (true) {
        std::size_t flat = 0;
        double d2 = 0.0;
        for (int l = 0; l < dims; ++l) {
            const auto ul = static_cast<std::size_t>(l);
            flat += static_cast<std::size_t>(idx[ul]) * stride[ul];
        }
        for (int l : grid.active_dims) {
            const double d = query[l] - grid.axes[static_cast<std::size_t>(l)][static_cast<std::size_t>(idx[static_cast<std::size_t>(l)])];
            d2 += d * d;
        }
        out.push_back({d2, flat});
        int l = dims - 1;
        for (; l >= 0; --l) {
            const auto ul = static_cast<std::size_t>(l);
            if (++idx[ul] <= windows[ul].second) break;
            idx[ul] = windows[ul].first;
        }
        if (l < 0) break;
    }
}

inline void nearest_into(const FulcrumGrid& grid, const StateVector& query, int count,
                         NeighborWorkspace& ws, std::vector<FulcrumNeighbor>& out) {
    if (!grid.evaluated())
        throw std::logic_error("nearest_fulcrums: grid likelihoods are not set");
    if (count < 1) throw std::invalid_argument("nearest_fulcrums: count must be >= 1");
    const int n = static_cast<int>(grid.size());
    const int k = std::min(count, n);

    ws.candidates.clear();
    std::size_t window_volume = 1;
    for (int l : grid.active_dims)
        window_volume *= static_cast<std::size_t>(
            std::min(k + 2, grid.counts[static_cast<std::size_t>(l)]) + 2);
    if (!grid.active_dims.empty() && window_volume * 2 < grid.size()) {
        collect_window_candidates(grid, query, k + 2, ws.candidates);
    } else {
        ws.candidates.reserve(grid.size());
        for (std::size_t m = 0; m < grid.size(); ++m)
            ws.candidates.push_back({active_sq_distance(grid, query, grid.points[m]), m});
    }

    auto mid = ws.candidates.begin() + std::min<std::ptrdiff_t>(k, static_cast<std::ptrdiff_t>(ws.candidates.size()));
    std::nth_element(ws.candidates.begin(), mid - 1, ws.candidates.end());
    std::sort(ws.candidates.begin(), mid);

    out.clear();
    for (auto it = ws.candidates.begin(); it != mid; ++it)
        out.push_back({it->index, grid.likelihoods[it->index], std::sqrt(it->d2)});
}

}  // namespace detail

/// The `count` lattice points closest to the query by Euclidean distance
/// over the active dimensions; exact ties resolve by lattice index.
inline std::vector<FulcrumNeighbor> nearest_fulcrums(const FulcrumGrid& grid,
                                                     const StateVector& query, int count) {
    detail::NeighborWorkspace ws;
    std::vector<FulcrumNeighbor> out;
    detail::nearest_into(grid, query, count, ws, out);
    return out;
}

struct RadiusQueryResult {
    std::vector<FulcrumNeighbor> neighbors;
    bool empty_fallback = false;  // nothing within the radius; nearest point substituted
};

/// All lattice points within `radius` of the query (active dimensions),
/// ordered by (distance, index). An empty ball falls back to the single
/// nearest point, flagged.
inline RadiusQueryResult fulcrums_within(const FulcrumGrid& grid, const StateVector& query,
                                         double radius) {
    if (!grid.evaluated())
        throw std::logic_error("fulcrums_within: grid likelihoods are not set");
    if (!(radius > 0.0)) throw std::invalid_argument("fulcrums_within: radius must be positive");

    RadiusQueryResult result;
    const double r2 = radius * radius;
    std::vector<detail::Candidate> candidates;
    for (std::size_t m = 0; m < grid.size(); ++m) {
        const double d2 = detail::active_sq_distance(grid, query, grid.points[m]);
        if (d2 <= r2) candidates.push_back({d2, m});
    }
    if (candidates.empty()) {
        result.neighbors = nearest_fulcrums(grid, query, 1);
        result.empty_fallback = true;
        return result;
    }
    std::sort(candidates.begin(), candidates.end());
    for (const auto& c : candidates)
        result.neighbors.push_back({c.index, grid.likelihoods[c.index], std::sqrt(c.d2)});
    return result;
}

}  // namespace lipdf
