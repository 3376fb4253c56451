#pragma once

#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "lipdf/filters.hpp"
#include "lipdf/fulcrum_grid.hpp"
#include "lipdf/kernel_smoother.hpp"
#include "lipdf/least_squares.hpp"

namespace lipdf {

enum class LipdfVariant {
    Explicit,  // fit the observation map on fulcrums, compose with Gaussian noise
    Implicit,  // kernel-average fulcrum likelihoods, no closed-form fit
    Batch      // fit the (time-invariant) observation map once, reuse forever
};

enum class FulcrumScoring {
    Auto,       // noiseless observation map when the model exposes one
    Noiseless,  // require the noiseless map
    Simulated   // one simulated observation per fulcrum
};

struct ActivationConfig {
    // Per-dimension weighted-std ceilings; empty disables the spread gate,
    // a single entry applies to every active dimension.
    std::vector<double> spread_threshold;
    int warmup_steps = 0;  // active only when t > warmup_steps
};

struct LipdfConfig {
    LipdfVariant variant = LipdfVariant::Explicit;
    GridSpec grid;
    BasisSpec basis = BasisSpec::single_monomial(2);
    double sigma = 1.0;  // observation noise std for the Gaussian composition
    FulcrumScoring scoring = FulcrumScoring::Auto;
    SmootherConfig smoother;
    ActivationConfig activation;
    double ratio_warning_low = 0.2;   // fulcrum/particle ratio guidance band
    double ratio_warning_high = 0.5;
    int batch_fit_step = 1;
    int batch_sample_count = 100;
    std::optional<FitResult> known_fit;  // supply the observation map directly
    FilterOptions filter;
};

struct LipdfStepReport : FilterStepReport {
    bool lipdf_active = false;
    int fulcrum_count = 0;
    std::optional<double> fit_rms_residual;
    int clamped_count = 0;
    bool ratio_warning = false;
    bool grid_cap_fallback = false;
    int smoother_fallbacks = 0;
    double wall_time_fit = 0.0;  // Li-PDF construction, contained in wall_time_update
};

/// True when the warmup has elapsed and every active dimension's weighted
/// std is below its threshold.
inline bool should_activate(const ParticleEnsemble& ensemble, const LipdfConfig& config, int t) {
    if (t <= config.activation.warmup_steps) return false;
    const auto& thr = config.activation.spread_threshold;
    if (thr.empty()) return true;
    const int dims = ensemble.dim();
    for (int l = 0; l < dims; ++l) {
        if (!config.grid.dim_active(l, dims)) continue;
        const double limit = thr.size() == 1 ? thr[0] : thr[static_cast<std::size_t>(l)];
        if (!(weighted_std(ensemble, l) < limit)) return false;
    }
    return true;
}

struct ExplicitLipdfResult {
    FitResult fit;
    GaussianComposedLikelihood likelihood;
};

/// Fits the observation map over fulcrum (state, predicted observation)
/// pairs and composes it with the Gaussian noise model.
inline ExplicitLipdfResult construct_explicit_lipdf(const std::vector<double>& fulcrum_x,
                                                    const std::vector<double>& fulcrum_obs,
                                                    double y_obs, const BasisSpec& basis,
                                                    double sigma) {
    FitResult fit = least_squares_fit(fulcrum_x, fulcrum_obs, basis);
    GaussianComposedLikelihood like = compose_gaussian_likelihood(fit, y_obs, sigma);
    return {std::move(fit), std::move(like)};
}

/// Per-query Nadaraya-Watson view over an evaluated grid.
class ImplicitLipdf {
public:
    ImplicitLipdf(const FulcrumGrid& grid, SmootherConfig config)
        : grid_(&grid), config_(config) {
        config_.bandwidth = effective_bandwidth(grid, config);
    }

    double operator()(const StateVector& x) const {
        std::vector<FulcrumNeighbor> neighbors;
        if (config_.kernel == KernelKind::NearestNeighbor) {
            neighbors = nearest_fulcrums(*grid_, x, config_.neighbor_count);
        } else {
            auto ball = fulcrums_within(*grid_, x, config_.bandwidth);
            if (ball.empty_fallback) ++flags_.empty_radius_fallbacks;
            neighbors = std::move(ball.neighbors);
        }
        return nw_estimate(neighbors, config_, &flags_);
    }

    const SmootherFlags& flags() const { return flags_; }

private:
    const FulcrumGrid* grid_;
    SmootherConfig config_;
    mutable SmootherFlags flags_;
};

inline ImplicitLipdf construct_implicit_lipdf(const FulcrumGrid& grid, const SmootherConfig& config) {
    if (!grid.evaluated())
        throw std::logic_error("construct_implicit_lipdf: grid likelihoods are not set");
    return ImplicitLipdf(grid, config);
}

/// Particle filter whose weight update infers likelihoods from a fitted
/// Li-PDF over fulcrums instead of evaluating the model per particle.
/// Resampling and prediction are shared bit-for-bit with sir_step, so a
/// step with activation off reproduces SIR exactly under the same seed.
class LipdfFilter {
public:
    explicit LipdfFilter(LipdfConfig config) : cfg_(std::move(config)) {
        if (cfg_.known_fit && cfg_.variant == LipdfVariant::Batch) batch_fit_ = cfg_.known_fit;
    }

    const LipdfConfig& config() const { return cfg_; }
    const std::optional<FitResult>& cached_batch_fit() const { return batch_fit_; }

    template <StateSpaceModel M>
    LipdfStepReport step(ParticleEnsemble& ensemble, const M& model, const Observation& y, int t,
                         const RngStream& run_rng) {
        if (t < 1) throw std::invalid_argument("lipdf_step: time index must be >= 1");
        const detail::Stopwatch total;
        LipdfStepReport report;
        const RngStream step_rng = run_rng.child(static_cast<std::uint64_t>(t));

        {
            const detail::Stopwatch sw;
            report.resampled = detail::selective_resample(ensemble, cfg_.filter, step_rng);
            report.wall_time_resample = sw.seconds();
        }
        {
            const detail::Stopwatch sw;
            detail::propagate(ensemble, model, t, step_rng);
            report.wall_time_predict = sw.seconds();
        }

        bool direct = true;
        if (cfg_.variant == LipdfVariant::Batch) {
            direct = !batch_update(ensemble, model, y, t, step_rng, report);
        } else if (should_activate(ensemble, cfg_, t)) {
            direct = !fitted_update(ensemble, model, y, step_rng, report);
        }
        if (direct) {
            const detail::Stopwatch sw;
            detail::direct_weight_update(ensemble, model, y, report);
            report.wall_time_update = sw.seconds();
        }

        report.degeneracy_flag = normalize_weights(ensemble);
        report.estimate = weighted_mean_estimate(ensemble);
        report.ess = effective_sample_size(ensemble.weights);
        report.wall_time_total = total.seconds();
        return report;
    }

private:
    /// Scalar observation the fit consumes for one fulcrum.
    template <StateSpaceModel M>
    double score_fulcrum(const M& model, const StateVector& x, RngStream& rng) const {
        if constexpr (HasNoiselessObservation<M>) {
            if (cfg_.scoring == FulcrumScoring::Simulated)
                return model.simulate_observation(x, rng)[0];
            return model.observe_noiseless(x)[0];
        } else {
            if (cfg_.scoring == FulcrumScoring::Noiseless)
                throw std::logic_error("lipdf: model exposes no noiseless observation map");
            return model.simulate_observation(x, rng)[0];
        }
    }

    int explicit_dim(const FulcrumGrid& grid) const {
        if (grid.active_dims.size() != 1)
            throw std::logic_error("lipdf: the explicit variant fits one active dimension, got " +
                                   std::to_string(grid.active_dims.size()));
        return grid.active_dims.front();
    }

    void weight_by(ParticleEnsemble& ensemble, const std::vector<double>& likelihoods,
                   LipdfStepReport& report) const {
        for (std::size_t i = 0; i < ensemble.size(); ++i) {
            double like = likelihoods[i];
            if (like < 0.0) {
                like = 0.0;
                ++report.clamped_count;
            }
            ensemble.weights[i] *= like;
        }
    }

    template <StateSpaceModel M>
    bool fitted_update(ParticleEnsemble& ensemble, const M& model, const Observation& y,
                       const RngStream& step_rng, LipdfStepReport& report) {
        const detail::Stopwatch update_sw;
        FulcrumGrid grid;
        try {
            grid = build_grid(ensemble, cfg_.grid);
        } catch (const GridCapExceeded&) {
            report.grid_cap_fallback = true;
            return false;
        }
        report.lipdf_active = true;
        report.fulcrum_count = static_cast<int>(grid.size());

        std::vector<double> inferred(ensemble.size());
        if (cfg_.variant == LipdfVariant::Explicit) {
            if (y.size() != 1)
                throw std::logic_error("lipdf: the explicit variant requires a scalar observation");
            const int dim = explicit_dim(grid);
            const detail::Stopwatch fit_sw;
            std::vector<double> xs(grid.size()), obs(grid.size());
            const RngStream score_rng = step_rng.child(detail::kFulcrumPhase);
            for (std::size_t m = 0; m < grid.size(); ++m) {
                RngStream mrng = score_rng.child(m);
                xs[m] = grid.points[m][dim];
                obs[m] = score_fulcrum(model, grid.points[m], mrng);
                ++report.model_likelihood_calls;
            }
            auto lipdf = construct_explicit_lipdf(xs, obs, y[0], cfg_.basis, cfg_.sigma);
            report.fit_rms_residual = lipdf.fit.rms_residual;
            report.wall_time_fit = fit_sw.seconds();
            for (std::size_t i = 0; i < ensemble.size(); ++i)
                inferred[i] = lipdf.likelihood(ensemble.particles[i][dim]);
        } else {
            const detail::Stopwatch fit_sw;
            evaluate_fulcrums(grid, model, y);
            report.model_likelihood_calls += static_cast<long>(grid.size());
            report.wall_time_fit = fit_sw.seconds();
            const SmoothResult smoothed = smooth_ensemble(ensemble, grid, cfg_.smoother);
            inferred = smoothed.likelihoods;
            report.smoother_fallbacks = smoothed.flags.zero_weight_fallbacks +
                                        smoothed.flags.empty_radius_fallbacks;
            report.clamped_count += smoothed.flags.clamped;
        }

        weight_by(ensemble, inferred, report);
        const double ratio = static_cast<double>(grid.size()) / static_cast<double>(ensemble.size());
        report.ratio_warning = ratio < cfg_.ratio_warning_low || ratio > cfg_.ratio_warning_high;
        report.wall_time_update = update_sw.seconds();
        return true;
    }

    template <StateSpaceModel M>
    bool batch_update(ParticleEnsemble& ensemble, const M& model, const Observation& y, int t,
                      const RngStream& step_rng, LipdfStepReport& report) {
        if (!batch_fit_) {
            if (t < cfg_.batch_fit_step) return false;
            const detail::Stopwatch fit_sw;
            GridSpec spec = cfg_.grid;
            spec.count_override.assign(static_cast<std::size_t>(ensemble.dim()), 0);
            for (int l = 0; l < ensemble.dim(); ++l)
                if (spec.dim_active(l, ensemble.dim()))
                    spec.count_override[static_cast<std::size_t>(l)] = cfg_.batch_sample_count;
            FulcrumGrid grid = build_grid(ensemble, spec);
            const int dim = explicit_dim(grid);
            batch_dim_ = dim;
            std::vector<double> xs(grid.size()), obs(grid.size());
            const RngStream score_rng = step_rng.child(detail::kFulcrumPhase);
            for (std::size_t m = 0; m < grid.size(); ++m) {
                RngStream mrng = score_rng.child(m);
                xs[m] = grid.points[m][dim];
                obs[m] = score_fulcrum(model, grid.points[m], mrng);
                ++report.model_likelihood_calls;
            }
            batch_fit_ = least_squares_fit(xs, obs, cfg_.basis);
            report.fulcrum_count = static_cast<int>(grid.size());
            report.wall_time_fit = fit_sw.seconds();
        }
        if (y.size() != 1)
            throw std::logic_error("lipdf: the batch variant requires a scalar observation");

        const detail::Stopwatch update_sw;
        report.lipdf_active = true;
        report.fit_rms_residual = batch_fit_->rms_residual;
        const auto like = compose_gaussian_likelihood(*batch_fit_, y[0], cfg_.sigma);
        std::vector<double> inferred(ensemble.size());
        for (std::size_t i = 0; i < ensemble.size(); ++i)
            inferred[i] = like(ensemble.particles[i][batch_dim_]);
        weight_by(ensemble, inferred, report);
        report.wall_time_update = update_sw.seconds() + report.wall_time_fit;
        return true;
    }

    LipdfConfig cfg_;
    std::optional<FitResult> batch_fit_;
};

}  // namespace lipdf
