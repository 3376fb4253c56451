#pragma once

#include <Eigen/Cholesky>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

#include "lipdf/ensemble.hpp"
#include "lipdf/model.hpp"
#include "lipdf/resampling.hpp"
#include "lipdf/rng.hpp"

namespace lipdf {

struct FilterOptions {
    double resample_threshold = 0.5;  // resample when ESS/N drops below this
    ResampleMethod resample_method = ResampleMethod::Systematic;
};

/// Per-step filter diagnostics. `wall_time_update` covers only the
/// weight-updating loop, the quantity the fitted-likelihood path reduces.
struct FilterStepReport {
    StateVector estimate;
    double ess = 0.0;
    bool resampled = false;
    double wall_time_update = 0.0;  // seconds
    double wall_time_predict = 0.0;
    double wall_time_resample = 0.0;
    double wall_time_total = 0.0;
    bool degeneracy_flag = false;
    bool covariance_jitter = false;
    long model_likelihood_calls = 0;
};

namespace detail {

// Fixed substream ids so every filter sharing a seed draws identically
// through the common phases.
constexpr std::uint64_t kResamplePhase = 1;
constexpr std::uint64_t kPropagatePhase = 2;
constexpr std::uint64_t kRedrawPhase = 3;
constexpr std::uint64_t kFulcrumPhase = 4;

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline bool selective_resample(ParticleEnsemble& ensemble, const FilterOptions& opt,
                               const RngStream& step_rng) {
    const double ess = effective_sample_size(ensemble.weights);
    if (ess / static_cast<double>(ensemble.size()) >= opt.resample_threshold) return false;
    RngStream rng = step_rng.child(kResamplePhase);
    ensemble = resample(ensemble, rng, opt.resample_method);
    return true;
}

template <StateSpaceModel M>
void propagate(ParticleEnsemble& ensemble, const M& model, int t, const RngStream& step_rng) {
    const RngStream phase = step_rng.child(kPropagatePhase);
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
        RngStream prng = phase.child(i);
        ensemble.particles[i] = model.sample_transition(ensemble.particles[i], t, prng);
    }
}

template <StateSpaceModel M>
void direct_weight_update(ParticleEnsemble& ensemble, const M& model, const Observation& y,
                          FilterStepReport& report) {
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
        const double like = model.likelihood(ensemble.particles[i], y);
        ++report.model_likelihood_calls;
        if (std::isnan(like) || like < 0.0)
            throw std::runtime_error("weight update: model likelihood for particle " +
                                     std::to_string(i) + " is NaN or negative");
        ensemble.weights[i] *= like;
    }
}

}  // namespace detail

/// One bootstrap SIR iteration: selective resample on the incoming weights,
/// propagate through the transition prior, weight by the model likelihood,
/// normalize.
template <StateSpaceModel M>
FilterStepReport sir_step(ParticleEnsemble& ensemble, const M& model, const Observation& y, int t,
                          const RngStream& run_rng, const FilterOptions& opt = {}) {
    if (t < 1) throw std::invalid_argument("sir_step: time index must be >= 1");
    const detail::Stopwatch total;
    FilterStepReport report;
    const RngStream step_rng = run_rng.child(static_cast<std::uint64_t>(t));

    {
        const detail::Stopwatch sw;
        report.resampled = detail::selective_resample(ensemble, opt, step_rng);
        report.wall_time_resample = sw.seconds();
    }
    {
        const detail::Stopwatch sw;
        detail::propagate(ensemble, model, t, step_rng);
        report.wall_time_predict = sw.seconds();
    }
    {
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

/// One Gaussian particle filter iteration: propagate, weight, normalize,
/// then moment-match a Gaussian to the weighted cloud and redraw N
/// equally-weighted particles from it. Never resamples.
template <StateSpaceModel M>
FilterStepReport gpf_step(ParticleEnsemble& ensemble, const M& model, const Observation& y, int t,
                          const RngStream& run_rng, const FilterOptions& opt = {}) {
    (void)opt;
    if (t < 1) throw std::invalid_argument("gpf_step: time index must be >= 1");
    const detail::Stopwatch total;
    FilterStepReport report;
    const RngStream step_rng = run_rng.child(static_cast<std::uint64_t>(t));

    {
        const detail::Stopwatch sw;
        detail::propagate(ensemble, model, t, step_rng);
        report.wall_time_predict = sw.seconds();
    }
    {
        const detail::Stopwatch sw;
        detail::direct_weight_update(ensemble, model, y, report);
        report.wall_time_update = sw.seconds();
    }
    report.degeneracy_flag = normalize_weights(ensemble);
    report.estimate = weighted_mean_estimate(ensemble);
    report.ess = effective_sample_size(ensemble.weights);

    const int dim = ensemble.dim();
    Eigen::MatrixXd cov = weighted_covariance(ensemble, report.estimate);
    Eigen::MatrixXd chol;
    if (cov.trace() > 0.0) {
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() != Eigen::Success) {
            cov += (1e-9 * cov.trace() / dim) * Eigen::MatrixXd::Identity(dim, dim);
            report.covariance_jitter = true;
            llt.compute(cov);
        }
        if (llt.info() == Eigen::Success) {
            chol = llt.matrixL();
        } else {
            chol = cov.diagonal().cwiseMax(0.0).cwiseSqrt().asDiagonal();
            report.covariance_jitter = true;
        }
    } else {
        chol = Eigen::MatrixXd::Zero(dim, dim);
        report.covariance_jitter = true;
    }

    const RngStream redraw = step_rng.child(detail::kRedrawPhase);
    const double uniform = 1.0 / static_cast<double>(ensemble.size());
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
        RngStream prng = redraw.child(i);
        StateVector z(dim);
        for (int d = 0; d < dim; ++d) z[d] = prng.gaussian();
        ensemble.particles[i] = report.estimate + chol * z;
        ensemble.weights[i] = uniform;
    }
    report.wall_time_total = total.seconds();
    return report;
}

}  // namespace lipdf
