#pragma once

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "lipdf/types.hpp"

namespace lipdf {

enum class BasisKind { Polynomial, SingleMonomial, Custom };

/// Linear-in-parameters basis phi_1..phi_k. `Polynomial` of degree d is the
/// full set {1, x, ..., x^d} (k = d + 1); `SingleMonomial` of degree d is the
/// single term {x^d} (k = 1).
struct BasisSpec {
    BasisKind kind = BasisKind::Polynomial;
    int degree = 2;
    std::vector<std::function<double(double)>> functions;

    static BasisSpec polynomial(int degree) {
        if (degree < 0) throw std::invalid_argument("BasisSpec: negative degree");
        return {BasisKind::Polynomial, degree, {}};
    }

    static BasisSpec single_monomial(int degree) {
        if (degree < 0) throw std::invalid_argument("BasisSpec: negative degree");
        return {BasisKind::SingleMonomial, degree, {}};
    }

    static BasisSpec custom(std::vector<std::function<double(double)>> fns) {
        if (fns.empty()) throw std::invalid_argument("BasisSpec: empty function list");
        return {BasisKind::Custom, 0, std::move(fns)};
    }

    /// Number of coefficients k.
    int size() const {
        switch (kind) {
            case BasisKind::Polynomial: return degree + 1;
            case BasisKind::SingleMonomial: return 1;
            case BasisKind::Custom: return static_cast<int>(functions.size());
        }
        return 0;
    }

    double basis_value(int i, double x) const {
        switch (kind) {
            case BasisKind::Polynomial: return std::pow(x, i);
            case BasisKind::SingleMonomial: return std::pow(x, degree);
            case BasisKind::Custom: return functions[static_cast<std::size_t>(i)](x);
        }
        return 0.0;
    }

    std::string name() const {
        switch (kind) {
            case BasisKind::Polynomial: return "poly" + std::to_string(degree);
            case BasisKind::SingleMonomial: return "mono" + std::to_string(degree);
            case BasisKind::Custom: return "custom" + std::to_string(functions.size());
        }
        return "?";
    }
};

/// A fitted function: basis, coefficients, residual diagnostics and the
/// x-interval the data spanned.
struct FitResult {
    BasisSpec basis;
    Eigen::VectorXd coefficients;
    double residual_norm = 0.0;  // 2-norm of residuals at the fitted points
    double rms_residual = 0.0;
    double domain_min = 0.0;
    double domain_max = 0.0;
    bool sample_warning = false;  // fewer than 3k data points

    double evaluate(double x) const {
        double v = 0.0;
        for (int i = 0; i < coefficients.size(); ++i)
            v += coefficients[i] * basis.basis_value(i, x);
        return v;
    }

    bool in_domain(double x) const { return x >= domain_min && x <= domain_max; }
};

struct FitEval {
    double value = 0.0;
    bool extrapolated = false;
};

/// Evaluates the fitted function; flags queries outside the fitted interval.
inline FitEval evaluate_fit(const FitResult& fit, double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("evaluate_fit: non-finite x");
    return {fit.evaluate(x), !fit.in_domain(x)};
}

/// Least-squares fit of y against the basis, solved by column-pivoted
/// Householder QR. Requires at least k + 1 points; `sample_warning` is set
/// when fewer than 3k points are supplied.
inline FitResult least_squares_fit(const std::vector<double>& x, const std::vector<double>& y,
                                   const BasisSpec& basis) {
    const int k = basis.size();
    const auto m = x.size();
    if (y.size() != m) throw std::invalid_argument("least_squares_fit: x/y size mismatch");
    if (static_cast<int>(m) < k + 1)
        throw std::invalid_argument("least_squares_fit: " + std::to_string(m) +
                                    " points cannot determine " + std::to_string(k) +
                                    " coefficients (need at least k + 1)");
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    if (*lo == *hi)
        throw std::invalid_argument("least_squares_fit: all x values identical");

    Eigen::MatrixXd design(m, k);
    Eigen::VectorXd rhs(m);
    for (std::size_t r = 0; r < m; ++r) {
        for (int c = 0; c < k; ++c) design(static_cast<Eigen::Index>(r), c) = basis.basis_value(c, x[r]);
        rhs[static_cast<Eigen::Index>(r)] = y[r];
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < k) {
        const auto& perm = qr.colsPermutation().indices();
        std::string cols;
        for (int i = qr.rank(); i < k; ++i) {
            if (!cols.empty()) cols += ", ";
            cols += std::to_string(perm[i]);
        }
        throw std::invalid_argument("least_squares_fit: rank-deficient design, dependent basis column(s) " +
                                    cols);
    }

    FitResult fit;
    fit.basis = basis;
    fit.coefficients = qr.solve(rhs);
    const Eigen::VectorXd residuals = rhs - design * fit.coefficients;
    fit.residual_norm = residuals.norm();
    fit.rms_residual = residuals.norm() / std::sqrt(static_cast<double>(m));
    fit.domain_min = *lo;
    fit.domain_max = *hi;
    fit.sample_warning = static_cast<int>(m) < 3 * k;
    return fit;
}

/// Contiguous sequence of per-interval fits joined at ascending join points.
struct PiecewiseFit {
    std::vector<double> join_points;  // r + 1 ascending values
    std::vector<FitResult> segments;  // r fits

    double domain_min() const { return join_points.front(); }
    double domain_max() const { return join_points.back(); }

    /// Segment owning x: interval i covers [join_i, join_{i+1}), the last
    /// interval is closed on the right. Out-of-domain queries clamp to the
    /// nearest end segment.
    std::size_t segment_index(double x) const {
        if (x <= join_points.front()) return 0;
        if (x >= join_points.back()) return segments.size() - 1;
        const auto it = std::upper_bound(join_points.begin(), join_points.end(), x);
        return static_cast<std::size_t>(it - join_points.begin()) - 1;
    }

    FitEval evaluate(double x) const {
        const auto& seg = segments[segment_index(x)];
        return {seg.evaluate(x), x < domain_min() || x > domain_max()};
    }
};

/// Fits one segment per join interval; join points contribute to both
/// adjacent segments. Every interval must hold at least k + 2 points.
inline PiecewiseFit piecewise_fit(const std::vector<double>& x, const std::vector<double>& y,
                                  const BasisSpec& basis, const std::vector<double>& join_points) {
    if (join_points.size() < 2)
        throw std::invalid_argument("piecewise_fit: need at least two join points");
    if (!std::is_sorted(join_points.begin(), join_points.end()))
        throw std::invalid_argument("piecewise_fit: join points must be ascending");
    if (x.size() != y.size()) throw std::invalid_argument("piecewise_fit: x/y size mismatch");
    for (double xi : x)
        if (xi < join_points.front() || xi > join_points.back())
            throw std::invalid_argument("piecewise_fit: data point outside the join range");

    PiecewiseFit result;
    result.join_points = join_points;
    const int k = basis.size();
    for (std::size_t i = 0; i + 1 < join_points.size(); ++i) {
        const double lo = join_points[i], hi = join_points[i + 1];
        std::vector<double> sx, sy;
        for (std::size_t p = 0; p < x.size(); ++p) {
            if (x[p] >= lo && x[p] <= hi) {
                sx.push_back(x[p]);
                sy.push_back(y[p]);
            }
        }
        if (static_cast<int>(sx.size()) < k + 2)
            throw std::invalid_argument("piecewise_fit: interval " + std::to_string(i) + " [" +
                                        std::to_string(lo) + ", " + std::to_string(hi) + "] holds " +
                                        std::to_string(sx.size()) + " points, needs at least " +
                                        std::to_string(k + 2));
        result.segments.push_back(least_squares_fit(sx, sy, basis));
    }
    return result;
}

/// Equal-width join points spanning [lo, hi].
inline std::vector<double> equal_width_joins(double lo, double hi, int intervals) {
    if (intervals < 1) throw std::invalid_argument("equal_width_joins: intervals must be >= 1");
    std::vector<double> joins(static_cast<std::size_t>(intervals) + 1);
    for (int i = 0; i <= intervals; ++i)
        joins[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / static_cast<double>(intervals);
    return joins;
}

/// Likelihood from a fitted observation map under additive Gaussian noise:
/// L(x) = N(y_obs; g_hat(x), sigma^2).
struct GaussianComposedLikelihood {
    FitResult observation_fit;
    double y_obs = 0.0;
    double sigma = 1.0;

    double operator()(double x) const {
        const double r = y_obs - observation_fit.evaluate(x);
        return std::exp(-0.5 * r * r / (sigma * sigma)) /
               (std::sqrt(2.0 * std::numbers::pi) * sigma);
    }
};

inline GaussianComposedLikelihood compose_gaussian_likelihood(FitResult obs_fit, double y_obs,
                                                              double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("compose_gaussian_likelihood: sigma must be positive");
    return {std::move(obs_fit), y_obs, sigma};
}

/// Elementwise natural log with a 1e-300 floor, so Gaussian-shaped
/// likelihood data becomes linear in its parameters.
inline std::vector<double> log_linearize(const std::vector<double>& likelihoods) {
    std::vector<double> out(likelihoods.size());
    for (std::size_t i = 0; i < likelihoods.size(); ++i)
        out[i] = std::log(std::max(likelihoods[i], 1e-300));
    return out;
}

/// Taylor truncation bound B * h^(n+1) / (n+1)! for a degree-n fit over a
/// half-width-h interval.
inline double lagrange_remainder_bound(double deriv_bound, double halfwidth, int order) {
    if (deriv_bound < 0.0 || halfwidth < 0.0 || order < 0)
        throw std::invalid_argument("lagrange_remainder_bound: arguments must be nonnegative");
    double factorial = 1.0;
    for (int i = 2; i <= order + 1; ++i) factorial *= i;
    return deriv_bound * std::pow(halfwidth, order + 1) / factorial;
}

struct FitDiagnostics {
    double rms_residual = 0.0;
    double max_abs_residual = 0.0;
    double r_squared = 0.0;
    bool r_squared_defined = true;
};

/// Residual statistics of a fit against data; r^2 is flagged undefined when
/// the data has zero variance but nonzero residuals.
inline FitDiagnostics fit_diagnostics(const FitResult& fit, const std::vector<double>& x,
                                      const std::vector<double>& y) {
    if (x.empty() || x.size() != y.size())
        throw std::invalid_argument("fit_diagnostics: empty or mismatched data");
    double ss_res = 0.0, max_abs = 0.0, mean = 0.0;
    for (double yi : y) mean += yi;
    mean /= static_cast<double>(y.size());
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - fit.evaluate(x[i]);
        ss_res += r * r;
        max_abs = std::max(max_abs, std::abs(r));
        ss_tot += (y[i] - mean) * (y[i] - mean);
    }
    FitDiagnostics d;
    d.rms_residual = std::sqrt(ss_res / static_cast<double>(x.size()));
    d.max_abs_residual = max_abs;
    if (ss_tot > 0.0) {
        d.r_squared = 1.0 - ss_res / ss_tot;
    } else if (ss_res == 0.0) {
        d.r_squared = 1.0;
    } else {
        d.r_squared = std::numeric_limits<double>::quiet_NaN();
        d.r_squared_defined = false;
    }
    return d;
}

}  // namespace lipdf
