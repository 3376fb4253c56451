#pragma once

#include <Eigen/Dense>

namespace lipdf {

/// State of the dynamic system; fixed dimension within one model.
using StateVector = Eigen::VectorXd;

/// Sensor reading paired with a state through the observation equation.
using Observation = Eigen::VectorXd;

inline bool all_finite(const Eigen::VectorXd& v) {
    return v.allFinite();
}

}  // namespace lipdf
