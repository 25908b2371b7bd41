#pragma once

#include <span>

#include <Eigen/Core>

#include "meterguard/lstm_predictor.hpp"

namespace meterguard::baselines {

/// Window samples flattened for non-sequential regressors: row k concatenates
/// the W encoded daily vectors of window k (26 * W columns, oldest day first);
/// y holds the standardized next-day E.
struct FlatDesign {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

FlatDesign flatten_windows(std::span<const FeatureVector> features, std::span<const WindowSample> windows,
                           const FeatureScaler& scaler);

}  // namespace meterguard::baselines
