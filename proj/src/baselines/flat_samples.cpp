#include "meterguard/baselines/flat_samples.hpp"

#include <stdexcept>

namespace meterguard::baselines {

FlatDesign flatten_windows(std::span<const FeatureVector> features, std::span<const WindowSample> windows,
                           const FeatureScaler& scaler) {
  FlatDesign d;
  if (windows.empty()) return d;
  const std::size_t w = windows.front().window;
  d.X.resize(static_cast<Eigen::Index>(windows.size()), static_cast<Eigen::Index>(w * kFeatureDim));
  d.y.resize(static_cast<Eigen::Index>(windows.size()));
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const WindowSample& s = windows[k];
    if (s.window != w) throw std::invalid_argument("flattened windows must share one window size");
    if (s.start + w > features.size()) throw std::out_of_range("window runs past the feature series");
    const auto row = static_cast<Eigen::Index>(k);
    for (std::size_t t = 0; t < w; ++t) {
      const auto enc = scaler.encode(features[s.start + t]);
      for (std::size_t j = 0; j < kFeatureDim; ++j) d.X(row, static_cast<Eigen::Index>(t * kFeatureDim + j)) = enc[j];
    }
    d.y(row) = scaler.error.apply(s.target);
  }
  return d;
}

}  // namespace meterguard::baselines
