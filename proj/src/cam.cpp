#include "vfss/cam.hpp"

#include <algorithm>
#include <cmath>

#include "vfss/error.hpp"
#include "vfss/preprocess.hpp"

namespace vfss {

std::vector<double> grad_cam_channel_weights(const FeatureGradients& fg) {
  const std::size_t plane = std::size_t(fg.rows) * fg.cols;
  if (plane == 0 || fg.channels <= 0 || fg.grads.size() != plane * fg.channels)
    throw DataError("classifier did not provide feature-map gradients");
  std::vector<double> alpha(fg.channels, 0.0);
  for (int c = 0; c < fg.channels; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += fg.grads[c * plane + i];
    alpha[c] = s / double(plane);
  }
  return alpha;
}

ActivationMap grad_cam(const FeatureGradients& fg) {
  const auto alpha = grad_cam_channel_weights(fg);
  const std::size_t plane = std::size_t(fg.rows) * fg.cols;
  if (fg.maps.size() != plane * fg.channels) throw DataError("feature maps do not match the gradient shape");

  std::vector<double> raw(plane, 0.0);
  for (int c = 0; c < fg.channels; ++c)
    for (std::size_t i = 0; i < plane; ++i) raw[i] += alpha[c] * fg.maps[c * plane + i];
  double pos = 0.0, total = 0.0;
  for (double v : raw) {
    pos += std::max(v, 0.0);
    total += std::abs(v);
  }
  for (double& v : raw) v = std::max(v / fg.channels, 0.0);

  const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
  const double lo = *lo_it, hi = *hi_it;

  ActivationMap map;
  map.values = ImageF(fg.rows, fg.cols, 0.0f);
  map.source_rows = fg.rows;
  map.source_cols = fg.cols;
  map.target_class = fg.target;
  map.max_raw_value = hi;
  map.positive_fraction = total > 0.0 ? pos / total : 0.0;
  auto out = map.values.pixels();
  if (hi > 0.0) {
    if (hi > lo) {
      for (std::size_t i = 0; i < plane; ++i) out[i] = static_cast<float>((raw[i] - lo) / (hi - lo));
    } else {
      std::fill(out.begin(), out.end(), 1.0f);
    }
  }
  return map;
}

ActivationMap grad_cam(const PhaseClassifier& model, const ImageF& net_input) {
  return grad_cam(model.feature_gradients(net_input));
}

ActivationMap upsample_map(const ActivationMap& map, int side) {
  ActivationMap out = map;
  out.values = resize_bilinear(map.values, side, side);
  for (float& v : out.values.pixels()) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

}  // namespace vfss
