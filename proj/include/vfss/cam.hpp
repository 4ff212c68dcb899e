#pragma once

#include "vfss/classifier.hpp"
#include "vfss/image.hpp"

namespace vfss {

/// Single-channel class activation map with values in [0, 1].
struct ActivationMap {
  ImageF values;
  int source_rows = 0;
  int source_cols = 0;
  Phase target_class = Phase::P;
  /// Maximum of the ReLU'd weighted channel sum before normalization.
  double max_raw_value = 0.0;
  /// sum(max(s, 0)) / sum(|s|) over the weighted channel sum s before the
  /// ReLU; 0 when s is identically zero.
  double positive_fraction = 0.0;
};

/// Per-channel Grad-CAM weights: spatial mean of the gradient maps.
std::vector<double> grad_cam_channel_weights(const FeatureGradients& fg);

/// Grad-CAM from feature maps and gradients: channel weights, weighted
/// channel average, ReLU, min-max normalization. A map with no positive value
/// is returned as all zeros; a constant positive map as all ones.
ActivationMap grad_cam(const FeatureGradients& fg);

/// Runs the classifier and computes the map for the top predicted class.
ActivationMap grad_cam(const PhaseClassifier& model, const ImageF& net_input);

/// Bilinear upsampling (half-pixel centers) to side x side, clamped to [0, 1].
ActivationMap upsample_map(const ActivationMap& map, int side = 341);

}  // namespace vfss
