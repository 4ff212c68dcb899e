#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vfss/data.hpp"
#include "vfss/image.hpp"
#include "vfss/localizer.hpp"

namespace vfss {

/// Continuous axis-aligned box [x_min, x_max] x [y_min, y_max].
struct Box {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;
  double area() const { return (x_max - x_min) * (y_max - y_min); }
};

/// Pixel box covering whole pixels: [x_min, x_max + 1) x [y_min, y_max + 1).
Box to_box(const PixelBox& b);

/// F1 of class P over aligned frame labels; 0 when precision + recall = 0.
double f1_frames(const PhaseSequence& pred, const PhaseSequence& gt);

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0;
};
Counts count_frames(const PhaseSequence& pred, const PhaseSequence& gt);
double f1_from_counts(const Counts& c);

/// Percentage of items whose prediction exists and is within `tol` frames of
/// the ground truth. Absent predictions count as failures.
double p3(std::span<const std::optional<int>> pred, std::span<const int> gt, int tol = 3);

double pearson_r(std::span<const double> a, std::span<const double> b);

/// sqrt(mean squared Euclidean error) / d.
double rmse_norm(std::span<const Point2> pred, std::span<const Point2> gt, double d);

/// Intersection over union; 0 for disjoint boxes or a zero union.
double iou(const Box& a, const Box& b);

struct SweepPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Counts counts;
};

/// Default IoU thresholds: 0.25, 0.30, ..., 0.75.
std::vector<double> default_iou_thresholds(double lo = 0.25, double hi = 0.75, double step = 0.05);

/// Per threshold: TP = IoU >= thr, FP = detection with IoU < thr,
/// FN = no detection or IoU < thr.
std::vector<SweepPoint> bbox_f1_sweep(std::span<const std::optional<Box>> pred, std::span<const Box> gt,
                                      std::span<const double> thresholds);

/// Friedman test over a blocks x treatments matrix (row-major, one row per block).
struct FriedmanResult {
  double chi2 = 0.0;
  int df = 0;
  double p_value = 1.0;
  int n_blocks = 0;
  std::vector<double> mean_ranks;
  /// Filled by posthoc_mean_ranks.
  std::vector<std::vector<bool>> significant;
};

/// Within-block mid-ranks (ties averaged) of one row.
std::vector<double> mid_ranks(std::span<const double> row);

FriedmanResult friedman(const std::vector<std::vector<double>>& matrix);

/// CDF of the studentized range for k means and infinite degrees of freedom.
double studentized_range_cdf(double q, int k);
/// Upper-alpha quantile of the same distribution.
double studentized_range_quantile(double alpha, int k);

/// Rank-based Tukey-Kramer comparison on mean ranks after a significant
/// Friedman test: |R_i - R_j| > q(alpha, k, inf) * sqrt(k (k + 1) / (12 n)).
/// Throws DataError when the omnibus p-value is not below alpha.
FriedmanResult posthoc_mean_ranks(FriedmanResult result, double alpha = 0.05);
double posthoc_critical_difference(int k, int n, double alpha = 0.05);

struct Agreement {
  double r = 0.0;
  double p3 = 0.0;
};
Agreement interrater_agreement(std::span<const int> rater_a, std::span<const int> rater_b, int tol = 3);

/// "r = 0.951  P3 = 89.08%"
std::string format_agreement(const Agreement& a);
/// "X2(4)=583.87, p<.001" (or "p=0.123").
std::string format_friedman(const FriedmanResult& f);
/// "0.189 (0.099-0.320)"
std::string format_median_iqr(double median, double q1, double q3);

/// Linear-interpolated quantile (type 7), q in [0, 1].
double quantile(std::vector<double> values, double q);

}  // namespace vfss
