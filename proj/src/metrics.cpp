#include "vfss/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>

#include "vfss/error.hpp"
#include "vfss/io.hpp"

namespace vfss {

Box to_box(const PixelBox& b) {
  return {static_cast<double>(b.x_min), static_cast<double>(b.y_min), static_cast<double>(b.x_max) + 1.0,
          static_cast<double>(b.y_max) + 1.0};
}

Counts count_frames(const PhaseSequence& pred, const PhaseSequence& gt) {
  if (pred.size() != gt.size())
    throw DataError("f1: prediction has " + std::to_string(pred.size()) + " frames, ground truth " +
                    std::to_string(gt.size()));
  Counts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] == Phase::P, g = gt[i] == Phase::P;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
  }
  return c;
}

double f1_from_counts(const Counts& c) {
  // 2PR/(P+R) simplifies to 2TP/(2TP+FP+FN); zero when TP is zero.
  if (c.tp == 0) return 0.0;
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
}

double f1_frames(const PhaseSequence& pred, const PhaseSequence& gt) { return f1_from_counts(count_frames(pred, gt)); }

double p3(std::span<const std::optional<int>> pred, std::span<const int> gt, int tol) {
  if (pred.size() != gt.size()) throw DataError("p3: misaligned lists");
  if (gt.empty()) throw DataError("p3: empty lists");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gt.size(); ++i)
    if (pred[i] && std::abs(*pred[i] - gt[i]) <= tol) ++hits;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(gt.size());
}

double pearson_r(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("pearson_r: misaligned series");
  if (a.size() < 2) throw DataError("pearson_r: need at least two samples");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw DataError("pearson_r: correlation undefined for a constant series");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double rmse_norm(std::span<const Point2> pred, std::span<const Point2> gt, double d) {
  if (pred.size() != gt.size()) throw DataError("rmse: misaligned point lists");
  if (pred.empty()) throw DataError("rmse: no points");
  if (!(d > 0.0)) throw DataError("rmse: normalization distance must be positive");
  double sum = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double dx = pred[i].x - gt[i].x, dy = pred[i].y - gt[i].y;
    sum += dx * dx + dy * dy;
  }
  return std::sqrt(sum / static_cast<double>(pred.size())) / d;
}

double iou(const Box& a, const Box& b) {
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  const double inter = (w > 0 && h > 0) ? w * h : 0.0;
  // Sum the areas in a fixed order so iou(a, b) == iou(b, a) bit for bit.
  const double sa = a.area(), sb = b.area();
  const double uni = (std::min(sa, sb) + std::max(sa, sb)) - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

std::vector<double> default_iou_thresholds(double lo, double hi, double step) {
  if (!(step > 0) || hi < lo) throw DataError("invalid IoU threshold range");
  std::vector<double> out;
  const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
  // Built from integer multiples so 0.25 + 10 * 0.05 lands on 0.75 exactly
  // after rounding to 1e-12.
  for (int i = 0; i <= n; ++i) out.push_back(std::round((lo + i * step) * 1e12) / 1e12);
  return out;
}

std::vector<SweepPoint> bbox_f1_sweep(std::span<const std::optional<Box>> pred, std::span<const Box> gt,
                                      std::span<const double> thresholds) {
  if (pred.size() != gt.size()) throw DataError("bbox sweep: misaligned lists");
  std::vector<double> ious(pred.size(), -1.0);
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i]) ious[i] = iou(*pred[i], gt[i]);
  std::vector<SweepPoint> out;
  for (double thr : thresholds) {
    if (!(thr > 0.0 && thr < 1.0)) throw DataError("bbox sweep: thresholds must lie in (0, 1)");
    SweepPoint pt;
    pt.threshold = thr;
    for (double v : ious) {
      if (v < 0) ++pt.counts.fn;
      else if (v >= thr) ++pt.counts.tp;
      else {
        ++pt.counts.fp;
        ++pt.counts.fn;
      }
    }
    const auto& c = pt.counts;
    pt.precision = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    pt.recall = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    pt.f1 = pt.precision + pt.recall > 0 ? 2 * pt.precision * pt.recall / (pt.precision + pt.recall) : 0.0;
    out.push_back(pt);
  }
  return out;
}

std::vector<double> mid_ranks(std::span<const double> row) {
  std::vector<std::size_t> order(row.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return row[a] < row[b]; });
  std::vector<double> ranks(row.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && row[order[j + 1]] == row[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

FriedmanResult friedman(const std::vector<std::vector<double>>& matrix) {
  const std::size_t n = matrix.size();
  if (n < 2) throw DataError("friedman: need at least two blocks");
  const std::size_t k = matrix.front().size();
  if (k < 2) throw DataError("friedman: need at least two treatments");
  std::vector<double> rank_sums(k, 0.0);
  double tie_sum = 0.0;
  for (const auto& row : matrix) {
    if (row.size() != k) throw DataError("friedman: ragged matrix");
    const auto r = mid_ranks(row);
    for (std::size_t j = 0; j < k; ++j) rank_sums[j] += r[j];
    // Tie groups show up as repeated mid-ranks.
    std::vector<double> sorted = r;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < k;) {
      std::size_t j = i;
      while (j + 1 < k && sorted[j + 1] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      tie_sum += t * t * t - t;
      i = j + 1;
    }
  }
  const double dn = static_cast<double>(n), dk = static_cast<double>(k);
  FriedmanResult res;
  res.df = static_cast<int>(k) - 1;
  res.n_blocks = static_cast<int>(n);
  for (double s : rank_sums) res.mean_ranks.push_back(s / dn);
  double ss = 0;
  for (double s : rank_sums) ss += s * s;
  const double raw = 12.0 / (dn * dk * (dk + 1.0)) * ss - 3.0 * dn * (dk + 1.0);
  const double correction = 1.0 - tie_sum / (dn * (dk * dk * dk - dk));
  if (correction <= 1e-12) {
    res.chi2 = 0.0;
    res.p_value = 1.0;
    return res;
  }
  res.chi2 = std::max(0.0, raw / correction);
  res.p_value = res.chi2 > 0 ? boost::math::gamma_q(res.df / 2.0, res.chi2 / 2.0) : 1.0;
  return res;
}

double studentized_range_cdf(double q, int k) {
  if (k < 2) throw DataError("studentized range: k must be at least 2");
  if (q <= 0) return 0.0;
  const boost::math::normal_distribution<double> nd;
  auto integrand = [&](double z) {
    const double inner = boost::math::cdf(nd, z) - boost::math::cdf(nd, z - q);
    return boost::math::pdf(nd, z) * std::pow(std::max(0.0, inner), k - 1);
  };
  const double v =
      k * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, -12.0, 12.0 + q, 10, 1e-13);
  return std::clamp(v, 0.0, 1.0);
}

double studentized_range_quantile(double alpha, int k) {
  if (!(alpha > 0 && alpha < 1)) throw DataError("studentized range: alpha must lie in (0, 1)");
  const double target = 1.0 - alpha;
  auto f = [&](double q) { return studentized_range_cdf(q, k) - target; };
  double hi = 1.0;
  while (f(hi) < 0) hi *= 2.0;
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(f, 0.0, hi, f(0.0), f(hi),
                                                   boost::math::tools::eps_tolerance<double>(50), iters);
  return (r.first + r.second) / 2.0;
}

double posthoc_critical_difference(int k, int n, double alpha) {
  if (n < 1) throw DataError("post-hoc: no blocks");
  return studentized_range_quantile(alpha, k) * std::sqrt(k * (k + 1.0) / (12.0 * n));
}

FriedmanResult posthoc_mean_ranks(FriedmanResult result, double alpha) {
  if (!(result.p_value < alpha))
    throw DataError("post-hoc comparison requires a significant Friedman test (p = " +
                    io::format_fixed(result.p_value, 4) + ")");
  const int k = static_cast<int>(result.mean_ranks.size());
  const double cd = posthoc_critical_difference(k, result.n_blocks, alpha);
  result.significant.assign(k, std::vector<bool>(k, false));
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      result.significant[i][j] = i != j && std::abs(result.mean_ranks[i] - result.mean_ranks[j]) > cd;
  return result;
}

Agreement interrater_agreement(std::span<const int> rater_a, std::span<const int> rater_b, int tol) {
  if (rater_a.size() != rater_b.size()) throw DataError("inter-rater: misaligned lists");
  std::vector<double> a(rater_a.begin(), rater_a.end()), b(rater_b.begin(), rater_b.end());
  std::vector<std::optional<int>> pa(rater_a.begin(), rater_a.end());
  return {pearson_r(a, b), p3(pa, rater_b, tol)};
}

std::string format_agreement(const Agreement& a) {
  return "r = " + io::format_fixed(a.r, 3) + "  P3 = " + io::format_fixed(a.p3, 2) + "%";
}

std::string format_friedman(const FriedmanResult& f) {
  std::string s = "X2(" + std::to_string(f.df) + ")=" + io::format_fixed(f.chi2, 2) + ", ";
  if (f.p_value < 0.001) return s + "p<.001";
  return s + "p=" + io::format_fixed(f.p_value, 3);
}

std::string format_median_iqr(double median, double q1, double q3) {
  return io::format_fixed(median, 3) + " (" + io::format_fixed(q1, 3) + "-" + io::format_fixed(q3, 3) + ")";
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("quantile of an empty list");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace vfss
