#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "support.hpp"
#include "vfss/error.hpp"
#include "vfss/metrics.hpp"

using namespace vfss;
using vfss::test::Gen;

namespace {

// --- independent oracles ----------------------------------------------------

double oracle_f1(const PhaseSequence& pred, const PhaseSequence& gt) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (pred[i] == Phase::P && gt[i] == Phase::P) ++tp;
    if (pred[i] == Phase::P && gt[i] == Phase::N) ++fp;
    if (pred[i] == Phase::N && gt[i] == Phase::P) ++fn;
  }
  if (tp == 0) return 0.0;
  const double precision = tp / (tp + fp), recall = tp / (tp + fn);
  return 2 * precision * recall / (precision + recall);
}

// Friedman statistic from the textbook sum-of-squared-rank-sums form, with the
// usual tie correction 1 - sum(t^3 - t) / (n k (k^2 - 1)).
double oracle_friedman_chi2(const std::vector<std::vector<double>>& m) {
  const double n = static_cast<double>(m.size()), k = static_cast<double>(m[0].size());
  std::vector<double> rank_sums(m[0].size(), 0.0);
  double ties = 0.0;
  for (const auto& row : m) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      double less = 0, equal = 0;
      for (double v : row) {
        less += v < row[j];
        equal += v == row[j];
      }
      rank_sums[j] += less + (equal + 1) / 2.0;
    }
    std::vector<double> sorted = row;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i;
      while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i);
      ties += t * t * t - t;
      i = j;
    }
  }
  double ss = 0.0;
  for (double r : rank_sums) ss += r * r;
  const double chi2 = 12.0 / (n * k * (k + 1)) * ss - 3.0 * n * (k + 1);
  const double corr = 1.0 - ties / (n * k * (k * k - 1));
  return corr > 0 ? chi2 / corr : 0.0;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

// --- frame F1 ---------------------------------------------------------------

TEST(F1Frames, PerfectPredictionIsOne) {
  const auto gt = parse_phases("NNPPPPNN");
  EXPECT_DOUBLE_EQ(f1_frames(gt, gt), 1.0);
}

TEST(F1Frames, AllNegativePredictionIsZero) {
  EXPECT_DOUBLE_EQ(f1_frames(parse_phases("NNNNNNNN"), parse_phases("NNPPPPNN")), 0.0);
}

TEST(F1Frames, HandCountedExample) {
  const auto gt = parse_phases("NNPPPPNN"), pred = parse_phases("NPPPNNNN");
  const Counts c = count_frames(pred, gt);
  EXPECT_EQ(c.tp, 2u);
  EXPECT_EQ(c.fp, 1u);
  EXPECT_EQ(c.fn, 2u);
  EXPECT_NEAR(f1_frames(pred, gt), 4.0 / 7.0, 1e-12);
}

TEST(F1Frames, MisalignedThrows) {
  EXPECT_THROW(f1_frames(parse_phases("NP"), parse_phases("NPP")), DataError);
}

TEST(F1Frames, PropertyMatchesOracleAndIgnoresAddedTrueNegatives) {
  Gen g(11);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = g.integer(1, 40);
    PhaseSequence gt = g.phases(n), pred = g.phases(n);
    const double f = f1_frames(pred, gt);
    EXPECT_NEAR(f, oracle_f1(pred, gt), 1e-12);
    const int extra = g.integer(1, 10);
    for (int i = 0; i < extra; ++i) {
      const auto pos = static_cast<std::ptrdiff_t>(g.integer(0, static_cast<int>(gt.size())));
      gt.insert(gt.begin() + pos, Phase::N);
      pred.insert(pred.begin() + pos, Phase::N);
    }
    EXPECT_EQ(f1_frames(pred, gt), f);
  }
}

// --- P3 -----------------------------------------------------------------------

TEST(P3, AllExactIsHundred) {
  const std::vector<std::optional<int>> pred{3, 7, 11};
  const std::vector<int> gt{3, 7, 11};
  EXPECT_DOUBLE_EQ(p3(pred, gt), 100.0);
}

TEST(P3, ErrorsZeroTwoFour) {
  const std::vector<std::optional<int>> pred{10, 12, 14};
  const std::vector<int> gt{10, 10, 10};
  EXPECT_NEAR(p3(pred, gt), 200.0 / 3.0, 1e-9);
}

TEST(P3, AbsentPredictionCountsAsFailure) {
  const std::vector<std::optional<int>> pred{1, std::nullopt, 3, 4};
  const std::vector<int> gt{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(p3(pred, gt), 75.0);
}

TEST(P3, EmptyThrows) {
  EXPECT_THROW(p3(std::span<const std::optional<int>>{}, std::span<const int>{}), DataError);
}

TEST(P3, PropertyShiftInvariance) {
  Gen g(12);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = g.integer(1, 20);
    std::vector<std::optional<int>> pred;
    std::vector<int> gt;
    for (int i = 0; i < n; ++i) {
      gt.push_back(g.integer(0, 100));
      pred.push_back(g.coin(0.1) ? std::nullopt : std::optional<int>(gt.back() + g.integer(-6, 6)));
    }
    const int shift = g.integer(-50, 50);
    auto pred2 = pred;
    auto gt2 = gt;
    for (auto& p : pred2)
      if (p) *p += shift;
    for (auto& v : gt2) v += shift;
    EXPECT_EQ(p3(pred, gt), p3(pred2, gt2));
  }
}

// --- Pearson --------------------------------------------------------------------

TEST(Pearson, IdentityAndNegation) {
  const std::vector<double> a{1, 4, 2, 8, 5}, neg{-1, -4, -2, -8, -5};
  EXPECT_NEAR(pearson_r(a, a), 1.0, 1e-12);
  EXPECT_NEAR(pearson_r(a, neg), -1.0, 1e-12);
}

TEST(Pearson, HandExample) {
  // mean a = 2, mean b = 7/3; sxy = 3, sxx = 2, syy = 14/3 -> r = 3 / sqrt(28/3).
  const std::vector<double> a{1, 2, 3}, b{1, 2, 4};
  EXPECT_NEAR(pearson_r(a, b), 3.0 / std::sqrt(28.0 / 3.0), 1e-12);
  EXPECT_NEAR(pearson_r(a, b), 0.98198, 1e-5);
}

TEST(Pearson, ConstantSeriesThrows) {
  const std::vector<double> a{1, 1, 1}, b{1, 2, 3};
  EXPECT_THROW(pearson_r(a, b), DataError);
}

TEST(Pearson, PropertyPositiveAffineInvariance) {
  Gen g(13);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = g.integer(3, 30);
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = g.real(-10, 10);
      b[i] = 0.5 * a[i] + g.real(-5, 5);
    }
    const double r = pearson_r(a, b);
    const double s = g.real(0.1, 10), t = g.real(-100, 100);
    std::vector<double> a2(a), b2(b);
    for (auto& v : a2) v = s * v + t;
    for (auto& v : b2) v = 3.0 * v - 7.0;
    EXPECT_NEAR(pearson_r(a2, b), r, 1e-9);
    EXPECT_NEAR(pearson_r(a, b2), r, 1e-9);
    EXPECT_LE(std::abs(r), 1.0);
  }
}

// --- RMSE -------------------------------------------------------------------------

TEST(RmseNorm, ZeroForExactPrediction) {
  const std::vector<Point2> p{{1, 2}, {3, 4}};
  EXPECT_DOUBLE_EQ(rmse_norm(p, p, 10.0), 0.0);
}

TEST(RmseNorm, OffsetByDIsOne) {
  const std::vector<Point2> gt{{1, 2}, {3, 4}, {5, 6}}, pred{{1, 9}, {3, 11}, {5, 13}};
  EXPECT_NEAR(rmse_norm(pred, gt, 7.0), 1.0, 1e-12);
}

TEST(RmseNorm, HandExample) {
  const std::vector<Point2> gt{{0, 0}, {0, 0}}, pred{{3, 0}, {0, 4}};
  EXPECT_NEAR(rmse_norm(pred, gt, 5.0), std::sqrt(12.5) / 5.0, 1e-12);
}

TEST(RmseNorm, NonPositiveDistanceThrows) {
  const std::vector<Point2> p{{0, 0}};
  EXPECT_THROW(rmse_norm(p, p, 0.0), DataError);
}

TEST(RmseNorm, PropertyScalesAsInverseDistance) {
  Gen g(14);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = g.integer(1, 10);
    std::vector<Point2> a, b;
    for (int i = 0; i < n; ++i) {
      a.push_back(g.point(0, 100));
      b.push_back(g.point(0, 100));
    }
    const double d = g.real(1, 100);
    EXPECT_EQ(rmse_norm(a, b, 2 * d), rmse_norm(a, b, d) / 2);
  }
}

// --- IoU ----------------------------------------------------------------------------

TEST(Iou, IdenticalAndDisjoint) {
  const Box a{0, 0, 10, 10}, far{20, 20, 30, 30};
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(iou(a, far), 0.0);
}

TEST(Iou, HandExample) { EXPECT_NEAR(iou({0, 0, 10, 10}, {5, 0, 15, 10}), 1.0 / 3.0, 1e-12); }

TEST(Iou, PixelBoxCoversWholePixels) {
  const Box b = to_box(PixelBox{2, 3, 2, 3});
  EXPECT_DOUBLE_EQ(b.area(), 1.0);
}

TEST(Iou, PropertySymmetricAndBounded) {
  Gen g(15);
  for (int trial = 0; trial < 500; ++trial) {
    auto box = [&] {
      const double x = g.real(0, 50), y = g.real(0, 50);
      return Box{x, y, x + g.real(0, 30), y + g.real(0, 30)};
    };
    const Box a = box(), b = box();
    EXPECT_EQ(iou(a, b), iou(b, a));
    EXPECT_GE(iou(a, b), 0.0);
    EXPECT_LE(iou(a, b), 1.0);
  }
}

// --- bbox F1 sweep ----------------------------------------------------------------------

TEST(BboxSweep, PerfectPredictionsAreOneEverywhere) {
  const std::vector<Box> gt{{0, 0, 10, 10}, {5, 5, 9, 12}};
  const std::vector<std::optional<Box>> pred{gt[0], gt[1]};
  const auto thr = default_iou_thresholds();
  ASSERT_EQ(thr.size(), 11u);
  for (const auto& p : bbox_f1_sweep(pred, gt, thr)) EXPECT_DOUBLE_EQ(p.f1, 1.0);
}

TEST(BboxSweep, AbsentPredictionsAreZeroEverywhere) {
  const std::vector<Box> gt{{0, 0, 10, 10}, {5, 5, 9, 12}};
  const std::vector<std::optional<Box>> pred{std::nullopt, std::nullopt};
  for (const auto& p : bbox_f1_sweep(pred, gt, default_iou_thresholds())) {
    EXPECT_DOUBLE_EQ(p.f1, 0.0);
    EXPECT_DOUBLE_EQ(p.recall, 0.0);
  }
}

TEST(BboxSweep, HandCountedExample) {
  // Prediction [0,0,10,h] against gt [0,0,10,10] has IoU h/10 for h <= 10.
  const std::vector<Box> gt(4, Box{0, 0, 10, 10});
  const std::vector<std::optional<Box>> pred{Box{0, 0, 10, 8}, Box{0, 0, 10, 5}, Box{0, 0, 10, 3}, std::nullopt};
  const std::vector<double> thr{0.45};
  const auto s = bbox_f1_sweep(pred, gt, thr);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].counts.tp, 2u);
  EXPECT_EQ(s[0].counts.fp, 1u);
  EXPECT_EQ(s[0].counts.fn, 2u);
  EXPECT_NEAR(s[0].f1, 4.0 / 7.0, 1e-12);
}

TEST(BboxSweep, ThresholdOutsideOpenIntervalThrows) {
  const std::vector<Box> gt{{0, 0, 1, 1}};
  const std::vector<std::optional<Box>> pred{gt[0]};
  const std::vector<double> thr{1.0};
  EXPECT_THROW(bbox_f1_sweep(pred, gt, thr), DataError);
}

TEST(BboxSweep, PropertyF1NonIncreasingInThreshold) {
  Gen g(16);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = g.integer(1, 20);
    std::vector<Box> gt;
    std::vector<std::optional<Box>> pred;
    for (int i = 0; i < n; ++i) {
      const double x = g.real(0, 20), y = g.real(0, 20);
      gt.push_back({x, y, x + 10, y + 10});
      if (g.coin(0.2)) pred.push_back(std::nullopt);
      else pred.push_back(Box{x + g.real(-5, 5), y + g.real(-5, 5), x + 10 + g.real(-5, 5), y + 10 + g.real(-5, 5)});
    }
    const auto s = bbox_f1_sweep(pred, gt, default_iou_thresholds());
    for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LE(s[i].f1, s[i - 1].f1 + 1e-15);
  }
}

// --- Friedman and post-hoc ---------------------------------------------------------------

TEST(Friedman, AllTiedGivesZero) {
  const std::vector<std::vector<double>> m{{1, 1, 1}, {2, 2, 2}, {5, 5, 5}};
  const auto f = friedman(m);
  EXPECT_DOUBLE_EQ(f.chi2, 0.0);
  EXPECT_DOUBLE_EQ(f.p_value, 1.0);
  EXPECT_THROW(posthoc_mean_ranks(f), DataError);  // nothing can be flagged
}

TEST(Friedman, ThreeIdenticalRankings) {
  const std::vector<std::vector<double>> m{{0.1, 0.2, 0.3}, {1, 2, 3}, {10, 20, 30}};
  const auto f = friedman(m);
  EXPECT_NEAR(f.chi2, 6.0, 1e-12);
  EXPECT_EQ(f.df, 2);
  EXPECT_NEAR(f.p_value, std::exp(-3.0), 1e-9);  // chi-square survival with 2 df
}

TEST(Friedman, PropertyMatchesOracleWithTies) {
  Gen g(17);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = g.integer(2, 12), k = g.integer(2, 5);
    std::vector<std::vector<double>> m(n, std::vector<double>(k));
    for (auto& row : m)
      for (auto& v : row) v = g.integer(0, 4);  // coarse values force ties
    EXPECT_NEAR(friedman(m).chi2, oracle_friedman_chi2(m), 1e-9);
  }
}

TEST(Friedman, PropertyInvariantUnderMonotoneTransformPerBlock) {
  Gen g(18);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = g.integer(2, 10), k = g.integer(2, 5);
    std::vector<std::vector<double>> m(n, std::vector<double>(k));
    for (auto& row : m)
      for (auto& v : row) v = g.real(0, 1);
    auto t = m;
    for (auto& row : t) {
      const double scale = g.real(0.5, 3), shift = g.real(-1, 1);
      for (auto& v : row) v = std::exp(scale * v) + shift;
    }
    EXPECT_NEAR(friedman(t).chi2, friedman(m).chi2, 1e-9);
  }
}

TEST(StudentizedRange, TwoMeansHaveClosedForm) {
  for (double q : {0.5, 1.0, 2.0, 2.77, 4.0}) EXPECT_NEAR(studentized_range_cdf(q, 2), 2 * normal_cdf(q / std::sqrt(2.0)) - 1, 1e-9);
  EXPECT_NEAR(studentized_range_quantile(0.05, 2), 1.959963984540054 * std::sqrt(2.0), 1e-6);
}

TEST(StudentizedRange, MatchesPublishedTable) {
  EXPECT_NEAR(studentized_range_quantile(0.05, 3), 3.314, 1e-3);
  EXPECT_NEAR(studentized_range_quantile(0.05, 5), 3.858, 1e-3);
}

TEST(Posthoc, TwoTreatmentsConsistentOrderIsSignificant) {
  std::vector<std::vector<double>> m(30, {1.0, 2.0});
  const auto f = posthoc_mean_ranks(friedman(m));
  // Rank-sum oracle: mean ranks 1 and 2, difference 1 against CD = q * sqrt(k(k+1)/(12n)).
  const double cd = studentized_range_quantile(0.05, 2) * std::sqrt(2.0 * 3.0 / (12.0 * 30.0));
  EXPECT_NEAR(posthoc_critical_difference(2, 30), cd, 1e-12);
  EXPECT_GT(1.0, cd);
  EXPECT_TRUE(f.significant[0][1]);
  EXPECT_TRUE(f.significant[1][0]);
}

TEST(Posthoc, DominantColumnDiffersFromAllOthers) {
  Gen g(19);
  std::vector<std::vector<double>> m(30, std::vector<double>(5));
  for (auto& row : m) {
    row[2] = -1.0;  // always rank 1
    for (int j : {0, 1, 3, 4}) row[j] = g.real(0, 1);
  }
  const auto f = posthoc_mean_ranks(friedman(m));
  const double cd = posthoc_critical_difference(5, 30);
  for (int j : {0, 1, 3, 4}) {
    EXPECT_GT(f.mean_ranks[j] - f.mean_ranks[2], cd);
    EXPECT_TRUE(f.significant[2][j]);
  }
}

// --- inter-rater and formatting --------------------------------------------------------

TEST(Interrater, IdenticalRaters) {
  const std::vector<int> a{3, 8, 15, 21};
  const auto r = interrater_agreement(a, a);
  EXPECT_NEAR(r.r, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.p3, 100.0);
}

TEST(Interrater, ConstantOffsetOfFive) {
  const std::vector<int> a{3, 8, 15, 21}, b{8, 13, 20, 26};
  const auto r = interrater_agreement(a, b);
  EXPECT_NEAR(r.r, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.p3, 0.0);
}

TEST(Formatting, AgreementRow) { EXPECT_EQ(format_agreement({0.951, 89.08}), "r = 0.951  P3 = 89.08%"); }

TEST(Formatting, FriedmanRow) {
  FriedmanResult f;
  f.chi2 = 583.87;
  f.df = 4;
  f.p_value = 1e-12;
  EXPECT_EQ(format_friedman(f), "X2(4)=583.87, p<.001");
}

TEST(Formatting, MedianIqr) { EXPECT_EQ(format_median_iqr(0.189, 0.099, 0.320), "0.189 (0.099-0.320)"); }

TEST(Quantile, Type7) {
  const std::vector<double> v{4, 1, 3, 2};
  EXPECT_DOUBLE_EQ(quantile(v, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile(v, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile(v, 1.0), 4.0);
}
