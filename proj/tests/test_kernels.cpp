#include <gtest/gtest.h>

#include <omp.h>

#include <cmath>
#include <vector>

#include "support.hpp"
#include "vfss/kernels.hpp"

using namespace vfss;
namespace k = vfss::kernels;

namespace {

template <typename T>
std::vector<T> random_vec(test::Gen& g, std::size_t n, double lo = -1, double hi = 1) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(g.real(lo, hi));
  return v;
}

template <typename T>
void expect_close(const std::vector<T>& a, const std::vector<T>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a[i], b[i], tol * (1.0 + std::abs(double(b[i])))) << i;
}

k::ConvShape random_shape(test::Gen& g) {
  return {g.integer(1, 6), g.integer(1, 9), g.integer(1, 23), g.integer(1, 23)};
}

}  // namespace

template <typename T>
class KernelsTyped : public ::testing::Test {};
using Precisions = ::testing::Types<float, double>;
TYPED_TEST_SUITE(KernelsTyped, Precisions);

TYPED_TEST(KernelsTyped, ConvForwardMatchesSerial) {
  using T = TypeParam;
  const double tol = std::is_same_v<T, float> ? 1e-5 : 1e-12;
  test::Gen g(61);
  for (int trial = 0; trial < 60; ++trial) {
    const auto s = random_shape(g);
    const auto in = random_vec<T>(g, s.input_size()), w = random_vec<T>(g, s.weight_size()),
               b = random_vec<T>(g, s.out_ch);
    std::vector<T> par(s.output_size()), ser(s.output_size());
    k::conv3x3_forward<T>(s, in, w, b, par);
    k::serial::conv3x3_forward<T>(s, in, w, b, ser);
    expect_close(par, ser, tol);
  }
}

TYPED_TEST(KernelsTyped, ConvBackwardMatchesSerial) {
  using T = TypeParam;
  const double tol = std::is_same_v<T, float> ? 1e-4 : 1e-11;
  test::Gen g(62);
  for (int trial = 0; trial < 60; ++trial) {
    const auto s = random_shape(g);
    const auto in = random_vec<T>(g, s.input_size()), w = random_vec<T>(g, s.weight_size()),
               go = random_vec<T>(g, s.output_size());
    // Accumulation targets start from the same nonzero values.
    const auto gw0 = random_vec<T>(g, s.weight_size()), gb0 = random_vec<T>(g, s.out_ch);
    std::vector<T> gi_p(s.input_size()), gi_s(s.input_size());
    auto gw_p = gw0, gw_s = gw0, gb_p = gb0, gb_s = gb0;
    k::conv3x3_backward<T>(s, in, w, go, gi_p, gw_p, gb_p);
    k::serial::conv3x3_backward<T>(s, in, w, go, gi_s, gw_s, gb_s);
    expect_close(gi_p, gi_s, tol);
    expect_close(gw_p, gw_s, tol);
    expect_close(gb_p, gb_s, tol);
    // Without grad_input (first layer).
    auto gw_e = gw0, gb_e = gb0;
    k::conv3x3_backward<T>(s, in, w, go, std::span<T>{}, gw_e, gb_e);
    expect_close(gw_e, gw_s, tol);
  }
}

TEST(Kernels, ConvBackwardMatchesFiniteDifferences) {
  test::Gen g(63);
  const k::ConvShape s{2, 3, 5, 6};
  const auto in = random_vec<double>(g, s.input_size()), w = random_vec<double>(g, s.weight_size()),
             b = random_vec<double>(g, s.out_ch), go = random_vec<double>(g, s.output_size());
  // Loss L = sum(out * go); dL/dx and dL/dw come from the backward kernel.
  auto loss = [&](const std::vector<double>& x, const std::vector<double>& ww) {
    std::vector<double> out(s.output_size());
    k::serial::conv3x3_forward<double>(s, x, ww, b, out);
    double l = 0;
    for (std::size_t i = 0; i < out.size(); ++i) l += out[i] * go[i];
    return l;
  };
  std::vector<double> gi(s.input_size()), gw(s.weight_size(), 0.0), gb(s.out_ch, 0.0);
  k::conv3x3_backward<double>(s, in, w, go, gi, gw, gb);
  const double h = 1e-6;
  for (std::size_t i = 0; i < in.size(); ++i) {
    auto p = in, m = in;
    p[i] += h;
    m[i] -= h;
    EXPECT_NEAR(gi[i], (loss(p, w) - loss(m, w)) / (2 * h), 1e-6);
  }
  for (std::size_t i = 0; i < w.size(); ++i) {
    auto p = w, m = w;
    p[i] += h;
    m[i] -= h;
    EXPECT_NEAR(gw[i], (loss(in, p) - loss(in, m)) / (2 * h), 1e-6);
  }
  for (int o = 0; o < s.out_ch; ++o) {
    double sum = 0;
    for (int i = 0; i < s.height * s.width; ++i) sum += go[o * s.height * s.width + i];
    EXPECT_NEAR(gb[o], sum, 1e-9);
  }
}

TYPED_TEST(KernelsTyped, PoolingMatchesSerialExactly) {
  using T = TypeParam;
  test::Gen g(64);
  for (int trial = 0; trial < 60; ++trial) {
    const k::PoolShape s{g.integer(1, 6), g.integer(2, 21), g.integer(2, 21)};
    auto in = random_vec<T>(g, s.input_size());
    for (std::size_t i = 0; i < in.size(); i += 3) in[i] = T(0.5);  // ties
    std::vector<T> op(s.output_size()), os(s.output_size());
    std::vector<std::int32_t> ap(s.output_size()), as(s.output_size());
    k::maxpool2x2_forward<T>(s, in, op, ap);
    k::serial::maxpool2x2_forward<T>(s, in, os, as);
    EXPECT_EQ(op, os);
    EXPECT_EQ(ap, as);
    const auto go = random_vec<T>(g, s.output_size());
    std::vector<T> gp(s.input_size(), T(7)), gs(s.input_size(), T(-3));
    k::maxpool2x2_backward<T>(s, go, ap, gp);
    k::serial::maxpool2x2_backward<T>(s, go, as, gs);
    EXPECT_EQ(gp, gs);
  }
}

TYPED_TEST(KernelsTyped, DenseMatchesSerial) {
  using T = TypeParam;
  const double tol = std::is_same_v<T, float> ? 1e-4 : 1e-11;
  test::Gen g(65);
  for (int trial = 0; trial < 60; ++trial) {
    const int in = g.integer(1, 300), out = g.integer(1, 70);
    const auto x = random_vec<T>(g, in), w = random_vec<T>(g, std::size_t(in) * out), b = random_vec<T>(g, out);
    std::vector<T> yp(out), ys(out);
    k::dense_forward<T>(in, out, x, w, b, yp);
    k::serial::dense_forward<T>(in, out, x, w, b, ys);
    expect_close(yp, ys, tol);
    const auto go = random_vec<T>(g, out);
    const auto gw0 = random_vec<T>(g, w.size()), gb0 = random_vec<T>(g, out);
    std::vector<T> gip(in), gis(in);
    auto gwp = gw0, gws = gw0, gbp = gb0, gbs = gb0;
    k::dense_backward<T>(in, out, x, w, go, gip, gwp, gbp);
    k::serial::dense_backward<T>(in, out, x, w, go, gis, gws, gbs);
    expect_close(gip, gis, tol);
    expect_close(gwp, gws, tol);
    expect_close(gbp, gbs, tol);
  }
}

TEST(Kernels, ResultsIndependentOfThreadCount) {
  test::Gen g(66);
  const k::ConvShape s{4, 8, 32, 32};
  const auto in = random_vec<float>(g, s.input_size()), w = random_vec<float>(g, s.weight_size()),
             b = random_vec<float>(g, s.out_ch), go = random_vec<float>(g, s.output_size());
  auto run = [&](int threads) {
    omp_set_num_threads(threads);
    std::vector<float> out(s.output_size()), gi(s.input_size()), gw(s.weight_size()), gb(s.out_ch);
    k::conv3x3_forward<float>(s, in, w, b, out);
    k::conv3x3_backward<float>(s, in, w, go, gi, gw, gb);
    out.insert(out.end(), gi.begin(), gi.end());
    out.insert(out.end(), gw.begin(), gw.end());
    return out;
  };
  const auto one = run(1), four = run(4);
  omp_set_num_threads(omp_get_num_procs());
  EXPECT_EQ(one, four);
}
