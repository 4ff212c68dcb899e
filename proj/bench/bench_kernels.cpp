// Serial reference vs OpenMP kernels on CNN4-sized layers.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "vfss/kernels.hpp"

namespace {

namespace k = vfss::kernels;

std::vector<float> noise(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Args: in_ch, out_ch, side.
k::ConvShape conv_shape(const benchmark::State& st) {
  return {static_cast<int>(st.range(0)), static_cast<int>(st.range(1)), static_cast<int>(st.range(2)),
          static_cast<int>(st.range(2))};
}

template <bool Parallel>
void BM_ConvForward(benchmark::State& st) {
  const auto s = conv_shape(st);
  const auto in = noise(s.input_size(), 1), w = noise(s.weight_size(), 2), b = noise(s.out_ch, 3);
  std::vector<float> out(s.output_size());
  for (auto _ : st) {
    if constexpr (Parallel) k::conv3x3_forward<float>(s, in, w, b, out);
    else k::serial::conv3x3_forward<float>(s, in, w, b, out);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(s.output_size() * s.in_ch * 9));
}

template <bool Parallel>
void BM_ConvBackward(benchmark::State& st) {
  const auto s = conv_shape(st);
  const auto in = noise(s.input_size(), 1), w = noise(s.weight_size(), 2), go = noise(s.output_size(), 4);
  std::vector<float> gi(s.input_size()), gw(s.weight_size()), gb(s.out_ch);
  for (auto _ : st) {
    if constexpr (Parallel) k::conv3x3_backward<float>(s, in, w, go, gi, gw, gb);
    else k::serial::conv3x3_backward<float>(s, in, w, go, gi, gw, gb);
    benchmark::DoNotOptimize(gi.data());
  }
}

template <bool Parallel>
void BM_MaxPool(benchmark::State& st) {
  const k::PoolShape s{static_cast<int>(st.range(0)), static_cast<int>(st.range(1)), static_cast<int>(st.range(1))};
  const auto in = noise(s.input_size(), 5);
  std::vector<float> out(s.output_size());
  std::vector<std::int32_t> arg(s.output_size());
  for (auto _ : st) {
    if constexpr (Parallel) k::maxpool2x2_forward<float>(s, in, out, arg);
    else k::serial::maxpool2x2_forward<float>(s, in, out, arg);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_Dense(benchmark::State& st) {
  const int in_n = static_cast<int>(st.range(0)), out_n = static_cast<int>(st.range(1));
  const auto in = noise(in_n, 6), w = noise(std::size_t(in_n) * out_n, 7), b = noise(out_n, 8);
  std::vector<float> out(out_n);
  for (auto _ : st) {
    if constexpr (Parallel) k::dense_forward<float>(in_n, out_n, in, w, b, out);
    else k::serial::dense_forward<float>(in_n, out_n, in, w, b, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({1, 16, 128})->Args({16, 16, 128})->Args({32, 64, 32})->Args({64, 128, 16})->Unit(benchmark::kMicrosecond);
}

}  // namespace

BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/serial")->Apply(conv_args);
BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/openmp")->Apply(conv_args);
BENCHMARK(BM_ConvBackward<false>)->Name("conv_backward/serial")->Apply(conv_args);
BENCHMARK(BM_ConvBackward<true>)->Name("conv_backward/openmp")->Apply(conv_args);
BENCHMARK(BM_MaxPool<false>)->Name("maxpool/serial")->Args({32, 128})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MaxPool<true>)->Name("maxpool/openmp")->Args({32, 128})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Dense<false>)->Name("dense/serial")->Args({8192, 256})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Dense<true>)->Name("dense/openmp")->Args({8192, 256})->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
