#pragma once

// Dense CNN kernels on single CHW samples.
//
// Two implementations share every signature:
//   vfss::kernels          OpenMP-parallel, padded-buffer and SIMD friendly.
//   vfss::kernels::serial  straightforward loops, kept as the test reference.
//
// Parallel kernels assign each output element to exactly one thread and sum
// in a fixed order, so results do not depend on the thread count.

#include <concepts>
#include <cstdint>
#include <span>

namespace vfss::kernels {

/// 3x3 convolution, stride 1, zero padding 1 (spatial size preserved).
/// Weights are laid out [out_ch][in_ch][3][3].
struct ConvShape {
  int in_ch = 1;
  int out_ch = 1;
  int height = 1;
  int width = 1;

  std::size_t input_size() const { return std::size_t(in_ch) * height * width; }
  std::size_t output_size() const { return std::size_t(out_ch) * height * width; }
  std::size_t weight_size() const { return std::size_t(out_ch) * in_ch * 9; }
};

/// 2x2 max pooling, stride 2; odd trailing rows/cols are dropped.
struct PoolShape {
  int channels = 1;
  int height = 2;
  int width = 2;

  int out_height() const { return height / 2; }
  int out_width() const { return width / 2; }
  std::size_t input_size() const { return std::size_t(channels) * height * width; }
  std::size_t output_size() const { return std::size_t(channels) * out_height() * out_width(); }
};

template <std::floating_point T>
void conv3x3_forward(const ConvShape& s, std::span<const T> input, std::span<const T> weights,
                     std::span<const T> bias, std::span<T> output);

/// grad_input may be empty (first layer). grad_weights and grad_bias are
/// accumulated into; grad_input is overwritten.
template <std::floating_point T>
void conv3x3_backward(const ConvShape& s, std::span<const T> input, std::span<const T> weights,
                      std::span<const T> grad_output, std::span<T> grad_input, std::span<T> grad_weights,
                      std::span<T> grad_bias);

/// argmax receives the flat input index of each pooled maximum (first in raster order).
template <std::floating_point T>
void maxpool2x2_forward(const PoolShape& s, std::span<const T> input, std::span<T> output,
                        std::span<std::int32_t> argmax);

template <std::floating_point T>
void maxpool2x2_backward(const PoolShape& s, std::span<const T> grad_output, std::span<const std::int32_t> argmax,
                         std::span<T> grad_input);

/// Fully connected layer, weights [out][in].
template <std::floating_point T>
void dense_forward(int in, int out, std::span<const T> input, std::span<const T> weights, std::span<const T> bias,
                   std::span<T> output);

template <std::floating_point T>
void dense_backward(int in, int out, std::span<const T> input, std::span<const T> weights,
                    std::span<const T> grad_output, std::span<T> grad_input, std::span<T> grad_weights,
                    std::span<T> grad_bias);

namespace serial {

template <std::floating_point T>
void conv3x3_forward(const ConvShape& s, std::span<const T> input, std::span<const T> weights,
                     std::span<const T> bias, std::span<T> output);

template <std::floating_point T>
void conv3x3_backward(const ConvShape& s, std::span<const T> input, std::span<const T> weights,
                      std::span<const T> grad_output, std::span<T> grad_input, std::span<T> grad_weights,
                      std::span<T> grad_bias);

template <std::floating_point T>
void maxpool2x2_forward(const PoolShape& s, std::span<const T> input, std::span<T> output,
                        std::span<std::int32_t> argmax);

template <std::floating_point T>
void maxpool2x2_backward(const PoolShape& s, std::span<const T> grad_output, std::span<const std::int32_t> argmax,
                         std::span<T> grad_input);

template <std::floating_point T>
void dense_forward(int in, int out, std::span<const T> input, std::span<const T> weights, std::span<const T> bias,
                   std::span<T> output);

template <std::floating_point T>
void dense_backward(int in, int out, std::span<const T> input, std::span<const T> weights,
                    std::span<const T> grad_output, std::span<T> grad_input, std::span<T> grad_weights,
                    std::span<T> grad_bias);

}  // namespace serial

}  // namespace vfss::kernels
