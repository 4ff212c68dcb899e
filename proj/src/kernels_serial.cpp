// Reference kernels: direct loops with explicit bounds checks, no padding
// buffers, no pragmas. Used by the tests and the benchmark as the baseline.

#include <algorithm>

#include "vfss/kernels.hpp"

namespace vfss::kernels::serial {

template <std::floating_point T>
void conv3x3_forward(const ConvShape& s, std::span<const T> input, std::span<const T> weights,
                     std::span<const T> bias, std::span<T> output) {
  const int H = s.height, W = s.width;
  for (int oc = 0; oc < s.out_ch; ++oc)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        T acc = bias[oc];
        for (int ic = 0; ic < s.in_ch; ++ic)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int iy = y + ky - 1, ix = x + kx - 1;
              if (iy < 0 || ix < 0 || iy >= H || ix >= W) continue;
              acc += weights[((oc * s.in_ch + ic) * 3 + ky) * 3 + kx] * input[(ic * H + iy) * W + ix];
            }
        output[(oc * H + y) * W + x] = acc;
      }
}

template <std::floating_point T>
void conv3x3_backward(const ConvShape& s, std::span<const T> input, std::span<const T> weights,
                      std::span<const T> grad_output, std::span<T> grad_input, std::span<T> grad_weights,
                      std::span<T> grad_bias) {
  const int H = s.height, W = s.width;
  if (!grad_input.empty()) std::fill(grad_input.begin(), grad_input.end(), T{});
  for (int oc = 0; oc < s.out_ch; ++oc)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const T g = grad_output[(oc * H + y) * W + x];
        grad_bias[oc] += g;
        for (int ic = 0; ic < s.in_ch; ++ic)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int iy = y + ky - 1, ix = x + kx - 1;
              if (iy < 0 || ix < 0 || iy >= H || ix >= W) continue;
              const int widx = ((oc * s.in_ch + ic) * 3 + ky) * 3 + kx;
              const int iidx = (ic * H + iy) * W + ix;
              grad_weights[widx] += g * input[iidx];
              if (!grad_input.empty()) grad_input[iidx] += g * weights[widx];
            }
      }
}

template <std::floating_point T>
void maxpool2x2_forward(const PoolShape& s, std::span<const T> input, std::span<T> output,
                        std::span<std::int32_t> argmax) {
  const int OH = s.out_height(), OW = s.out_width();
  for (int c = 0; c < s.channels; ++c)
    for (int oy = 0; oy < OH; ++oy)
      for (int ox = 0; ox < OW; ++ox) {
        int best = -1;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const int idx = (c * s.height + 2 * oy + dy) * s.width + 2 * ox + dx;
            if (best < 0 || input[idx] > input[best]) best = idx;
          }
        const int o = (c * OH + oy) * OW + ox;
        output[o] = input[best];
        argmax[o] = best;
      }
}

template <std::floating_point T>
void maxpool2x2_backward(const PoolShape& s, std::span<const T> grad_output, std::span<const std::int32_t> argmax,
                         std::span<T> grad_input) {
  std::fill(grad_input.begin(), grad_input.end(), T{});
  for (std::size_t i = 0; i < s.output_size(); ++i) grad_input[argmax[i]] += grad_output[i];
}

template <std::floating_point T>
void dense_forward(int in, int out, std::span<const T> input, std::span<const T> weights, std::span<const T> bias,
                   std::span<T> output) {
  for (int o = 0; o < out; ++o) {
    T acc = bias[o];
    for (int i = 0; i < in; ++i) acc += weights[std::size_t(o) * in + i] * input[i];
    output[o] = acc;
  }
}

template <std::floating_point T>
void dense_backward(int in, int out, std::span<const T> input, std::span<const T> weights,
                    std::span<const T> grad_output, std::span<T> grad_input, std::span<T> grad_weights,
                    std::span<T> grad_bias) {
  if (!grad_input.empty()) std::fill(grad_input.begin(), grad_input.end(), T{});
  for (int o = 0; o < out; ++o) {
    grad_bias[o] += grad_output[o];
    for (int i = 0; i < in; ++i) {
      grad_weights[std::size_t(o) * in + i] += grad_output[o] * input[i];
      if (!grad_input.empty()) grad_input[i] += weights[std::size_t(o) * in + i] * grad_output[o];
    }
  }
}

template void conv3x3_forward<float>(const ConvShape&, std::span<const float>, std::span<const float>,
                                     std::span<const float>, std::span<float>);
template void conv3x3_forward<double>(const ConvShape&, std::span<const double>, std::span<const double>,
                                      std::span<const double>, std::span<double>);
template void conv3x3_backward<float>(const ConvShape&, std::span<const float>, std::span<const float>,
                                      std::span<const float>, std::span<float>, std::span<float>, std::span<float>);
template void conv3x3_backward<double>(const ConvShape&, std::span<const double>, std::span<const double>,
                                       std::span<const double>, std::span<double>, std::span<double>,
                                       std::span<double>);
template void maxpool2x2_forward<float>(const PoolShape&, std::span<const float>, std::span<float>,
                                        std::span<std::int32_t>);
template void maxpool2x2_forward<double>(const PoolShape&, std::span<const double>, std::span<double>,
                                         std::span<std::int32_t>);
template void maxpool2x2_backward<float>(const PoolShape&, std::span<const float>, std::span<const std::int32_t>,
                                         std::span<float>);
template void maxpool2x2_backward<double>(const PoolShape&, std::span<const double>, std::span<const std::int32_t>,
                                          std::span<double>);
template void dense_forward<float>(int, int, std::span<const float>, std::span<const float>, std::span<const float>,
                                   std::span<float>);
template void dense_forward<double>(int, int, std::span<const double>, std::span<const double>,
                                    std::span<const double>, std::span<double>);
template void dense_backward<float>(int, int, std::span<const float>, std::span<const float>, std::span<const float>,
                                    std::span<float>, std::span<float>, std::span<float>);
template void dense_backward<double>(int, int, std::span<const double>, std::span<const double>,
                                     std::span<const double>, std::span<double>, std::span<double>,
                                     std::span<double>);

}  // namespace vfss::kernels::serial
