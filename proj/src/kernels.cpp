#include "vfss/kernels.hpp"

#include <algorithm>
#include <vector>

namespace vfss::kernels {

namespace {

/// Copies CHW `input` into a zero-bordered (H+2)x(W+2) buffer per channel.
template <typename T>
void pad_into(const ConvShape& s, std::span<const T> input, int channels, std::vector<T>& padded) {
  const int H = s.height, W = s.width, PW = W + 2, PH = H + 2;
  padded.assign(std::size_t(channels) * PH * PW, T{});
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < H; ++y)
      std::copy_n(input.data() + (std::size_t(c) * H + y) * W, W, padded.data() + (std::size_t(c) * PH + y + 1) * PW + 1);
}

}  // namespace

template <std::floating_point T>
void conv3x3_forward(const ConvShape& s, std::span<const T> input, std::span<const T> weights,
                     std::span<const T> bias, std::span<T> output) {
  const int H = s.height, W = s.width, PW = W + 2, PH = H + 2;
  const std::size_t plane = std::size_t(H) * W;
  std::vector<T> padded;
  pad_into(s, input, s.in_ch, padded);
  const T* pad = padded.data();

#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < s.out_ch; ++oc) {
    T* out = output.data() + oc * plane;
    std::fill(out, out + plane, bias[oc]);
    for (int ic = 0; ic < s.in_ch; ++ic) {
      const T* w = weights.data() + (std::size_t(oc) * s.in_ch + ic) * 9;
      const T* p = pad + std::size_t(ic) * PH * PW;
      for (int y = 0; y < H; ++y) {
        T* orow = out + std::size_t(y) * W;
        for (int ky = 0; ky < 3; ++ky) {
          const T* prow = p + std::size_t(y + ky) * PW;
          const T w0 = w[ky * 3], w1 = w[ky * 3 + 1], w2 = w[ky * 3 + 2];
#pragma omp simd
          for (int x = 0; x < W; ++x) orow[x] += w0 * prow[x] + w1 * prow[x + 1] + w2 * prow[x + 2];
        }
      }
    }
  }
}

template <std::floating_point T>
void conv3x3_backward(const ConvShape& s, std::span<const T> input, std::span<const T> weights,
                      std::span<const T> grad_output, std::span<T> grad_input, std::span<T> grad_weights,
                      std::span<T> grad_bias) {
  const int H = s.height, W = s.width, PW = W + 2, PH = H + 2;
  const std::size_t plane = std::size_t(H) * W;
  const std::size_t pplane = std::size_t(PH) * PW;

  if (!grad_input.empty()) {
    // Full correlation of the output gradient with the 180-degree rotated kernel.
    std::vector<T> gpad;
    pad_into(s, grad_output, s.out_ch, gpad);
    const T* gp = gpad.data();
#pragma omp parallel for schedule(static)
    for (int ic = 0; ic < s.in_ch; ++ic) {
      T* gi = grad_input.data() + ic * plane;
      std::fill(gi, gi + plane, T{});
      for (int oc = 0; oc < s.out_ch; ++oc) {
        const T* w = weights.data() + (std::size_t(oc) * s.in_ch + ic) * 9;
        const T* g = gp + std::size_t(oc) * pplane;
        for (int y = 0; y < H; ++y) {
          T* irow = gi + std::size_t(y) * W;
          for (int ky = 0; ky < 3; ++ky) {
            const T* grow = g + std::size_t(y + ky) * PW;
            const T w0 = w[(2 - ky) * 3 + 2], w1 = w[(2 - ky) * 3 + 1], w2 = w[(2 - ky) * 3];
#pragma omp simd
            for (int x = 0; x < W; ++x) irow[x] += w0 * grow[x] + w1 * grow[x + 1] + w2 * grow[x + 2];
          }
        }
      }
    }
  }

  // Weight gradients as nine dot products over whole planes: the output
  // gradient is laid out with the padded row stride (zero in the two extra
  // columns), so every kernel tap is a contiguous shifted view of the padded
  // input. Two trailing zeros keep the last shifted view in bounds.
  std::vector<T> padded;
  pad_into(s, input, s.in_ch, padded);
  padded.resize(padded.size() + 2, T{});
  const T* pad = padded.data();
  const std::size_t span_len = std::size_t(H) * PW;

#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < s.out_ch; ++oc) {
    const T* g = grad_output.data() + oc * plane;
    T bsum = 0;
#pragma omp simd reduction(+ : bsum)
    for (std::size_t i = 0; i < plane; ++i) bsum += g[i];
    grad_bias[oc] += bsum;
    std::vector<T> gz(span_len, T{});
    for (int y = 0; y < H; ++y) std::copy_n(g + std::size_t(y) * W, W, gz.data() + std::size_t(y) * PW);
    const T* z = gz.data();
    for (int ic = 0; ic < s.in_ch; ++ic) {
      const T* p0 = pad + std::size_t(ic) * pplane;
      const T* p1 = p0 + PW;
      const T* p2 = p1 + PW;
      T a0 = 0, a1 = 0, a2 = 0, a3 = 0, a4 = 0, a5 = 0, a6 = 0, a7 = 0, a8 = 0;
#pragma omp simd reduction(+ : a0, a1, a2, a3, a4, a5, a6, a7, a8)
      for (std::size_t i = 0; i < span_len; ++i) {
        const T gv = z[i];
        a0 += gv * p0[i];
        a1 += gv * p0[i + 1];
        a2 += gv * p0[i + 2];
        a3 += gv * p1[i];
        a4 += gv * p1[i + 1];
        a5 += gv * p1[i + 2];
        a6 += gv * p2[i];
        a7 += gv * p2[i + 1];
        a8 += gv * p2[i + 2];
      }
      T* gw = grad_weights.data() + (std::size_t(oc) * s.in_ch + ic) * 9;
      gw[0] += a0;
      gw[1] += a1;
      gw[2] += a2;
      gw[3] += a3;
      gw[4] += a4;
      gw[5] += a5;
      gw[6] += a6;
      gw[7] += a7;
      gw[8] += a8;
    }
  }
}

template <std::floating_point T>
void maxpool2x2_forward(const PoolShape& s, std::span<const T> input, std::span<T> output,
                        std::span<std::int32_t> argmax) {
  const int OH = s.out_height(), OW = s.out_width();
#pragma omp parallel for schedule(static)
  for (int c = 0; c < s.channels; ++c) {
    const std::size_t in_base = std::size_t(c) * s.height * s.width;
    const std::size_t out_base = std::size_t(c) * OH * OW;
    for (int oy = 0; oy < OH; ++oy) {
      for (int ox = 0; ox < OW; ++ox) {
        std::size_t best = in_base + std::size_t(2 * oy) * s.width + 2 * ox;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t idx = in_base + std::size_t(2 * oy + dy) * s.width + 2 * ox + dx;
            if (input[idx] > input[best]) best = idx;
          }
        output[out_base + std::size_t(oy) * OW + ox] = input[best];
        argmax[out_base + std::size_t(oy) * OW + ox] = static_cast<std::int32_t>(best);
      }
    }
  }
}

template <std::floating_point T>
void maxpool2x2_backward(const PoolShape& s, std::span<const T> grad_output, std::span<const std::int32_t> argmax,
                         std::span<T> grad_input) {
  const std::size_t per_in = std::size_t(s.height) * s.width;
  const std::size_t per_out = std::size_t(s.out_height()) * s.out_width();
#pragma omp parallel for schedule(static)
  for (int c = 0; c < s.channels; ++c) {
    std::fill_n(grad_input.data() + c * per_in, per_in, T{});
    for (std::size_t i = c * per_out; i < (c + 1) * per_out; ++i) grad_input[argmax[i]] += grad_output[i];
  }
}

template <std::floating_point T>
void dense_forward(int in, int out, std::span<const T> input, std::span<const T> weights, std::span<const T> bias,
                   std::span<T> output) {
#pragma omp parallel for schedule(static)
  for (int o = 0; o < out; ++o) {
    const T* w = weights.data() + std::size_t(o) * in;
    T acc = 0;
#pragma omp simd reduction(+ : acc)
    for (int i = 0; i < in; ++i) acc += w[i] * input[i];
    output[o] = acc + bias[o];
  }
}

template <std::floating_point T>
void dense_backward(int in, int out, std::span<const T> input, std::span<const T> weights,
                    std::span<const T> grad_output, std::span<T> grad_input, std::span<T> grad_weights,
                    std::span<T> grad_bias) {
  if (!grad_input.empty()) {
    constexpr int kChunk = 256;
    const int chunks = (in + kChunk - 1) / kChunk;
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < chunks; ++ch) {
      const int i0 = ch * kChunk, i1 = std::min(in, i0 + kChunk);
      T* gi = grad_input.data();
      std::fill(gi + i0, gi + i1, T{});
      for (int o = 0; o < out; ++o) {
        const T go = grad_output[o];
        const T* w = weights.data() + std::size_t(o) * in;
#pragma omp simd
        for (int i = i0; i < i1; ++i) gi[i] += w[i] * go;
      }
    }
  }
#pragma omp parallel for schedule(static)
  for (int o = 0; o < out; ++o) {
    const T go = grad_output[o];
    T* gw = grad_weights.data() + std::size_t(o) * in;
#pragma omp simd
    for (int i = 0; i < in; ++i) gw[i] += go * input[i];
    grad_bias[o] += go;
  }
}

#define VFSS_INSTANTIATE(T)                                                                                         \
  template void conv3x3_forward<T>(const ConvShape&, std::span<const T>, std::span<const T>, std::span<const T>,   \
                                   std::span<T>);                                                                  \
  template void conv3x3_backward<T>(const ConvShape&, std::span<const T>, std::span<const T>, std::span<const T>,  \
                                    std::span<T>, std::span<T>, std::span<T>);                                     \
  template void maxpool2x2_forward<T>(const PoolShape&, std::span<const T>, std::span<T>, std::span<std::int32_t>); \
  template void maxpool2x2_backward<T>(const PoolShape&, std::span<const T>, std::span<const std::int32_t>,         \
                                       std::span<T>);                                                              \
  template void dense_forward<T>(int, int, std::span<const T>, std::span<const T>, std::span<const T>,             \
                                 std::span<T>);                                                                    \
  template void dense_backward<T>(int, int, std::span<const T>, std::span<const T>, std::span<const T>,            \
                                  std::span<T>, std::span<T>, std::span<T>);

VFSS_INSTANTIATE(float)
VFSS_INSTANTIATE(double)

#undef VFSS_INSTANTIATE

}  // namespace vfss::kernels
