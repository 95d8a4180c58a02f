#pragma once

// 3D convolution with zero "same" padding over NCxyz activations and
// [kx, ky, kz, in, out] weights (cross-correlation convention).
//
// Every forward output element is accumulated as
//   acc = 0; for kx, ky, kz, ci: acc = multiply_add(x, w, acc)
// in exactly that order. The kernels below vectorize across output z and
// across blocks of output channels, which keeps that per-element order.

#include <algorithm>
#include <cstddef>
#include <vector>

#include "volreg/common.hpp"
#include "volreg/tensor.hpp"

namespace volreg::autonet {

inline std::size_t same_output_extent(std::size_t in, std::size_t stride) { return (in + stride - 1) / stride; }

inline std::size_t same_pad_total(std::size_t in, std::size_t kernel, std::size_t stride) {
  const std::size_t out = same_output_extent(in, stride);
  const std::size_t need = (out - 1) * stride + kernel;
  return need > in ? need - in : 0;
}

/// Leading zero padding; trailing padding gets the odd remainder.
inline std::size_t same_pad_before(std::size_t in, std::size_t kernel, std::size_t stride) {
  return same_pad_total(in, kernel, stride) / 2;
}

template <class T>
struct ConvGradients {
  BasicTensor<T> grad_input;  // empty when not requested
  BasicTensor<T> grad_weight;
};

namespace detail {

template <class T>
inline constexpr std::size_t kLanes = 64 / sizeof(T);
inline constexpr std::size_t kChannelBlock = 8;

struct ConvGeometry {
  std::size_t n = 0, cin = 0, cout = 0, stride = 1;
  std::array<std::size_t, 3> in{}, out{}, kernel{}, pad{}, padded{};
  std::size_t z_blocks = 0;
  std::size_t row = 0;  // allocated length of one padded z row
  std::size_t cout_blocks = 0;

  std::size_t taps() const { return kernel[0] * kernel[1] * kernel[2]; }
};

template <class T>
ConvGeometry conv_geometry(const BasicTensor<T>& input, const BasicTensor<T>& weight, std::size_t stride) {
  if (stride < 1) throw InvalidArgument("conv3d stride must be >= 1");
  if (input.rank() != 5) throw InvalidArgument("conv3d input must be rank 5 (N,C,x,y,z), got " + shape_string(input.shape()));
  if (weight.rank() != 5) throw InvalidArgument("conv3d weight must be rank 5 (kx,ky,kz,in,out), got " + shape_string(weight.shape()));
  if (weight.extent(3) != input.extent(1)) {
    throw InvalidArgument("conv3d channel mismatch: input has " + std::to_string(input.extent(1)) +
                          " channels, weight expects " + std::to_string(weight.extent(3)));
  }
  ConvGeometry g;
  g.n = input.extent(0);
  g.cin = input.extent(1);
  g.cout = weight.extent(4);
  g.stride = stride;
  for (int a = 0; a < 3; ++a) {
    g.in[a] = input.extent(2 + a);
    g.kernel[a] = weight.extent(a);
    g.out[a] = same_output_extent(g.in[a], stride);
    g.pad[a] = same_pad_before(g.in[a], g.kernel[a], stride);
    g.padded[a] = std::max(g.in[a] + same_pad_total(g.in[a], g.kernel[a], stride), g.in[a]);
  }
  constexpr std::size_t L = kLanes<T>;
  g.z_blocks = (g.out[2] + L - 1) / L;
  g.row = std::max(g.padded[2], (g.z_blocks * L - 1) * stride + g.kernel[2]);
  g.cout_blocks = (g.cout + kChannelBlock - 1) / kChannelBlock;
  return g;
}

template <class T>
std::vector<T> pad_sample(const BasicTensor<T>& input, std::size_t n, const ConvGeometry& g) {
  std::vector<T> pad(g.cin * g.padded[0] * g.padded[1] * g.row, T{0});
  const std::size_t vol = g.in[0] * g.in[1] * g.in[2];
  for (std::size_t c = 0; c < g.cin; ++c) {
    const T* src = input.raw() + (n * g.cin + c) * vol;
    for (std::size_t x = 0; x < g.in[0]; ++x) {
      for (std::size_t y = 0; y < g.in[1]; ++y) {
        T* dst = pad.data() + ((c * g.padded[0] + x + g.pad[0]) * g.padded[1] + y + g.pad[1]) * g.row + g.pad[2];
        std::copy_n(src + (x * g.in[1] + y) * g.in[2], g.in[2], dst);
      }
    }
  }
  return pad;
}

/// Weights regrouped as [cout_block][tap][ci][8], zero beyond cout.
template <class T>
std::vector<T> block_weights(const BasicTensor<T>& weight, const ConvGeometry& g) {
  constexpr std::size_t B = kChannelBlock;
  const std::size_t taps = g.taps();
  std::vector<T> out(g.cout_blocks * taps * g.cin * B, T{0});
  for (std::size_t t = 0; t < taps; ++t) {
    for (std::size_t ci = 0; ci < g.cin; ++ci) {
      for (std::size_t co = 0; co < g.cout; ++co) {
        out[(((co / B) * taps + t) * g.cin + ci) * B + co % B] = weight[(t * g.cin + ci) * g.cout + co];
      }
    }
  }
  return out;
}

/// grad_out for one sample as [cout block][ox][oy][8][oz padded to lanes],
/// zero in the padding. Keeping a block's 8 channel rows adjacent avoids
/// cache-set conflicts between power-of-two channel strides.
template <class T>
std::vector<T> block_grad_out(const BasicTensor<T>& grad_out, std::size_t n, const ConvGeometry& g) {
  constexpr std::size_t L = kLanes<T>;
  const std::size_t zp = g.z_blocks * L;
  const std::size_t cpad = g.cout_blocks * kChannelBlock;
  std::vector<T> out(cpad * g.out[0] * g.out[1] * zp, T{0});
  const std::size_t vol = g.out[0] * g.out[1] * g.out[2];
  for (std::size_t c = 0; c < g.cout; ++c) {
    const T* src = grad_out.raw() + (n * g.cout + c) * vol;
    for (std::size_t x = 0; x < g.out[0]; ++x) {
      for (std::size_t y = 0; y < g.out[1]; ++y) {
        std::copy_n(src + (x * g.out[1] + y) * g.out[2], g.out[2],
                    out.data() + ((((c / kChannelBlock) * g.out[0] + x) * g.out[1] + y) * kChannelBlock + c % kChannelBlock) * zp);
      }
    }
  }
  return out;
}

template <class T, std::size_t S>
inline void forward_block(const T* pad, const T* wblk, const ConvGeometry& g, std::size_t stride, std::size_t ox,
                          std::size_t oy, std::size_t ob, T (&result)[kChannelBlock][kLanes<T>]) {
  constexpr std::size_t B = kChannelBlock;
  constexpr std::size_t L = kLanes<T>;
  const std::size_t s = S ? S : stride;
  // local accumulators: the output reference could alias the inputs otherwise
  T acc[B][L];
  for (std::size_t c = 0; c < B; ++c)
    for (std::size_t l = 0; l < L; ++l) acc[c][l] = T{0};
  const T* w = wblk;
  for (std::size_t kx = 0; kx < g.kernel[0]; ++kx) {
    for (std::size_t ky = 0; ky < g.kernel[1]; ++ky) {
      for (std::size_t kz = 0; kz < g.kernel[2]; ++kz) {
        for (std::size_t ci = 0; ci < g.cin; ++ci, w += B) {
          const T* src = pad + ((ci * g.padded[0] + ox * s + kx) * g.padded[1] + oy * s + ky) * g.row + ob * L * s + kz;
          T x[L];
          for (std::size_t l = 0; l < L; ++l) x[l] = src[l * s];
#pragma GCC unroll 8
          for (std::size_t c = 0; c < B; ++c) {
            const T wc = w[c];
            for (std::size_t l = 0; l < L; ++l) acc[c][l] = multiply_add(x[l], wc, acc[c][l]);
          }
        }
      }
    }
  }
  for (std::size_t c = 0; c < B; ++c)
    for (std::size_t l = 0; l < L; ++l) result[c][l] = acc[c][l];
}

template <class T, std::size_t S>
void forward_sample(const BasicTensor<T>& input, std::size_t n, const std::vector<T>& wblk, const ConvGeometry& g,
                    BasicTensor<T>& output) {
  constexpr std::size_t B = kChannelBlock;
  constexpr std::size_t L = kLanes<T>;
  const std::vector<T> pad = pad_sample(input, n, g);
  const std::size_t out_vol = g.out[0] * g.out[1] * g.out[2];
  const std::size_t block_stride = g.taps() * g.cin * B;
  alignas(64) T acc[B][L];
  for (std::size_t cb = 0; cb < g.cout_blocks; ++cb) {
    const std::size_t nc = std::min(B, g.cout - cb * B);
    for (std::size_t ox = 0; ox < g.out[0]; ++ox) {
      for (std::size_t oy = 0; oy < g.out[1]; ++oy) {
        for (std::size_t ob = 0; ob < g.z_blocks; ++ob) {
          forward_block<T, S>(pad.data(), wblk.data() + cb * block_stride, g, g.stride, ox, oy, ob, acc);
          const std::size_t nl = std::min(L, g.out[2] - ob * L);
          for (std::size_t c = 0; c < nc; ++c) {
            T* dst = output.raw() + (n * g.cout + cb * B + c) * out_vol + (ox * g.out[1] + oy) * g.out[2] + ob * L;
            std::copy_n(acc[c], nl, dst);
          }
        }
      }
    }
  }
}

template <class T, std::size_t S>
void backward_input_sample(const std::vector<T>& gblk, const std::vector<T>& wblk, const ConvGeometry& g,
                           std::vector<T>& gin_pad) {
  constexpr std::size_t B = kChannelBlock;
  constexpr std::size_t L = kLanes<T>;
  const std::size_t s = S ? S : g.stride;
  const std::size_t zp = g.z_blocks * L;
  const std::size_t block_stride = g.taps() * g.cin * B;
  alignas(64) T gv[B][L];
  for (std::size_t cb = 0; cb < g.cout_blocks; ++cb) {
    for (std::size_t ox = 0; ox < g.out[0]; ++ox) {
      for (std::size_t oy = 0; oy < g.out[1]; ++oy) {
        for (std::size_t ob = 0; ob < g.z_blocks; ++ob) {
          bool any = false;
          for (std::size_t c = 0; c < B; ++c) {
            const T* src = gblk.data() + (((cb * g.out[0] + ox) * g.out[1] + oy) * B + c) * zp + ob * L;
            for (std::size_t l = 0; l < L; ++l) {
              gv[c][l] = src[l];
              any |= src[l] != T{0};
            }
          }
          if (!any) continue;
          const T* w = wblk.data() + cb * block_stride;
          for (std::size_t kx = 0; kx < g.kernel[0]; ++kx) {
            for (std::size_t ky = 0; ky < g.kernel[1]; ++ky) {
              for (std::size_t kz = 0; kz < g.kernel[2]; ++kz) {
                for (std::size_t ci = 0; ci < g.cin; ++ci, w += B) {
                  T* dst = gin_pad.data() + ((ci * g.padded[0] + ox * s + kx) * g.padded[1] + oy * s + ky) * g.row + ob * L * s + kz;
                  T sum[L];
                  for (std::size_t l = 0; l < L; ++l) sum[l] = T{0};
#pragma GCC unroll 8
                  for (std::size_t c = 0; c < B; ++c) {
                    const T wc = w[c];
                    for (std::size_t l = 0; l < L; ++l) sum[l] = multiply_add(gv[c][l], wc, sum[l]);
                  }
                  for (std::size_t l = 0; l < L; ++l) dst[l * s] += sum[l];
                }
              }
            }
          }
        }
      }
    }
  }
}

/// Lane partial sums of d(loss)/d(w[tap, ci, cb*8 + c]) for one tap and
/// input channel, accumulated over all output positions.
template <class T, std::size_t S>
inline void weight_block(const T* in_base, const T* g_base, const ConvGeometry& g, std::size_t stride,
                         T (&result)[kChannelBlock][kLanes<T>]) {
  constexpr std::size_t B = kChannelBlock;
  constexpr std::size_t L = kLanes<T>;
  const std::size_t s = S ? S : stride;
  const std::size_t zp = g.z_blocks * L;
  T acc[B][L];
  for (std::size_t c = 0; c < B; ++c)
    for (std::size_t l = 0; l < L; ++l) acc[c][l] = T{0};
  for (std::size_t ox = 0; ox < g.out[0]; ++ox) {
    for (std::size_t oy = 0; oy < g.out[1]; ++oy) {
      const T* in_row = in_base + (ox * s * g.padded[1] + oy * s) * g.row;
      const T* g_row = g_base + (ox * g.out[1] + oy) * B * zp;
      for (std::size_t ob = 0; ob < g.z_blocks; ++ob) {
        T x[L];
        for (std::size_t l = 0; l < L; ++l) x[l] = in_row[(ob * L + l) * s];
#pragma GCC unroll 8
        for (std::size_t c = 0; c < B; ++c) {
          const T* gc = g_row + c * zp + ob * L;
          for (std::size_t l = 0; l < L; ++l) acc[c][l] = multiply_add(x[l], gc[l], acc[c][l]);
        }
      }
    }
  }
  for (std::size_t c = 0; c < B; ++c)
    for (std::size_t l = 0; l < L; ++l) result[c][l] = acc[c][l];
}

template <class T, std::size_t S>
void backward_weight_sample(const std::vector<T>& pad, const std::vector<T>& gblk, const ConvGeometry& g,
                            std::vector<T>& gw /* [tap][ci][cout] */) {
  constexpr std::size_t B = kChannelBlock;
  constexpr std::size_t L = kLanes<T>;
  const std::size_t zp = g.z_blocks * L;
  alignas(64) T acc[B][L];
  std::size_t tap = 0;
  for (std::size_t kx = 0; kx < g.kernel[0]; ++kx) {
    for (std::size_t ky = 0; ky < g.kernel[1]; ++ky) {
      for (std::size_t kz = 0; kz < g.kernel[2]; ++kz, ++tap) {
        for (std::size_t ci = 0; ci < g.cin; ++ci) {
          const T* in_base = pad.data() + ((ci * g.padded[0] + kx) * g.padded[1] + ky) * g.row + kz;
          for (std::size_t cb = 0; cb < g.cout_blocks; ++cb) {
            weight_block<T, S>(in_base, gblk.data() + cb * g.out[0] * g.out[1] * B * zp, g, g.stride, acc);
            const std::size_t nc = std::min(B, g.cout - cb * B);
            for (std::size_t c = 0; c < nc; ++c) {
              T total{0};
              for (std::size_t l = 0; l < L; ++l) total += acc[c][l];
              gw[(tap * g.cin + ci) * g.cout + cb * B + c] += total;
            }
          }
        }
      }
    }
  }
}

template <class T, class Fn>
void dispatch_stride(std::size_t stride, Fn&& fn) {
  if (stride == 1) {
    fn(std::integral_constant<std::size_t, 1>{});
  } else if (stride == 2) {
    fn(std::integral_constant<std::size_t, 2>{});
  } else {
    fn(std::integral_constant<std::size_t, 0>{});
  }
}

}  // namespace detail

/// Output spatial extents are ceil(in / stride).
template <class T>
BasicTensor<T> conv3d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weight, std::size_t stride) {
  const detail::ConvGeometry g = detail::conv_geometry(input, weight, stride);
  BasicTensor<T> output({g.n, g.cout, g.out[0], g.out[1], g.out[2]});
  const std::vector<T> wblk = detail::block_weights(weight, g);
  detail::dispatch_stride<T>(stride, [&](auto s) {
    parallel_for(g.n, [&](std::size_t n) { detail::forward_sample<T, decltype(s)::value>(input, n, wblk, g, output); });
  });
  return output;
}

/// Gradients of conv3d_forward. Per-sample weight gradients are summed in
/// sample order, so the result does not depend on thread scheduling.
template <class T>
ConvGradients<T> conv3d_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& input,
                                 const BasicTensor<T>& weight, std::size_t stride, bool need_input_grad = true) {
  const detail::ConvGeometry g = detail::conv_geometry(input, weight, stride);
  const Shape expected{g.n, g.cout, g.out[0], g.out[1], g.out[2]};
  if (grad_out.shape() != expected) {
    throw InvalidArgument("conv3d_backward grad_out shape " + shape_string(grad_out.shape()) + " expected " +
                          shape_string(expected));
  }
  ConvGradients<T> result;
  // Unit stride with odd kernels: the input gradient is a same-padded
  // convolution of grad_out with the flipped, channel-transposed kernel.
  const bool odd_kernels = g.kernel[0] % 2 == 1 && g.kernel[1] % 2 == 1 && g.kernel[2] % 2 == 1;
  const bool transposed_path = need_input_grad && stride == 1 && odd_kernels;
  if (transposed_path) {
    BasicTensor<T> flipped({g.kernel[0], g.kernel[1], g.kernel[2], g.cout, g.cin});
    for (std::size_t kx = 0; kx < g.kernel[0]; ++kx)
      for (std::size_t ky = 0; ky < g.kernel[1]; ++ky)
        for (std::size_t kz = 0; kz < g.kernel[2]; ++kz)
          for (std::size_t ci = 0; ci < g.cin; ++ci)
            for (std::size_t co = 0; co < g.cout; ++co)
              flipped(g.kernel[0] - 1 - kx, g.kernel[1] - 1 - ky, g.kernel[2] - 1 - kz, co, ci) = weight(kx, ky, kz, ci, co);
    result.grad_input = conv3d_forward(grad_out, flipped, 1);
    need_input_grad = false;
  }
  const std::vector<T> wblk = detail::block_weights(weight, g);
  const std::size_t wsize = weight.size();
  std::vector<std::vector<T>> per_sample(g.n, std::vector<T>(wsize, T{0}));
  if (need_input_grad) result.grad_input = BasicTensor<T>(input.shape());
  const std::size_t in_vol = g.in[0] * g.in[1] * g.in[2];

  detail::dispatch_stride<T>(stride, [&](auto s) {
    constexpr std::size_t S = decltype(s)::value;
    parallel_for(g.n, [&](std::size_t n) {
      const std::vector<T> gblk = detail::block_grad_out(grad_out, n, g);
      const std::vector<T> pad = detail::pad_sample(input, n, g);
      detail::backward_weight_sample<T, S>(pad, gblk, g, per_sample[n]);
      if (!need_input_grad) return;
      std::vector<T> gin_pad(pad.size(), T{0});
      detail::backward_input_sample<T, S>(gblk, wblk, g, gin_pad);
      for (std::size_t c = 0; c < g.cin; ++c) {
        T* dst = result.grad_input.raw() + (n * g.cin + c) * in_vol;
        for (std::size_t x = 0; x < g.in[0]; ++x) {
          for (std::size_t y = 0; y < g.in[1]; ++y) {
            const T* src = gin_pad.data() + ((c * g.padded[0] + x + g.pad[0]) * g.padded[1] + y + g.pad[1]) * g.row + g.pad[2];
            std::copy_n(src, g.in[2], dst + (x * g.in[1] + y) * g.in[2]);
          }
        }
      }
    });
  });

  result.grad_weight = BasicTensor<T>(weight.shape());
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t i = 0; i < wsize; ++i) result.grad_weight[i] += per_sample[n][i];
  }
  return result;
}

}  // namespace volreg::autonet
