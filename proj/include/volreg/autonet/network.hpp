#pragma once

// The regression CNN: a stack of conv -> batch-norm -> ReLU blocks, spatial
// dropout after the last block, global average pooling and a two-output tanh
// layer (VFI, MD). Convolutions have no bias; batch-norm beta takes its role.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "volreg/autonet/conv3d.hpp"
#include "volreg/autonet/layers.hpp"
#include "volreg/rng.hpp"
#include "volreg/tensor.hpp"

namespace volreg::autonet {

struct ConvLayerSpec {
  std::size_t out_channels = 32;
  std::size_t kernel_size = 3;
  std::size_t stride = 1;
  bool operator==(const ConvLayerSpec&) const = default;
};

struct NetworkSpec {
  std::vector<ConvLayerSpec> conv_layers;
  double dropout_rate = 0.2;
  std::size_t outputs = 2;
  Extents3 input_shape{64, 64, 128};
  std::size_t input_channels = 1;

  /// Five blocks, 32 filters each, kernels 7-5-3-3-3, strides 2-1-1-1-1,
  /// dropout 0.2, on 64x64x128 single-channel input.
  static NetworkSpec standard();

  /// The standard layer pattern on another input shape and filter count.
  static NetworkSpec standard_scaled(const Extents3& input_shape, std::size_t channels);

  void validate() const;
  std::size_t final_channels() const { return conv_layers.back().out_channels; }
  /// Spatial extents after each block.
  std::vector<Extents3> block_extents() const;

  std::string describe() const;
  static NetworkSpec parse(const std::string& layers, double dropout, const std::string& input);
  std::string layers_string() const;
  std::string input_string() const;

  bool operator==(const NetworkSpec&) const = default;
};

/// Count of all stored parameters, including batch-norm running statistics:
///   sum_l k_l^3 * c_{l-1} * c_l + 4 * sum_l c_l + c_L * outputs + outputs
std::size_t parameter_count(const NetworkSpec& spec);
/// Same, excluding running statistics.
std::size_t trainable_parameter_count(const NetworkSpec& spec);

template <class T>
struct Parameters {
  std::vector<BasicTensor<T>> conv_weight;  // [k, k, k, in, out]
  std::vector<BasicTensor<T>> bn_gamma;     // [c]
  std::vector<BasicTensor<T>> bn_beta;
  std::vector<BasicTensor<T>> bn_mean;
  std::vector<BasicTensor<T>> bn_var;
  BasicTensor<T> head_weight;  // [c, outputs]
  BasicTensor<T> head_bias;    // [outputs]

  /// Trainable tensors in a fixed order with stable names.
  std::vector<std::pair<std::string, BasicTensor<T>*>> trainable();
  std::vector<std::pair<std::string, const BasicTensor<T>*>> trainable() const;
  /// Trainable tensors followed by running statistics.
  std::vector<std::pair<std::string, const BasicTensor<T>*>> all() const;
  std::vector<std::pair<std::string, BasicTensor<T>*>> all();

  std::size_t count() const;

  template <class U>
  Parameters<U> cast() const;

  bool operator==(const Parameters&) const = default;
};

/// Conv weights ~ N(0, 2/fan_in); head weights ~ U(-l, l) with
/// l = sqrt(6/(fan_in + fan_out)); gamma = 1, beta = 0, running mean 0,
/// running var 1. Values are drawn in double so both precisions agree.
template <class T>
Parameters<T> build_network(const NetworkSpec& spec, std::uint64_t seed);

template <class T>
struct ForwardTrace {
  std::vector<BasicTensor<T>> block_input;  // conv input of each block
  std::vector<BatchNormCache<T>> bn;
  std::vector<BasicTensor<T>> block_output;  // post-ReLU
  std::vector<T> dropout_scale;              // per (sample, channel)
  BasicTensor<T> features;                   // after dropout
  HeadOutput<T> head;
};

struct ForwardOptions {
  Mode mode = Mode::Infer;
  Rng* dropout_rng = nullptr;
  bool update_running_stats = true;
};

/// input: [N, C_in, x, y, z].
template <class T>
HeadOutput<T> network_forward(const NetworkSpec& spec, Parameters<T>& params, const BasicTensor<T>& input,
                              const ForwardOptions& opts, ForwardTrace<T>* trace = nullptr);

/// Final block feature maps (post-ReLU, dropout off, batch-norm in infer mode).
template <class T>
BasicTensor<T> final_features(const NetworkSpec& spec, const Parameters<T>& params, const BasicTensor<T>& input);

/// Backpropagates d(loss)/d(pre-tanh activation) through a traced forward
/// pass. Returned running-statistic entries are left empty.
template <class T>
Parameters<T> network_backward(const NetworkSpec& spec, const Parameters<T>& params, const ForwardTrace<T>& trace,
                               const BasicTensor<T>& grad_activation);

/// Mean over samples of the squared error summed over outputs.
template <class T>
double mse_loss(const BasicTensor<T>& output, const BasicTensor<T>& target);

/// d(mse_loss)/d(pre-tanh activation).
template <class T>
BasicTensor<T> mse_grad_activation(const BasicTensor<T>& output, const BasicTensor<T>& target);

extern template struct Parameters<float>;
extern template struct Parameters<double>;

}  // namespace volreg::autonet
