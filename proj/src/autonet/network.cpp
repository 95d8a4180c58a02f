#include "volreg/autonet/network.hpp"

#include <sstream>

namespace volreg::autonet {

NetworkSpec NetworkSpec::standard() { return standard_scaled({64, 64, 128}, 32); }

NetworkSpec NetworkSpec::standard_scaled(const Extents3& input_shape, std::size_t channels) {
  NetworkSpec spec;
  spec.conv_layers = {{channels, 7, 2}, {channels, 5, 1}, {channels, 3, 1}, {channels, 3, 1}, {channels, 3, 1}};
  spec.dropout_rate = 0.2;
  spec.outputs = 2;
  spec.input_shape = input_shape;
  spec.input_channels = 1;
  return spec;
}

std::vector<Extents3> NetworkSpec::block_extents() const {
  std::vector<Extents3> out;
  Extents3 e = input_shape;
  for (const auto& layer : conv_layers) {
    for (auto& v : e) v = same_output_extent(v, layer.stride);
    out.push_back(e);
  }
  return out;
}

void NetworkSpec::validate() const {
  if (conv_layers.empty()) throw InvalidArgument("network needs at least one conv layer");
  if (!(dropout_rate >= 0.0) || dropout_rate >= 1.0) throw InvalidArgument("dropout rate must be in [0, 1)");
  if (outputs < 1) throw InvalidArgument("network needs at least one output");
  if (input_channels < 1) throw InvalidArgument("input channels must be >= 1");
  Extents3 e = input_shape;
  for (std::size_t a = 0; a < 3; ++a) {
    if (e[a] < 1) throw InvalidArgument("input extents must be >= 1");
  }
  for (std::size_t l = 0; l < conv_layers.size(); ++l) {
    const auto& layer = conv_layers[l];
    if (layer.out_channels < 1 || layer.kernel_size < 1 || layer.stride < 1) {
      throw InvalidArgument("conv layer " + std::to_string(l) + " has a zero channel count, kernel or stride");
    }
    for (std::size_t a = 0; a < 3; ++a) {
      // taps beyond the data on both sides would only ever see padding
      if (layer.kernel_size > e[a]) {
        throw InvalidArgument("conv layer " + std::to_string(l) + " kernel " + std::to_string(layer.kernel_size) +
                              " is larger than its input extent " + std::to_string(e[a]) + " on axis " +
                              std::to_string(a));
      }
      e[a] = same_output_extent(e[a], layer.stride);
    }
  }
}

std::string NetworkSpec::layers_string() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < conv_layers.size(); ++i) {
    if (i) os << ',';
    os << conv_layers[i].out_channels << ':' << conv_layers[i].kernel_size << ':' << conv_layers[i].stride;
  }
  return os.str();
}

std::string NetworkSpec::input_string() const {
  return std::to_string(input_shape[0]) + "x" + std::to_string(input_shape[1]) + "x" + std::to_string(input_shape[2]) +
         "x" + std::to_string(input_channels);
}

std::string NetworkSpec::describe() const {
  return "conv=" + layers_string() + " dropout=" + std::to_string(dropout_rate) + " input=" + input_string();
}

NetworkSpec NetworkSpec::parse(const std::string& layers, double dropout, const std::string& input) {
  NetworkSpec spec;
  spec.dropout_rate = dropout;
  std::istringstream ls(layers);
  std::string item;
  while (std::getline(ls, item, ',')) {
    ConvLayerSpec l;
    char c1 = 0, c2 = 0;
    std::istringstream is(item);
    if (!(is >> l.out_channels >> c1 >> l.kernel_size >> c2 >> l.stride) || c1 != ':' || c2 != ':') {
      throw InvalidArgument("bad conv layer description '" + item + "'");
    }
    spec.conv_layers.push_back(l);
  }
  std::istringstream in(input);
  char x1 = 0, x2 = 0, x3 = 0;
  if (!(in >> spec.input_shape[0] >> x1 >> spec.input_shape[1] >> x2 >> spec.input_shape[2] >> x3 >> spec.input_channels) ||
      x1 != 'x' || x2 != 'x' || x3 != 'x') {
    throw InvalidArgument("bad input shape description '" + input + "'");
  }
  spec.validate();
  return spec;
}

std::size_t trainable_parameter_count(const NetworkSpec& spec) {
  std::size_t total = 0, in = spec.input_channels;
  for (const auto& l : spec.conv_layers) {
    total += l.kernel_size * l.kernel_size * l.kernel_size * in * l.out_channels + 2 * l.out_channels;
    in = l.out_channels;
  }
  return total + in * spec.outputs + spec.outputs;
}

std::size_t parameter_count(const NetworkSpec& spec) {
  std::size_t stats = 0;
  for (const auto& l : spec.conv_layers) stats += 2 * l.out_channels;
  return trainable_parameter_count(spec) + stats;
}

template <class T>
std::vector<std::pair<std::string, BasicTensor<T>*>> Parameters<T>::trainable() {
  std::vector<std::pair<std::string, BasicTensor<T>*>> out;
  for (std::size_t l = 0; l < conv_weight.size(); ++l) {
    const std::string p = "block" + std::to_string(l) + ".";
    out.emplace_back(p + "conv.weight", &conv_weight[l]);
    out.emplace_back(p + "bn.gamma", &bn_gamma[l]);
    out.emplace_back(p + "bn.beta", &bn_beta[l]);
  }
  out.emplace_back("head.weight", &head_weight);
  out.emplace_back("head.bias", &head_bias);
  return out;
}

template <class T>
std::vector<std::pair<std::string, const BasicTensor<T>*>> Parameters<T>::trainable() const {
  std::vector<std::pair<std::string, const BasicTensor<T>*>> out;
  for (auto& [name, ptr] : const_cast<Parameters*>(this)->trainable()) out.emplace_back(name, ptr);
  return out;
}

template <class T>
std::vector<std::pair<std::string, BasicTensor<T>*>> Parameters<T>::all() {
  auto out = trainable();
  for (std::size_t l = 0; l < bn_mean.size(); ++l) {
    const std::string p = "block" + std::to_string(l) + ".";
    out.emplace_back(p + "bn.running_mean", &bn_mean[l]);
    out.emplace_back(p + "bn.running_var", &bn_var[l]);
  }
  return out;
}

template <class T>
std::vector<std::pair<std::string, const BasicTensor<T>*>> Parameters<T>::all() const {
  std::vector<std::pair<std::string, const BasicTensor<T>*>> out;
  for (auto& [name, ptr] : const_cast<Parameters*>(this)->all()) out.emplace_back(name, ptr);
  return out;
}

template <class T>
std::size_t Parameters<T>::count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : all()) n += t->size();
  return n;
}

template <class T>
template <class U>
Parameters<U> Parameters<T>::cast() const {
  Parameters<U> out;
  auto conv = [](const std::vector<BasicTensor<T>>& v) {
    std::vector<BasicTensor<U>> r;
    for (const auto& t : v) r.push_back(BasicTensor<U>::cast_from(t));
    return r;
  };
  out.conv_weight = conv(conv_weight);
  out.bn_gamma = conv(bn_gamma);
  out.bn_beta = conv(bn_beta);
  out.bn_mean = conv(bn_mean);
  out.bn_var = conv(bn_var);
  out.head_weight = BasicTensor<U>::cast_from(head_weight);
  out.head_bias = BasicTensor<U>::cast_from(head_bias);
  return out;
}

template <class T>
Parameters<T> build_network(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  Parameters<T> p;
  Rng rng(derive_seed(seed, 0x6E6574));
  std::size_t in = spec.input_channels;
  for (const auto& layer : spec.conv_layers) {
    const std::size_t k = layer.kernel_size;
    const std::size_t fan_in = k * k * k * in;
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    BasicTensor<T> w({k, k, k, in, layer.out_channels});
    for (auto& v : w.data()) v = static_cast<T>(rng.normal() * stddev);
    p.conv_weight.push_back(std::move(w));
    p.bn_gamma.emplace_back(Shape{layer.out_channels}, T{1});
    p.bn_beta.emplace_back(Shape{layer.out_channels}, T{0});
    p.bn_mean.emplace_back(Shape{layer.out_channels}, T{0});
    p.bn_var.emplace_back(Shape{layer.out_channels}, T{1});
    in = layer.out_channels;
  }
  const double limit = std::sqrt(6.0 / static_cast<double>(in + spec.outputs));
  p.head_weight = BasicTensor<T>({in, spec.outputs});
  for (auto& v : p.head_weight.data()) v = static_cast<T>(rng.uniform(-limit, limit));
  p.head_bias = BasicTensor<T>({spec.outputs}, T{0});
  return p;
}

namespace {

template <class T>
std::vector<T> as_vector(const BasicTensor<T>& t) {
  return {t.data().begin(), t.data().end()};
}

template <class T>
void check_input(const NetworkSpec& spec, const BasicTensor<T>& input) {
  if (input.rank() != 5 || input.extent(1) != spec.input_channels || input.extent(2) != spec.input_shape[0] ||
      input.extent(3) != spec.input_shape[1] || input.extent(4) != spec.input_shape[2]) {
    throw InvalidArgument("network input " + shape_string(input.shape()) + " does not match spec input " +
                          spec.input_string());
  }
}

}  // namespace

template <class T>
HeadOutput<T> network_forward(const NetworkSpec& spec, Parameters<T>& params, const BasicTensor<T>& input,
                              const ForwardOptions& opts, ForwardTrace<T>* trace) {
  check_input(spec, input);
  if (trace) *trace = ForwardTrace<T>{};
  BasicTensor<T> x = input;
  for (std::size_t l = 0; l < spec.conv_layers.size(); ++l) {
    BasicTensor<T> conv = conv3d_forward(x, params.conv_weight[l], spec.conv_layers[l].stride);
    if (trace) trace->block_input.push_back(std::move(x));
    BatchNormState<T> state{as_vector(params.bn_mean[l]), as_vector(params.bn_var[l])};
    BatchNormCache<T> cache;
    BasicTensor<T> y = batchnorm_forward(conv, as_vector(params.bn_gamma[l]), as_vector(params.bn_beta[l]), state,
                                         opts.mode, trace ? &cache : nullptr, opts.update_running_stats);
    if (opts.mode == Mode::Train && opts.update_running_stats) {
      std::copy(state.running_mean.begin(), state.running_mean.end(), params.bn_mean[l].data().begin());
      std::copy(state.running_var.begin(), state.running_var.end(), params.bn_var[l].data().begin());
    }
    relu_inplace(y);
    if (trace) {
      trace->bn.push_back(std::move(cache));
      trace->block_output.push_back(y);
    }
    x = std::move(y);
  }
  std::vector<T> scale;
  BasicTensor<T> features = spatial_dropout3d(x, spec.dropout_rate, opts.mode, opts.dropout_rng, &scale);
  HeadOutput<T> head = gap_head_forward(features, params.head_weight, params.head_bias);
  if (trace) {
    trace->dropout_scale = std::move(scale);
    trace->features = std::move(features);
    trace->head = head;
  }
  return head;
}

template <class T>
BasicTensor<T> final_features(const NetworkSpec& spec, const Parameters<T>& params, const BasicTensor<T>& input) {
  check_input(spec, input);
  BasicTensor<T> x = input;
  for (std::size_t l = 0; l < spec.conv_layers.size(); ++l) {
    BasicTensor<T> conv = conv3d_forward(x, params.conv_weight[l], spec.conv_layers[l].stride);
    BatchNormState<T> state{as_vector(params.bn_mean[l]), as_vector(params.bn_var[l])};
    x = batchnorm_forward(conv, as_vector(params.bn_gamma[l]), as_vector(params.bn_beta[l]), state, Mode::Infer);
    relu_inplace(x);
  }
  return x;
}

template <class T>
Parameters<T> network_backward(const NetworkSpec& spec, const Parameters<T>& params, const ForwardTrace<T>& trace,
                               const BasicTensor<T>& grad_activation) {
  const auto& feats = trace.features;
  const std::size_t n = feats.extent(0), channels = feats.extent(1), outputs = spec.outputs;
  const std::size_t inner = feats.size() / (n * channels);
  if (grad_activation.shape() != Shape{n, outputs}) throw InvalidArgument("grad_activation shape mismatch");

  Parameters<T> grads;
  grads.head_weight = BasicTensor<T>({channels, outputs});
  grads.head_bias = BasicTensor<T>({outputs});
  for (std::size_t j = 0; j < outputs; ++j) {
    double gb = 0.0;
    for (std::size_t b = 0; b < n; ++b) gb += grad_activation(b, j);
    grads.head_bias[j] = static_cast<T>(gb);
    for (std::size_t k = 0; k < channels; ++k) {
      double gw = 0.0;
      for (std::size_t b = 0; b < n; ++b) gw += static_cast<double>(grad_activation(b, j)) * trace.head.pooled(b, k);
      grads.head_weight(k, j) = static_cast<T>(gw);
    }
  }

  // through GAP, dropout and the last ReLU
  BasicTensor<T> grad(feats.shape());
  const double inv_inner = 1.0 / static_cast<double>(inner);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t k = 0; k < channels; ++k) {
      double gp = 0.0;
      for (std::size_t j = 0; j < outputs; ++j) gp += static_cast<double>(grad_activation(b, j)) * params.head_weight(k, j);
      const T g = static_cast<T>(gp * inv_inner * trace.dropout_scale[b * channels + k]);
      const std::size_t off = (b * channels + k) * inner;
      for (std::size_t i = 0; i < inner; ++i) grad[off + i] = g;
    }
  }

  const std::size_t blocks = spec.conv_layers.size();
  grads.conv_weight.resize(blocks);
  grads.bn_gamma.resize(blocks);
  grads.bn_beta.resize(blocks);
  for (std::size_t l = blocks; l-- > 0;) {
    const auto& out = trace.block_output[l];
    for (std::size_t i = 0; i < grad.size(); ++i) {
      if (!(out[i] > T{0})) grad[i] = T{0};
    }
    BatchNormGradients<T> bn = batchnorm_backward(grad, trace.bn[l], as_vector(params.bn_gamma[l]));
    const Shape channel_shape{bn.grad_gamma.size()};
    grads.bn_gamma[l] = BasicTensor<T>(channel_shape, std::move(bn.grad_gamma));
    grads.bn_beta[l] = BasicTensor<T>(channel_shape, std::move(bn.grad_beta));
    ConvGradients<T> cg =
        conv3d_backward(bn.grad_input, trace.block_input[l], params.conv_weight[l], spec.conv_layers[l].stride, l > 0);
    grads.conv_weight[l] = std::move(cg.grad_weight);
    grad = std::move(cg.grad_input);
  }
  return grads;
}

template <class T>
double mse_loss(const BasicTensor<T>& output, const BasicTensor<T>& target) {
  if (output.shape() != target.shape()) throw InvalidArgument("mse_loss shape mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < output.size(); ++i) {
    const double d = static_cast<double>(output[i]) - target[i];
    sum += d * d;
  }
  return sum / static_cast<double>(output.extent(0));
}

template <class T>
BasicTensor<T> mse_grad_activation(const BasicTensor<T>& output, const BasicTensor<T>& target) {
  if (output.shape() != target.shape()) throw InvalidArgument("mse_grad shape mismatch");
  BasicTensor<T> g(output.shape());
  const double scale = 2.0 / static_cast<double>(output.extent(0));
  for (std::size_t i = 0; i < output.size(); ++i) {
    const double y = output[i];
    g[i] = static_cast<T>(scale * (y - target[i]) * (1.0 - y * y));
  }
  return g;
}

template struct Parameters<float>;
template struct Parameters<double>;
template Parameters<double> Parameters<float>::cast<double>() const;
template Parameters<float> Parameters<double>::cast<float>() const;
template Parameters<float> Parameters<float>::cast<float>() const;
template Parameters<double> Parameters<double>::cast<double>() const;

#define VOLREG_INSTANTIATE(T)                                                                                       \
  template Parameters<T> build_network<T>(const NetworkSpec&, std::uint64_t);                                      \
  template HeadOutput<T> network_forward<T>(const NetworkSpec&, Parameters<T>&, const BasicTensor<T>&,              \
                                            const ForwardOptions&, ForwardTrace<T>*);                               \
  template BasicTensor<T> final_features<T>(const NetworkSpec&, const Parameters<T>&, const BasicTensor<T>&);       \
  template Parameters<T> network_backward<T>(const NetworkSpec&, const Parameters<T>&, const ForwardTrace<T>&,      \
                                             const BasicTensor<T>&);                                                \
  template double mse_loss<T>(const BasicTensor<T>&, const BasicTensor<T>&);                                        \
  template BasicTensor<T> mse_grad_activation<T>(const BasicTensor<T>&, const BasicTensor<T>&);

VOLREG_INSTANTIATE(float)
VOLREG_INSTANTIATE(double)

}  // namespace volreg::autonet
