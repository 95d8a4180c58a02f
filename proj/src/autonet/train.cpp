#include "volreg/autonet/train.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "volreg/eval/metrics.hpp"

namespace volreg::autonet {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw InvalidArgument("learning rate must be finite and >= 0");
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if (!(scaling.vfi_half > 0.0) || !(scaling.md_half > 0.0)) throw InvalidArgument("label half ranges must be positive");
}

void Dataset::add(Tensor input, double vfi_value, double md_value) {
  inputs.push_back(std::move(input));
  vfi.push_back(vfi_value);
  md.push_back(md_value);
}

Tensor prepare_input(const Volume& vol, const NetworkSpec& spec) {
  if (spec.input_channels != 1) throw InvalidArgument("volume inputs are single-channel");
  const Volume flipped = flip_laterality(vol);
  const Volume sized = flipped.extents() == spec.input_shape ? flipped : resample_trilinear(flipped, spec.input_shape);
  return normalize_unit_range(sized.voxels);
}

Tensor stack_inputs(const std::vector<Tensor>& inputs, std::span<const std::size_t> indices) {
  if (indices.empty()) throw InvalidArgument("cannot stack an empty batch");
  const Shape& s = inputs.at(indices[0]).shape();
  if (s.size() != 3) throw InvalidArgument("network inputs must be rank 3");
  Tensor batch({indices.size(), 1, s[0], s[1], s[2]});
  const std::size_t vol = shape_product(s);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const Tensor& t = inputs.at(indices[b]);
    if (t.shape() != s) throw InvalidArgument("network inputs differ in shape");
    std::copy(t.data().begin(), t.data().end(), batch.raw() + b * vol);
  }
  return batch;
}

namespace {

void check_dataset(const Dataset& d, const NetworkSpec& spec, const char* what) {
  if (d.size() == 0) throw InvalidArgument(std::string(what) + " set is empty");
  if (d.vfi.size() != d.size() || d.md.size() != d.size()) throw InvalidArgument(std::string(what) + " labels do not match inputs");
  const Shape expected{spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]};
  for (const Tensor& t : d.inputs) {
    if (t.shape() != expected) {
      throw InvalidArgument(std::string(what) + " input " + shape_string(t.shape()) + " does not match spec " + spec.input_string());
    }
  }
}

std::vector<DecodedLabels> predict_with(const NetworkSpec& spec, const Parameters<float>& params,
                                        const LabelScaling& scaling, const std::vector<Tensor>& inputs,
                                        std::size_t batch_size) {
  std::vector<DecodedLabels> out;
  out.reserve(inputs.size());
  Parameters<float> p = params;
  ForwardOptions opts;
  opts.mode = Mode::Infer;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < inputs.size(); start += batch_size) {
    idx.resize(std::min(batch_size, inputs.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const HeadOutput<float> h = network_forward(spec, p, stack_inputs(inputs, idx), opts);
    for (std::size_t b = 0; b < idx.size(); ++b) out.push_back(decode_labels(h.output(b, 0), h.output(b, 1), scaling));
  }
  return out;
}

}  // namespace

Checkpoint train(const Dataset& train_set, const Dataset& validation_set, const NetworkSpec& spec,
                 const TrainConfig& config, const EpochCallback& on_epoch) {
  spec.validate();
  config.validate();
  if (spec.outputs != 2) throw InvalidArgument("training expects the two-output (VFI, MD) head");
  check_dataset(train_set, spec, "training");
  check_dataset(validation_set, spec, "validation");

  Checkpoint ckpt;
  ckpt.spec = spec;
  ckpt.scaling = config.scaling;
  ckpt.seed = config.seed;
  ckpt.learning_rate = config.learning_rate;
  ckpt.epochs = config.epochs;
  ckpt.batch_size = config.batch_size;

  Parameters<float> params = build_network<float>(spec, derive_seed(config.seed, 1));
  Rng order_rng(derive_seed(config.seed, 2));
  Rng dropout_rng(derive_seed(config.seed, 3));
  NadamState<float> state;
  std::size_t step = 0;

  const std::size_t n = train_set.size();
  std::vector<std::array<float, 2>> encoded(n);
  for (std::size_t i = 0; i < n; ++i) {
    const EncodedLabels e = encode_labels(train_set.vfi[i], train_set.md[i], config.scaling);
    encoded[i] = {static_cast<float>(e.vfi), static_cast<float>(e.md)};
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  double best = -std::numeric_limits<double>::infinity();
  bool found = false;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(config.batch_size, n - start));
      const Tensor batch = stack_inputs(train_set.inputs, idx);
      Tensor target({idx.size(), 2});
      for (std::size_t b = 0; b < idx.size(); ++b) {
        target(b, 0) = encoded[idx[b]][0];
        target(b, 1) = encoded[idx[b]][1];
      }
      ForwardOptions opts;
      opts.mode = Mode::Train;
      opts.dropout_rng = &dropout_rng;
      ForwardTrace<float> trace;
      const HeadOutput<float> head = network_forward(spec, params, batch, opts, &trace);
      loss_sum += mse_loss(head.output, target) * static_cast<double>(idx.size());
      Parameters<float> grads = network_backward(spec, params, trace, mse_grad_activation(head.output, target));

      std::vector<NamedGradient<float>> named;
      auto p_list = params.trainable();
      auto g_list = grads.trainable();
      for (std::size_t i = 0; i < p_list.size(); ++i) named.push_back({p_list[i].first, p_list[i].second, g_list[i].second});
      nadam_step(named, state, ++step, config.learning_rate, config.nadam);
    }

    const std::vector<DecodedLabels> pred =
        predict_with(spec, params, config.scaling, validation_set.inputs, config.batch_size);
    std::vector<double> pv(pred.size()), pm(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pv[i] = pred[i].vfi;
      pm[i] = pred[i].md;
    }
    EpochRecord rec{epoch, loss_sum / static_cast<double>(n), eval::pearson_or_nan(pv, validation_set.vfi),
                    eval::pearson_or_nan(pm, validation_set.md)};
    ckpt.log.push_back(rec);
    if (!std::isnan(rec.validation_pc_vfi) && rec.validation_pc_vfi > best) {
      best = rec.validation_pc_vfi;
      found = true;
      ckpt.best_epoch = epoch;
      ckpt.best_validation_pc = best;
      ckpt.params = params;
    }
    if (on_epoch) on_epoch(rec);
  }
  if (!found) throw UndefinedMetric("validation PC of VFI was undefined in every epoch");
  return ckpt;
}

std::vector<DecodedLabels> predict_prepared(const Checkpoint& ckpt, const std::vector<Tensor>& inputs,
                                            std::size_t batch_size) {
  if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if (inputs.empty()) return {};
  return predict_with(ckpt.spec, ckpt.params, ckpt.scaling, inputs, batch_size);
}

DecodedLabels predict(const Checkpoint& ckpt, const Volume& vol) {
  return predict_prepared(ckpt, {prepare_input(vol, ckpt.spec)}).front();
}

store::Container checkpoint_to_container(const Checkpoint& ckpt) {
  store::Container c;
  for (const auto& [name, t] : ckpt.params.all()) c.add(name, *t);
  Tensor64 log({std::max<std::size_t>(ckpt.log.size(), 1), 4}, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < ckpt.log.size(); ++i) {
    const EpochRecord& r = ckpt.log[i];
    log(i, 0) = static_cast<double>(r.epoch);
    log(i, 1) = r.train_loss;
    log(i, 2) = r.validation_pc_vfi;
    log(i, 3) = r.validation_pc_md;
  }
  c.add("train_log", std::move(log));
  using store::format_number;
  c.set("spec.layers", ckpt.spec.layers_string());
  c.set("spec.dropout", format_number(ckpt.spec.dropout_rate));
  c.set("spec.input", ckpt.spec.input_string());
  c.set("spec.outputs", std::to_string(ckpt.spec.outputs));
  c.set("best_epoch", std::to_string(ckpt.best_epoch));
  c.set("best_validation_pc", format_number(ckpt.best_validation_pc));
  c.set("scaling.vfi_mid", format_number(ckpt.scaling.vfi_mid));
  c.set("scaling.vfi_half", format_number(ckpt.scaling.vfi_half));
  c.set("scaling.md_mid", format_number(ckpt.scaling.md_mid));
  c.set("scaling.md_half", format_number(ckpt.scaling.md_half));
  c.set("seed", std::to_string(ckpt.seed));
  c.set("learning_rate", format_number(ckpt.learning_rate));
  c.set("epochs", std::to_string(ckpt.epochs));
  c.set("batch_size", std::to_string(ckpt.batch_size));
  c.set("log_epochs", std::to_string(ckpt.log.size()));
  return c;
}

namespace {

std::size_t require_count(const store::Container& c, const std::string& key) {
  const double v = c.require_number(key);
  if (!(v >= 0.0) || v != std::floor(v)) throw FormatError("metadata '" + key + "' is not a count", 0);
  return static_cast<std::size_t>(v);
}

}  // namespace

Checkpoint checkpoint_from_container(const store::Container& c) {
  Checkpoint ck;
  try {
    ck.spec = NetworkSpec::parse(c.require("spec.layers"), c.require_number("spec.dropout"), c.require("spec.input"));
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid network spec: ") + e.what(), 0);
  }
  ck.spec.outputs = require_count(c, "spec.outputs");
  ck.params = build_network<float>(ck.spec, 0);
  for (auto& [name, t] : ck.params.all()) {
    const Tensor& stored = c.f32(name);
    if (stored.shape() != t->shape()) {
      throw FormatError("tensor '" + name + "' has shape " + shape_string(stored.shape()) + ", spec requires " +
                            shape_string(t->shape()),
                        0);
    }
    *t = stored;
  }
  for (const auto& [name, t] : ck.params.all()) {
    if (name.ends_with("running_var")) {
      for (float v : t->data()) {
        if (!(v > 0.0f)) throw FormatError("running variance must be positive in '" + name + "'", 0);
      }
    }
  }
  ck.best_epoch = require_count(c, "best_epoch");
  ck.best_validation_pc = c.require_number("best_validation_pc");
  ck.scaling = {c.require_number("scaling.vfi_mid"), c.require_number("scaling.vfi_half"),
                c.require_number("scaling.md_mid"), c.require_number("scaling.md_half")};
  ck.seed = std::stoull(c.require("seed"));
  ck.learning_rate = c.require_number("learning_rate");
  ck.epochs = require_count(c, "epochs");
  ck.batch_size = require_count(c, "batch_size");
  if (!(ck.best_validation_pc >= -1.0 && ck.best_validation_pc <= 1.0)) throw FormatError("best_validation_pc outside [-1, 1]", 0);
  if (ck.best_epoch > ck.epochs) throw FormatError("best_epoch exceeds the configured epochs", 0);
  const std::size_t entries = require_count(c, "log_epochs");
  const Tensor64& log = c.f64("train_log");
  if (log.rank() != 2 || log.extent(1) != 4 || log.extent(0) < entries) throw FormatError("train_log has the wrong shape", 0);
  for (std::size_t i = 0; i < entries; ++i) {
    ck.log.push_back({static_cast<std::size_t>(log(i, 0)), log(i, 1), log(i, 2), log(i, 3)});
  }
  return ck;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  store::write_container(checkpoint_to_container(ckpt), path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_container(store::read_container(path));
}

}  // namespace volreg::autonet
