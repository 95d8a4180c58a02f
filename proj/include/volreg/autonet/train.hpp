#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "volreg/autonet/labels.hpp"
#include "volreg/autonet/nadam.hpp"
#include "volreg/autonet/network.hpp"
#include "volreg/store/container.hpp"

namespace volreg::autonet {

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t epochs = 300;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  LabelScaling scaling;
  NadamConfig nadam;

  void validate() const;
};

/// Network-ready inputs ([x, y, z] at the spec input shape, single channel)
/// with their clinical labels.
struct Dataset {
  std::vector<Tensor> inputs;
  std::vector<double> vfi;
  std::vector<double> md;

  std::size_t size() const { return inputs.size(); }
  void add(Tensor input, double vfi_value, double md_value);
};

/// Mirrors left eyes, resamples to the spec input shape and maps the
/// intensities to [0, 1].
Tensor prepare_input(const Volume& vol, const NetworkSpec& spec);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double validation_pc_vfi = 0.0;  // NaN when undefined
  double validation_pc_md = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct Checkpoint {
  NetworkSpec spec;
  Parameters<float> params;
  std::size_t best_epoch = 0;
  double best_validation_pc = 0.0;
  LabelScaling scaling;
  std::uint64_t seed = 0;
  double learning_rate = 0.0;
  std::size_t epochs = 0;
  std::size_t batch_size = 0;
  std::vector<EpochRecord> log;

  bool operator==(const Checkpoint&) const = default;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch NAdam on the summed MSE of the encoded labels. After each epoch
/// the validation PC of VFI is measured and the parameters of the best epoch
/// are returned (the earliest on ties; an undefined PC never wins). Throws
/// UndefinedMetric if no epoch yields a defined validation PC.
Checkpoint train(const Dataset& train_set, const Dataset& validation_set, const NetworkSpec& spec,
                 const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Decoded (VFI, MD) for prepared inputs, batch-norm in infer mode and
/// dropout off.
std::vector<DecodedLabels> predict_prepared(const Checkpoint& ckpt, const std::vector<Tensor>& inputs,
                                            std::size_t batch_size = 8);

DecodedLabels predict(const Checkpoint& ckpt, const Volume& vol);

/// Stacks [x, y, z] inputs into an [N, 1, x, y, z] batch.
Tensor stack_inputs(const std::vector<Tensor>& inputs, std::span<const std::size_t> indices);

store::Container checkpoint_to_container(const Checkpoint& ckpt);
Checkpoint checkpoint_from_container(const store::Container& c);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace volreg::autonet
