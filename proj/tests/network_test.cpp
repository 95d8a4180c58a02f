#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "oracles.hpp"
#include "volreg/autonet/network.hpp"
#include "volreg/autonet/train.hpp"

using namespace volreg;
using namespace volreg::autonet;

namespace {

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Inputs whose brightness in one half determines the labels.
Dataset toy_dataset(std::size_t n, const Extents3& e, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    const double level = rng.uniform();
    Tensor t({e[0], e[1], e[2]});
    for (std::size_t x = 0; x < e[0]; ++x)
      for (std::size_t y = 0; y < e[1]; ++y)
        for (std::size_t z = 0; z < e[2]; ++z)
          t(x, y, z) = static_cast<float>((x < e[0] / 2 ? level : 0.5) + 0.05 * rng.normal());
    d.add(std::move(t), 20 + 70 * level, -25 + 25 * level);
  }
  return d;
}

NetworkSpec small_spec() {
  NetworkSpec spec;
  spec.conv_layers = {{4, 3, 2}, {4, 3, 1}};
  spec.dropout_rate = 0.2;
  spec.input_shape = {8, 8, 8};
  return spec;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("volreg_network_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST(NetworkSpec, StandardLayout) {
  const NetworkSpec s = NetworkSpec::standard();
  ASSERT_EQ(s.conv_layers.size(), 5u);
  const std::size_t kernels[] = {7, 5, 3, 3, 3}, strides[] = {2, 1, 1, 1, 1};
  for (std::size_t l = 0; l < 5; ++l) {
    EXPECT_EQ(s.conv_layers[l].out_channels, 32u);
    EXPECT_EQ(s.conv_layers[l].kernel_size, kernels[l]);
    EXPECT_EQ(s.conv_layers[l].stride, strides[l]);
  }
  EXPECT_EQ(s.dropout_rate, 0.2);
  EXPECT_EQ(s.input_shape, (Extents3{64, 64, 128}));
  EXPECT_EQ(s.block_extents().back(), (Extents3{32, 32, 64}));
}

TEST(NetworkSpec, ParameterCountClosedForm) {
  // conv 7^3*1*32 + 5^3*32*32 + 3 * 3^3*32*32, four batch-norm vectors per
  // block, head 32*2 + 2
  const std::size_t expected = 343 * 32 + 125 * 1024 + 3 * 27 * 1024 + 4 * 32 * 5 + 64 + 2;
  EXPECT_EQ(expected, 222626u);
  EXPECT_EQ(parameter_count(NetworkSpec::standard()), expected);
  EXPECT_EQ(trainable_parameter_count(NetworkSpec::standard()), expected - 2 * 32 * 5);
  EXPECT_EQ(build_network<float>(NetworkSpec::standard(), 1).count(), expected);
}

TEST(NetworkSpec, ParseRoundTripAndValidation) {
  const NetworkSpec s = NetworkSpec::standard_scaled({32, 32, 64}, 8);
  EXPECT_EQ(NetworkSpec::parse(s.layers_string(), s.dropout_rate, s.input_string()), s);
  EXPECT_THROW(NetworkSpec::parse("8:3", 0.2, "8x8x8x1"), InvalidArgument);
  NetworkSpec bad = small_spec();
  bad.conv_layers[1].kernel_size = 7;  // the second block sees 4^3
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad = small_spec();
  bad.dropout_rate = 1.0;
  EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(Network, InitializationStatistics) {
  NetworkSpec spec = NetworkSpec::standard_scaled({16, 16, 16}, 32);
  const auto p = build_network<double>(spec, 3);
  // layer 2: fan_in 125 * 32, He normal
  const auto& w = p.conv_weight[1];
  double s = 0, sq = 0;
  for (double v : w.data()) {
    s += v;
    sq += v * v;
  }
  const double n = static_cast<double>(w.size());
  EXPECT_NEAR(s / n, 0.0, 4 * std::sqrt(2.0 / 4000 / n));
  EXPECT_NEAR(sq / n, 2.0 / 4000, 0.05 * 2.0 / 4000);
  const double limit = std::sqrt(6.0 / (32 + 2));
  for (double v : p.head_weight.data()) EXPECT_LE(std::abs(v), limit);
  for (double v : p.bn_var[0].data()) EXPECT_EQ(v, 1.0);
  EXPECT_EQ(build_network<double>(spec, 3), p);
  EXPECT_NE(build_network<double>(spec, 4), p);
  // float and double draws agree
  EXPECT_EQ(build_network<float>(spec, 3), p.cast<float>());
}

TEST(Network, GradientsMatchFiniteDifferences) {
  const auto r = oracle::check_network_gradients(oracle::miniature_spec(), 11);
  EXPECT_GT(r.checked, 500u);
  EXPECT_EQ(r.failures, 0u) << "worst relative error " << r.worst_relative;
}

TEST(Network, GradientsMatchWithEvenKernelAndThreeBlocks) {
  NetworkSpec spec;
  spec.conv_layers = {{3, 2, 1}, {2, 3, 2}, {3, 1, 1}};
  spec.dropout_rate = 0.0;
  spec.input_shape = {5, 6, 7};
  const auto r = oracle::check_network_gradients(spec, 12, 3);
  EXPECT_EQ(r.failures, 0u) << "worst relative error " << r.worst_relative;
}

TEST(Network, ForwardIsDeterministicAndBatchIndependentInInferMode) {
  const NetworkSpec spec = small_spec();
  auto params = build_network<float>(spec, 5);
  Rng rng(6);
  const auto batch = oracle::random_tensor<float>({3, 1, 8, 8, 8}, rng, 0, 1);
  const auto a = network_forward(spec, params, batch, {});
  const auto b = network_forward(spec, params, batch, {});
  EXPECT_EQ(a.output, b.output);
  const Tensor one({1, 1, 8, 8, 8}, std::vector<float>(batch.data().begin() + 512, batch.data().begin() + 1024));
  const auto c = network_forward(spec, params, one, {});
  EXPECT_EQ(c.output(0, 0), a.output(1, 0));
  EXPECT_EQ(c.output(0, 1), a.output(1, 1));
}

TEST(Network, InferModeLeavesRunningStatistics) {
  const NetworkSpec spec = small_spec();
  auto params = build_network<float>(spec, 5);
  const auto before = params;
  Rng rng(7);
  network_forward(spec, params, oracle::random_tensor<float>({2, 1, 8, 8, 8}, rng), {});
  EXPECT_EQ(params, before);
}

TEST(Network, WrongInputShapeThrows) {
  const NetworkSpec spec = small_spec();
  auto params = build_network<float>(spec, 5);
  EXPECT_THROW(network_forward(spec, params, Tensor({1, 1, 8, 8, 7}), {}), InvalidArgument);
}

TEST(Train, ZeroLearningRateKeepsTrainableParameters) {
  const NetworkSpec spec = small_spec();
  const Dataset train_set = toy_dataset(10, spec.input_shape, 1);
  const Dataset val = toy_dataset(6, spec.input_shape, 2);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.seed = 9;
  const Checkpoint ckpt = train(train_set, val, spec, cfg);
  const auto init = build_network<float>(spec, derive_seed(cfg.seed, 1));
  const auto a = ckpt.params.trainable();
  const auto b = init.trainable();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i].second, *b[i].second) << a[i].first;
  EXPECT_NE(ckpt.params.bn_mean[0], init.bn_mean[0]);
}

TEST(Train, BestEpochIsEarliestArgmaxOfValidationPc) {
  const NetworkSpec spec = small_spec();
  const Dataset train_set = toy_dataset(16, spec.input_shape, 3);
  const Dataset val = toy_dataset(8, spec.input_shape, 4);
  TrainConfig cfg;
  cfg.learning_rate = 3e-3;
  cfg.epochs = 6;
  cfg.batch_size = 4;
  std::vector<EpochRecord> seen;
  const Checkpoint ckpt = train(train_set, val, spec, cfg, [&](const EpochRecord& r) { seen.push_back(r); });
  ASSERT_EQ(ckpt.log.size(), 6u);
  EXPECT_EQ(seen.size(), 6u);
  std::size_t arg = 0;
  for (std::size_t i = 1; i < ckpt.log.size(); ++i) {
    if (ckpt.log[i].validation_pc_vfi > ckpt.log[arg].validation_pc_vfi) arg = i;
  }
  EXPECT_EQ(ckpt.best_epoch, arg + 1);
  EXPECT_EQ(ckpt.best_validation_pc, ckpt.log[arg].validation_pc_vfi);
}

TEST(Train, LossDecreasesOnLearnableTask) {
  const NetworkSpec spec = small_spec();
  const Dataset train_set = toy_dataset(24, spec.input_shape, 5);
  const Dataset val = toy_dataset(12, spec.input_shape, 6);
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.epochs = 25;
  cfg.batch_size = 4;
  const Checkpoint ckpt = train(train_set, val, spec, cfg);
  EXPECT_LT(ckpt.log.back().train_loss, 0.5 * ckpt.log.front().train_loss);
  EXPECT_GT(ckpt.best_validation_pc, 0.8);
}

TEST(Train, ConstantLabelsNeverDefinePc) {
  const NetworkSpec spec = small_spec();
  Dataset train_set = toy_dataset(6, spec.input_shape, 7);
  Dataset val = toy_dataset(4, spec.input_shape, 8);
  std::fill(val.vfi.begin(), val.vfi.end(), 50.0);
  TrainConfig cfg;
  cfg.epochs = 1;
  EXPECT_THROW(train(train_set, val, spec, cfg), UndefinedMetric);
}

TEST(Train, RerunsAreBitIdenticalAndCheckpointsRoundTrip) {
  const NetworkSpec spec = small_spec();
  const Dataset train_set = toy_dataset(10, spec.input_shape, 9);
  const Dataset val = toy_dataset(5, spec.input_shape, 10);
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.epochs = 3;
  cfg.batch_size = 3;
  const Checkpoint a = train(train_set, val, spec, cfg);
  const Checkpoint b = train(train_set, val, spec, cfg);
  EXPECT_EQ(a, b);
  const auto dir = temp_dir("rerun");
  save_checkpoint(a, dir / "a.vrck");
  save_checkpoint(b, dir / "b.vrck");
  EXPECT_EQ(read_bytes(dir / "a.vrck"), read_bytes(dir / "b.vrck"));
  EXPECT_EQ(load_checkpoint(dir / "a.vrck"), a);
  std::filesystem::remove_all(dir);
}

TEST(Predict, LeftEyeEqualsMirroredRightEye) {
  const NetworkSpec spec = small_spec();
  Checkpoint ckpt = oracle::random_checkpoint(spec, 3);
  Rng rng(4);
  Volume left;
  left.voxels = oracle::random_tensor<float>({8, 8, 8}, rng, 0, 1);
  left.laterality = Laterality::Left;
  Volume right = left;
  right.voxels = mirror_x(left.voxels);
  right.laterality = Laterality::Right;
  const auto a = predict(ckpt, left), b = predict(ckpt, right);
  EXPECT_EQ(a.vfi, b.vfi);
  EXPECT_EQ(a.md, b.md);
  EXPECT_GE(a.vfi, 0.0);
  EXPECT_LE(a.vfi, 100.0);
}

TEST(Predict, ResamplesOtherShapes) {
  const NetworkSpec spec = small_spec();
  Checkpoint ckpt = oracle::random_checkpoint(spec, 3);
  Volume v;
  v.voxels = Tensor({16, 12, 20}, 0.5f);
  v.voxels(3, 4, 5) = 1.0f;
  EXPECT_EQ(prepare_input(v, spec).shape(), (Shape{8, 8, 8}));
  EXPECT_NO_THROW(predict(ckpt, v));
}
