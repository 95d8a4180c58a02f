#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "volreg/regress/features.hpp"
#include "volreg/synth/phantom.hpp"

namespace volreg::cli {

using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

/// Settings shared by every subcommand after merging the config file with
/// command-line overrides.
struct RunContext {
  std::string command;
  json config = json::object();
  std::filesystem::path out_dir;
  std::vector<std::string> outputs;
  std::map<std::string, double> timings;
  json extra = json::object();

  template <class T>
  T get(const std::string& key, T fallback) const {
    return config.contains(key) ? config.at(key).get<T>() : fallback;
  }
  std::string require_path(const std::string& key) const;
  std::uint64_t seed() const { return get<std::uint64_t>("seed", 1); }

  /// Records an output path relative to out_dir.
  std::filesystem::path output(const std::string& name);
  void write_manifest() const;
};

class Stopwatch {
 public:
  explicit Stopwatch(RunContext& ctx, std::string name) : ctx_(ctx), name_(std::move(name)) {}
  ~Stopwatch() {
    ctx_.timings[name_] += std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  RunContext& ctx_;
  std::string name_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// A synthetic dataset directory: records.csv, features.csv, volumes/*.octv.
struct DataDir {
  std::filesystem::path root;
  std::vector<synth::ScanRecord> records;
  std::vector<regress::FeatureRow> features;  // aligned with records

  static DataDir load(const std::filesystem::path& root);
  std::filesystem::path volume_path(const std::string& scan_id) const;
  /// Records of one region, optionally passing the visual-field QC filter.
  std::vector<std::size_t> select(Region region, bool qc) const;
};

std::filesystem::path volume_file(const std::filesystem::path& root, const std::string& scan_id);

int cmd_synth(RunContext& ctx);
int cmd_train_cnn(RunContext& ctx);
int cmd_train_ml(RunContext& ctx);
int cmd_search(RunContext& ctx);
int cmd_eval(RunContext& ctx);
int cmd_cam(RunContext& ctx);

}  // namespace volreg::cli
