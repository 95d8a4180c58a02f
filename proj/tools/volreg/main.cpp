#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "app.hpp"
#include "volreg/common.hpp"

using namespace volreg;
using namespace volreg::cli;

namespace {

enum Exit { kOk = 0, kFailure = 1, kInputError = 2, kMetricError = 3 };

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::string out_dir;
  std::optional<std::string> region, target, data, checkpoint, method_cli, cv;
  std::optional<std::size_t> patients, epochs, channels, trials, folds, axis;
  std::optional<double> healthy_fraction, alpha, learning_rate;
  std::vector<std::string> results, volumes, scans, methods;
  std::vector<std::size_t> slices;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config_path, "JSON configuration file");
  sub->add_option("--seed", o.seed, "Master seed");
  sub->add_flag("--deterministic", o.deterministic, "Fixed-order reductions (the only mode implemented)");
  sub->add_option("--out-dir", o.out_dir, "Output directory")->required();
  sub->add_option("--region", o.region, "onh or macula")->check(CLI::IsMember({"onh", "macula"}));
  sub->add_option("--target", o.target, "vfi, md or both")->check(CLI::IsMember({"vfi", "md", "both"}));
}

json merged_config(const Overrides& o) {
  json cfg = json::object();
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw InvalidArgument("cannot open config file " + o.config_path);
    try {
      cfg = json::parse(in);
    } catch (const json::parse_error& e) {
      throw InvalidArgument(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!cfg.is_object()) throw InvalidArgument("config file must hold a JSON object");
  }
  const auto set = [&](const char* key, const auto& opt) {
    if (opt) cfg[key] = *opt;
  };
  set("seed", o.seed);
  set("region", o.region);
  set("target", o.target);
  set("data", o.data);
  set("checkpoint", o.checkpoint);
  set("method", o.method_cli);
  set("cv", o.cv);
  set("n_patients", o.patients);
  set("epochs", o.epochs);
  set("channels", o.channels);
  set("trials", o.trials);
  set("folds", o.folds);
  set("axis", o.axis);
  set("healthy_fraction", o.healthy_fraction);
  set("alpha", o.alpha);
  set("learning_rate", o.learning_rate);
  if (!o.results.empty()) cfg["results"] = o.results;
  if (!o.volumes.empty()) cfg["volumes"] = o.volumes;
  if (!o.scans.empty()) cfg["scans"] = o.scans;
  if (!o.methods.empty()) cfg["methods"] = o.methods;
  if (!o.slices.empty()) cfg["slices"] = o.slices;
  if (o.deterministic) cfg["deterministic"] = true;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Volumetric regression toolkit: synthetic OCT cohorts, 3D CNN and classical regressors"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Overrides o;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort (volumes, records, features)");
  add_common(synth, o);
  synth->add_option("--patients", o.patients, "Number of patients");
  synth->add_option("--healthy-fraction", o.healthy_fraction, "Fraction of healthy patients");

  auto* train_cnn = app.add_subcommand("train-cnn", "Train the 3D CNN on a dataset directory");
  add_common(train_cnn, o);
  train_cnn->add_option("--data", o.data, "Dataset directory");
  train_cnn->add_option("--epochs", o.epochs, "Training epochs");
  train_cnn->add_option("--channels", o.channels, "Filters per conv layer");
  train_cnn->add_option("--learning-rate", o.learning_rate, "NAdam learning rate");
  train_cnn->add_option("--folds", o.folds, "Number of repeated splits");

  auto* train_ml = app.add_subcommand("train-ml", "Fit one classical regressor on a grouped split");
  add_common(train_ml, o);
  train_ml->add_option("--data", o.data, "Dataset directory");
  train_ml->add_option("--method", o.method_cli, "Regressor kind, e.g. RFR");

  auto* search = app.add_subcommand("search", "Random hyperparameter search with cross-validation");
  add_common(search, o);
  search->add_option("--data", o.data, "Dataset directory");
  search->add_option("--method", o.methods, "Regressor kinds (default: all ten)");
  search->add_option("--trials", o.trials, "Sampled configurations per fold");
  search->add_option("--folds", o.folds, "Number of folds");
  search->add_option("--cv", o.cv, "repeated or disjoint")->check(CLI::IsMember({"repeated", "disjoint"}));

  auto* eval = app.add_subcommand("eval", "Summarize result tables or score a checkpoint on a dataset");
  add_common(eval, o);
  eval->add_option("--results", o.results, "Result CSV files");
  eval->add_option("--checkpoint", o.checkpoint, "CNN checkpoint");
  eval->add_option("--data", o.data, "Dataset directory");

  auto* cam = app.add_subcommand("cam", "Class activation maps and overlay images");
  add_common(cam, o);
  cam->add_option("--checkpoint", o.checkpoint, "CNN checkpoint")->required();
  cam->add_option("--volume", o.volumes, "OCTV scan files");
  cam->add_option("--data", o.data, "Dataset directory");
  cam->add_option("--scan", o.scans, "Scan ids in the dataset directory");
  cam->add_option("--axis", o.axis, "Slice axis (0 = x, 1 = y, 2 = z)");
  cam->add_option("--slice", o.slices, "Slice indices (default: the middle slice)");
  cam->add_option("--alpha", o.alpha, "Overlay opacity in [0, 1]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  RunContext ctx;
  try {
    ctx.config = merged_config(o);
    ctx.out_dir = o.out_dir;
    std::filesystem::create_directories(ctx.out_dir);
    int rc = kFailure;
    if (*synth) {
      ctx.command = "synth";
      rc = cmd_synth(ctx);
    } else if (*train_cnn) {
      ctx.command = "train-cnn";
      rc = cmd_train_cnn(ctx);
    } else if (*train_ml) {
      ctx.command = "train-ml";
      rc = cmd_train_ml(ctx);
    } else if (*search) {
      ctx.command = "search";
      rc = cmd_search(ctx);
    } else if (*eval) {
      ctx.command = "eval";
      rc = cmd_eval(ctx);
    } else if (*cam) {
      ctx.command = "cam";
      rc = cmd_cam(ctx);
    }
    ctx.write_manifest();
    return rc;
  } catch (const UndefinedMetric& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kMetricError;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const json::exception& e) {
    std::cerr << "error: bad configuration value: " << e.what() << '\n';
    return kInputError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
