#include <cmath>
#include <iostream>

#include "app.hpp"
#include "volreg/autonet/train.hpp"
#include "volreg/eval/results.hpp"
#include "volreg/eval/search.hpp"
#include "volreg/regress/benchmark.hpp"
#include "volreg/store/octv.hpp"

namespace volreg::cli {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Region region_setting(const RunContext& ctx) { return parse_region(ctx.get<std::string>("region", "onh")); }

std::array<double, 3> ratio_setting(const RunContext& ctx) {
  const auto v = ctx.get<std::vector<double>>("ratios", {0.8, 0.1, 0.1});
  if (v.size() != 3) throw InvalidArgument("'ratios' needs three entries");
  return {v[0], v[1], v[2]};
}

std::vector<eval::Target> targets_setting(const RunContext& ctx, const std::string& fallback) {
  const std::string t = ctx.get<std::string>("target", fallback);
  if (t == "both") return {eval::Target::VFI, eval::Target::MD};
  return {eval::parse_target(t)};
}

eval::CvMode cv_setting(const RunContext& ctx) {
  const std::string cv = ctx.get<std::string>("cv", "repeated");
  if (cv == "repeated") return eval::CvMode::RepeatedSplits;
  if (cv == "disjoint") return eval::CvMode::DisjointFolds;
  throw InvalidArgument("cv must be 'repeated' or 'disjoint'");
}

std::vector<eval::SplitItem> split_items(const DataDir& d, const std::vector<std::size_t>& idx) {
  std::vector<eval::SplitItem> items;
  for (std::size_t i : idx) items.push_back({d.records[i].scan_id, d.records[i].patient_id});
  return items;
}

std::vector<double> label_column(const DataDir& d, const std::vector<std::size_t>& idx, eval::Target t) {
  std::vector<double> out;
  for (std::size_t i : idx) out.push_back(t == eval::Target::VFI ? d.records[i].vfi : d.records[i].md);
  return out;
}

eval::HyperParams params_setting(const RunContext& ctx) {
  eval::HyperParams hp;
  if (ctx.config.contains("params")) {
    for (const auto& [k, v] : ctx.config.at("params").items()) hp[k] = v.get<double>();
  }
  return hp;
}

void write_results(RunContext& ctx, const eval::ResultTable& table) {
  store::write_table(table.to_table(), ctx.output("results.csv"));
  const std::string summary = table.summary();
  store::write_file(ctx.output("summary.txt"), summary);
  std::cout << summary;
}

struct PredictionRow {
  std::size_t fold;
  std::string scan_id;
  double vfi, vfi_pred, md, md_pred;
};

void write_predictions(RunContext& ctx, const std::vector<PredictionRow>& rows) {
  using store::CellKind;
  store::Table t{{{"fold", CellKind::Real, 0.0},
                  {"scan_id", CellKind::Text},
                  {"vfi", CellKind::Real},
                  {"vfi_pred", CellKind::Real},
                  {"md", CellKind::Real},
                  {"md_pred", CellKind::Real}},
                 {}};
  for (const auto& r : rows) t.add_row({static_cast<double>(r.fold), r.scan_id, r.vfi, r.vfi_pred, r.md, r.md_pred});
  store::write_table(t, ctx.output("predictions.csv"));
}

void write_train_log(RunContext& ctx, const autonet::Checkpoint& ck, const std::string& name) {
  using store::CellKind;
  store::Table t{{{"epoch", CellKind::Real, 1.0},
                  {"train_loss", CellKind::Real, 0.0},
                  {"validation_pc_vfi", CellKind::Real, -1.0, 1.0, true},
                  {"validation_pc_md", CellKind::Real, -1.0, 1.0, true}},
                 {}};
  for (const auto& r : ck.log) {
    t.add_row({static_cast<double>(r.epoch), r.train_loss, r.validation_pc_vfi, r.validation_pc_md});
  }
  store::write_table(t, ctx.output(name));
}

std::vector<Tensor> load_inputs(RunContext& ctx, const DataDir& d, const std::vector<std::size_t>& idx,
                                const autonet::NetworkSpec& spec) {
  Stopwatch sw(ctx, "load");
  std::vector<Tensor> inputs(idx.size());
  parallel_for(idx.size(), [&](std::size_t i) {
    inputs[i] = autonet::prepare_input(store::read_volume(d.volume_path(d.records[idx[i]].scan_id)), spec);
  });
  return inputs;
}

/// Adds one row per target to the table and returns the per-scan predictions.
std::vector<PredictionRow> score_cnn(const autonet::Checkpoint& ck, const DataDir& d, const std::vector<std::size_t>& idx,
                                     const std::vector<Tensor>& inputs, std::span<const std::size_t> rows,
                                     std::size_t fold, eval::ResultTable& table) {
  std::vector<Tensor> subset;
  for (std::size_t r : rows) subset.push_back(inputs[r]);
  const auto pred = autonet::predict_prepared(ck, subset, ck.batch_size);
  std::vector<PredictionRow> out;
  std::vector<double> pv, pm, tv, tm;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& rec = d.records[idx[rows[i]]];
    out.push_back({fold, rec.scan_id, rec.vfi, pred[i].vfi, rec.md, pred[i].md});
    pv.push_back(pred[i].vfi);
    pm.push_back(pred[i].md);
    tv.push_back(rec.vfi);
    tm.push_back(rec.md);
  }
  for (auto [target, p, t] : {std::tuple{eval::Target::VFI, &pv, &tv}, std::tuple{eval::Target::MD, &pm, &tm}}) {
    const eval::FoldMetrics m = eval::score(target, *p, *t);
    table.add({"CNN", target, fold, m.pc, m.rmse_standard, m.rmse_paper_literal});
  }
  return out;
}

void require_defined_pc(const eval::ResultTable& table) {
  for (const auto& method : table.methods()) {
    for (eval::Target t : {eval::Target::VFI, eval::Target::MD}) {
      bool present = false;
      for (const auto& r : table.rows()) present |= r.method == method && r.target == t;
      if (present) table.aggregate(method, t, eval::Metric::PC);
    }
  }
}

}  // namespace

int cmd_train_cnn(RunContext& ctx) {
  const DataDir d = DataDir::load(ctx.require_path("data"));
  const std::vector<std::size_t> idx = d.select(region_setting(ctx), ctx.get<bool>("qc_filter", true));
  const auto input = ctx.get<std::vector<std::size_t>>("input", {64, 64, 128});
  if (input.size() != 3) throw InvalidArgument("'input' needs three extents");
  autonet::NetworkSpec spec = autonet::NetworkSpec::standard_scaled({input[0], input[1], input[2]},
                                                                    ctx.get<std::size_t>("channels", 32));
  spec.dropout_rate = ctx.get<double>("dropout", spec.dropout_rate);
  spec.validate();
  autonet::TrainConfig cfg;
  cfg.learning_rate = ctx.get<double>("learning_rate", cfg.learning_rate);
  cfg.epochs = ctx.get<std::size_t>("epochs", cfg.epochs);
  cfg.batch_size = ctx.get<std::size_t>("batch_size", cfg.batch_size);
  cfg.validate();
  const std::size_t folds = ctx.get<std::size_t>("folds", 1);
  if (folds < 1) throw InvalidArgument("folds must be >= 1");

  const std::vector<Tensor> inputs = load_inputs(ctx, d, idx, spec);
  const auto items = split_items(d, idx);
  eval::ResultTable table;
  std::vector<PredictionRow> predictions;
  for (std::size_t fold = 0; fold < folds; ++fold) {
    const eval::SplitPlan plan = eval::grouped_split(items, ratio_setting(ctx), ctx.seed() + fold);
    autonet::Dataset sets[2];
    for (int p = 0; p < 2; ++p) {
      for (std::size_t r : plan.indices(static_cast<eval::Partition>(p))) {
        sets[p].add(inputs[r], d.records[idx[r]].vfi, d.records[idx[r]].md);
      }
    }
    cfg.seed = ctx.seed() + fold;
    autonet::Checkpoint ck;
    {
      Stopwatch sw(ctx, "train");
      ck = autonet::train(sets[0], sets[1], spec, cfg, [&](const autonet::EpochRecord& r) {
        std::cerr << "fold " << fold << " epoch " << r.epoch << " loss " << r.train_loss << " val PC(VFI) "
                  << r.validation_pc_vfi << '\n';
      });
    }
    const std::string suffix = folds == 1 ? "" : "_fold" + std::to_string(fold);
    autonet::save_checkpoint(ck, ctx.output("checkpoint" + suffix + ".vrck"));
    write_train_log(ctx, ck, "train_log" + suffix + ".csv");
    const auto test = plan.indices(eval::Partition::Test);
    const auto rows = score_cnn(ck, d, idx, inputs, test, fold, table);
    predictions.insert(predictions.end(), rows.begin(), rows.end());
    ctx.extra["folds"].push_back({{"fold", fold}, {"best_epoch", ck.best_epoch}, {"best_validation_pc", ck.best_validation_pc}});
  }
  write_predictions(ctx, predictions);
  write_results(ctx, table);
  return 0;
}

int cmd_train_ml(RunContext& ctx) {
  const DataDir d = DataDir::load(ctx.require_path("data"));
  const std::vector<std::size_t> idx = d.select(region_setting(ctx), ctx.get<bool>("qc_filter", true));
  const regress::RegressorKind kind = regress::parse_kind(ctx.get<std::string>("method", "RFR"));
  const eval::HyperParams hp = params_setting(ctx);
  const eval::SplitPlan plan = eval::grouped_split(split_items(d, idx), ratio_setting(ctx), ctx.seed());
  std::vector<regress::FeatureRow> rows;
  for (std::size_t i : idx) rows.push_back(d.features[i]);
  eval::ResultTable table;
  for (eval::Target target : targets_setting(ctx, "vfi")) {
    const std::vector<double> y = label_column(d, idx, target);
    const regress::SplitData data = regress::split_data(rows, y, plan);
    regress::Pipeline p(kind, hp, ctx.seed());
    {
      Stopwatch sw(ctx, "fit");
      p.fit(data.X_train, data.y_train);
    }
    store::write_container(p.save(), ctx.output("model_" + eval::to_string(target) + ".vrck"));
    const regress::Vector pred = p.predict(data.X_test);
    const std::vector<double> pv(pred.data(), pred.data() + pred.size());
    const std::vector<double> tv(data.y_test.data(), data.y_test.data() + data.y_test.size());
    const eval::FoldMetrics m = eval::score(target, pv, tv);
    table.add({regress::to_string(kind), target, 0, m.pc, m.rmse_standard, m.rmse_paper_literal});
  }
  write_results(ctx, table);
  return 0;
}

int cmd_search(RunContext& ctx) {
  const DataDir d = DataDir::load(ctx.require_path("data"));
  const std::vector<std::size_t> idx = d.select(region_setting(ctx), ctx.get<bool>("qc_filter", true));
  std::vector<regress::RegressorKind> kinds;
  if (ctx.config.contains("methods")) {
    for (const auto& m : ctx.config.at("methods")) kinds.push_back(regress::parse_kind(m.get<std::string>()));
  } else {
    kinds = regress::all_kinds();
  }
  const std::size_t trials = ctx.get<std::size_t>("trials", 100);
  const std::size_t folds = ctx.get<std::size_t>("folds", 5);
  if (trials < 1) throw InvalidArgument("trials must be >= 1");
  const auto items = split_items(d, idx);
  std::vector<regress::FeatureRow> rows;
  for (std::size_t i : idx) rows.push_back(d.features[i]);

  using store::CellKind;
  store::Table trial_table{{{"method", CellKind::Text},
                            {"target", CellKind::Text},
                            {"fold", CellKind::Real, 0.0},
                            {"trial", CellKind::Real, 0.0},
                            {"validation_pc", CellKind::Real, -1.0, 1.0, true},
                            {"selected", CellKind::Real, 0.0, 1.0},
                            {"params", CellKind::Text}},
                           {}};
  eval::ResultTable all;
  for (regress::RegressorKind kind : kinds) {
    const std::string method = regress::to_string(kind);
    const eval::SearchSpace space = regress::default_search_space(kind);
    for (eval::Target target : targets_setting(ctx, "vfi")) {
      const std::vector<double> y = label_column(d, idx, target);
      std::vector<eval::SearchResult> results(folds);
      const eval::FoldRunner runner = [&](const eval::SplitPlan& plan, std::size_t fold) {
        const regress::SplitData data = regress::split_data(rows, y, plan);
        regress::PipelineBackend backend(kind, data);
        results[fold] = eval::random_search(backend, space, trials, derive_seed(ctx.seed(), fold));
        const auto& r = results[fold];
        return std::vector<eval::FoldMetrics>{{target, r.test_pc, r.test_rmse, r.test_rmse_paper_literal}};
      };
      eval::ResultTable table;
      {
        Stopwatch sw(ctx, "search." + method);
        table = eval::cross_validate(method, runner, items, folds, ctx.seed(), cv_setting(ctx), ratio_setting(ctx));
      }
      for (const auto& row : table.rows()) all.add(row);
      for (std::size_t fold = 0; fold < folds; ++fold) {
        json sampled = json::array();
        for (std::size_t t = 0; t < results[fold].trials.size(); ++t) {
          const auto& tr = results[fold].trials[t];
          const bool selected = t == results[fold].best_index;
          trial_table.add_row({method, eval::to_string(target), static_cast<double>(fold), static_cast<double>(t),
                               tr.validation_pc, selected ? 1.0 : 0.0, eval::to_string(tr.params)});
          sampled.push_back({{"params", tr.params}, {"seed", tr.seed},
                             {"validation_pc", std::isnan(tr.validation_pc) ? json(nullptr) : json(tr.validation_pc)}});
        }
        ctx.extra["search"][method][eval::to_string(target)].push_back(
            {{"fold", fold}, {"trials", sampled}, {"selected", results[fold].best_index}});
      }
    }
  }
  store::write_table(trial_table, ctx.output("trials.csv"));
  write_results(ctx, all);
  return 0;
}

int cmd_eval(RunContext& ctx) {
  eval::ResultTable table;
  if (ctx.config.contains("results")) {
    for (const auto& p : ctx.config.at("results")) {
      const auto t = eval::ResultTable::from_table(store::read_table(p.get<std::string>(), eval::ResultTable::schema()));
      for (const auto& row : t.rows()) table.add(row);
    }
  } else {
    const autonet::Checkpoint ck = autonet::load_checkpoint(ctx.require_path("checkpoint"));
    const DataDir d = DataDir::load(ctx.require_path("data"));
    const std::vector<std::size_t> idx = d.select(region_setting(ctx), ctx.get<bool>("qc_filter", true));
    const std::vector<Tensor> inputs = load_inputs(ctx, d, idx, ck.spec);
    std::vector<std::size_t> rows(idx.size());
    std::iota(rows.begin(), rows.end(), 0);
    write_predictions(ctx, score_cnn(ck, d, idx, inputs, rows, 0, table));
  }
  if (table.rows().empty()) throw InvalidArgument("nothing to evaluate");
  write_results(ctx, table);
  require_defined_pc(table);
  return 0;
}

}  // namespace volreg::cli
