#include <algorithm>
#include <cmath>
#include <numeric>

#include "volreg/common.hpp"
#include "volreg/regress/models.hpp"

namespace volreg::regress {

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

double node_mean(const Vector& y, std::span<const std::size_t> rows) {
  double s = 0.0;
  for (std::size_t r : rows) s += y[static_cast<Eigen::Index>(r)];
  return s / static_cast<double>(rows.size());
}

std::vector<std::size_t> candidate_features(std::size_t p, std::size_t max_features, Rng& rng) {
  std::vector<std::size_t> f(p);
  std::iota(f.begin(), f.end(), std::size_t{0});
  if (max_features == 0 || max_features >= p) return f;
  for (std::size_t i = 0; i < max_features; ++i) std::swap(f[i], f[i + rng.index(p - i)]);
  f.resize(max_features);
  std::sort(f.begin(), f.end());
  return f;
}

Split best_split(const Matrix& X, const Vector& y, std::span<const std::size_t> rows, const TreeOptions& opts, Rng& rng) {
  const std::size_t m = rows.size();
  double total = 0.0, total_sq = 0.0;
  for (std::size_t r : rows) {
    const double v = y[static_cast<Eigen::Index>(r)];
    total += v;
    total_sq += v * v;
  }
  const double parent = total * total / static_cast<double>(m);
  const double node_sse = std::max(0.0, total_sq - parent);
  Split best;
  best.gain = 1e-12 * std::max(1.0, node_sse);  // smaller gains are rounding noise
  std::vector<std::pair<double, double>> xy(m);
  for (std::size_t f : candidate_features(static_cast<std::size_t>(X.cols()), opts.max_features, rng)) {
    const auto col = static_cast<Eigen::Index>(f);
    if (opts.random_thresholds) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::size_t r : rows) {
        const double v = X(static_cast<Eigen::Index>(r), col);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (!(lo < hi)) continue;
      const double thr = rng.uniform(lo, hi);
      double sl = 0.0;
      std::size_t nl = 0;
      for (std::size_t r : rows) {
        if (X(static_cast<Eigen::Index>(r), col) <= thr) {
          sl += y[static_cast<Eigen::Index>(r)];
          ++nl;
        }
      }
      const double sr = total - sl;
      const double gain = sl * sl / static_cast<double>(nl) + sr * sr / static_cast<double>(m - nl) - parent;
      if (gain > best.gain) best = {static_cast<int>(f), thr, gain};
      continue;
    }
    for (std::size_t i = 0; i < m; ++i) {
      const auto r = static_cast<Eigen::Index>(rows[i]);
      xy[i] = {X(r, col), y[r]};
    }
    std::sort(xy.begin(), xy.end());
    double sl = 0.0;
    for (std::size_t i = 1; i < m; ++i) {
      sl += xy[i - 1].second;
      if (!(xy[i - 1].first < xy[i].first)) continue;
      const double sr = total - sl;
      const double gain = sl * sl / static_cast<double>(i) + sr * sr / static_cast<double>(m - i) - parent;
      if (gain > best.gain) {
        double thr = 0.5 * (xy[i - 1].first + xy[i].first);
        if (!(thr < xy[i].first)) thr = xy[i - 1].first;
        best = {static_cast<int>(f), thr, gain};
      }
    }
  }
  return best;
}

}  // namespace

void RegressionTree::fit(const Matrix& X, const Vector& y, std::span<const std::size_t> rows, const TreeOptions& opts,
                         Rng& rng) {
  if (rows.empty()) throw InvalidArgument("tree needs at least one training row");
  nodes_.clear();
  struct Pending {
    int node;
    std::vector<std::size_t> rows;
    std::size_t depth;
  };
  std::vector<Pending> stack;
  nodes_.push_back({});
  stack.push_back({0, std::vector<std::size_t>(rows.begin(), rows.end()), 0});
  while (!stack.empty()) {
    Pending p = std::move(stack.back());
    stack.pop_back();
    nodes_[p.node].value = node_mean(y, p.rows);
    if (p.depth >= opts.max_depth || p.rows.size() < std::max<std::size_t>(2, opts.min_samples_split)) continue;
    const Split s = best_split(X, y, p.rows, opts, rng);
    if (s.feature < 0) continue;
    std::vector<std::size_t> left, right;
    for (std::size_t r : p.rows) {
      (X(static_cast<Eigen::Index>(r), s.feature) <= s.threshold ? left : right).push_back(r);
    }
    const int l = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    nodes_.push_back({});
    nodes_[p.node].feature = s.feature;
    nodes_[p.node].threshold = s.threshold;
    nodes_[p.node].left = l;
    nodes_[p.node].right = l + 1;
    // right first so the left subtree is expanded (and numbered) first
    stack.push_back({l + 1, std::move(right), p.depth + 1});
    stack.push_back({l, std::move(left), p.depth + 1});
  }
}

double RegressionTree::predict_row(const Matrix& X, Eigen::Index row) const {
  int n = 0;
  while (nodes_[n].feature >= 0) {
    n = X(row, nodes_[n].feature) <= nodes_[n].threshold ? nodes_[n].left : nodes_[n].right;
  }
  return nodes_[n].value;
}

std::size_t RegressionTree::depth() const {
  std::size_t best = 0;
  std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [n, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (nodes_[n].feature >= 0) {
      stack.push_back({nodes_[n].left, d + 1});
      stack.push_back({nodes_[n].right, d + 1});
    }
  }
  return best;
}

namespace {

void save_trees(store::Container& c, const std::vector<RegressionTree>& trees) {
  std::size_t total = 0;
  for (const auto& t : trees) total += t.nodes().size();
  if (total == 0) return;
  Tensor64 nodes({total, 5});
  Tensor64 sizes({trees.size()});
  std::size_t i = 0;
  for (std::size_t t = 0; t < trees.size(); ++t) {
    sizes[t] = static_cast<double>(trees[t].nodes().size());
    for (const auto& n : trees[t].nodes()) {
      nodes(i, 0) = n.feature;
      nodes(i, 1) = n.threshold;
      nodes(i, 2) = n.left;
      nodes(i, 3) = n.right;
      nodes(i, 4) = n.value;
      ++i;
    }
  }
  c.add("model.tree_sizes", std::move(sizes));
  c.add("model.nodes", std::move(nodes));
}

std::vector<RegressionTree> load_trees(const store::Container& c) {
  std::vector<RegressionTree> trees;
  if (!c.contains("model.nodes")) return trees;
  const Tensor64& sizes = c.f64("model.tree_sizes");
  const Tensor64& nodes = c.f64("model.nodes");
  if (nodes.rank() != 2 || nodes.extent(1) != 5) throw FormatError("tree node table must be [n, 5]", 0);
  std::size_t i = 0;
  for (double s : sizes.data()) {
    RegressionTree t;
    const auto count = static_cast<std::size_t>(s);
    if (count == 0 || i + count > nodes.extent(0)) throw FormatError("tree sizes do not match the node table", 0);
    for (std::size_t k = 0; k < count; ++k, ++i) {
      RegressionTree::Node n;
      n.feature = static_cast<int>(nodes(i, 0));
      n.threshold = nodes(i, 1);
      n.left = static_cast<int>(nodes(i, 2));
      n.right = static_cast<int>(nodes(i, 3));
      n.value = nodes(i, 4);
      if (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || static_cast<std::size_t>(std::max(n.left, n.right)) >= count)) {
        throw FormatError("tree node has out-of-range children", 0);
      }
      t.nodes().push_back(n);
    }
    trees.push_back(std::move(t));
  }
  if (i != nodes.extent(0)) throw FormatError("tree sizes do not match the node table", 0);
  return trees;
}

}  // namespace

TreeEnsemble::TreeEnsemble(RegressorKind kind, std::size_t trees, std::size_t max_depth, std::uint64_t seed)
    : kind_(kind), n_trees_(trees), max_depth_(max_depth), seed_(seed) {
  if (kind != RegressorKind::DTR && kind != RegressorKind::RFR && kind != RegressorKind::ETR) {
    throw InvalidArgument("tree ensemble kind must be DTR, RFR or ETR");
  }
  if (kind == RegressorKind::DTR) n_trees_ = 1;
  if (n_trees_ < 1) throw InvalidArgument("tree ensemble needs at least one tree");
}

TreeOptions TreeEnsemble::options(std::size_t features) const {
  TreeOptions o;
  o.max_depth = max_depth_;
  if (kind_ == RegressorKind::RFR) {
    o.max_features = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(features)))));
  }
  o.random_thresholds = kind_ == RegressorKind::ETR;
  return o;
}

void TreeEnsemble::fit_tree(const Matrix& X, const Vector& y, std::size_t t, std::uint64_t tree_seed) {
  if (trees_.size() != n_trees_) trees_.assign(n_trees_, RegressionTree{});
  Rng rng(tree_seed);
  const auto n = static_cast<std::size_t>(X.rows());
  std::vector<std::size_t> rows(n);
  if (kind_ == RegressorKind::RFR) {
    for (auto& r : rows) r = rng.index(n);
  } else {
    std::iota(rows.begin(), rows.end(), std::size_t{0});
  }
  trees_.at(t).fit(X, y, rows, options(static_cast<std::size_t>(X.cols())), rng);
}

void TreeEnsemble::fit(const Matrix& X, const Vector& y) {
  if (X.rows() < 1 || X.rows() != y.size()) throw InvalidArgument("tree ensemble: bad training shapes");
  trees_.assign(n_trees_, RegressionTree{});
  parallel_for(n_trees_, [&](std::size_t t) { fit_tree(X, y, t, derive_seed(seed_, t)); });
}

Vector TreeEnsemble::predict(const Matrix& X) const {
  if (trees_.empty()) throw InvalidArgument("tree ensemble is not fitted");
  Vector out(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    double s = 0.0;
    for (const auto& t : trees_) s += t.predict_row(X, r);
    out[r] = s / static_cast<double>(trees_.size());
  }
  return out;
}

void TreeEnsemble::save(store::Container& c) const { save_trees(c, trees_); }

void TreeEnsemble::load(const store::Container& c) {
  trees_ = load_trees(c);
  if (trees_.empty()) throw FormatError("tree ensemble container holds no trees", 0);
  n_trees_ = trees_.size();
}

void GradientBoosting::fit(const Matrix& X, const Vector& y) {
  if (X.rows() < 1 || X.rows() != y.size()) throw InvalidArgument("gradient boosting: bad training shapes");
  init_ = y.mean();
  trees_.clear();
  const auto n = static_cast<std::size_t>(X.rows());
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  TreeOptions opts;
  opts.max_depth = max_depth_;
  Rng unused(0);
  Vector f = Vector::Constant(X.rows(), init_);
  for (std::size_t round = 0; round < rounds_; ++round) {
    const Vector residual = y - f;
    RegressionTree t;
    t.fit(X, residual, rows, opts, unused);
    for (Eigen::Index r = 0; r < X.rows(); ++r) f[r] += learning_rate_ * t.predict_row(X, r);
    trees_.push_back(std::move(t));
  }
}

Vector GradientBoosting::predict(const Matrix& X) const {
  Vector out(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    double s = init_;
    for (const auto& t : trees_) s += learning_rate_ * t.predict_row(X, r);
    out[r] = s;
  }
  return out;
}

void GradientBoosting::save(store::Container& c) const {
  save_trees(c, trees_);
  c.set("model.init", store::format_number(init_));
}

void GradientBoosting::load(const store::Container& c) {
  trees_ = load_trees(c);
  init_ = c.require_number("model.init");
  rounds_ = trees_.size();
}

}  // namespace volreg::regress
