#include "volreg/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "volreg/common.hpp"

namespace volreg::eval {

namespace {

void check_pair(std::span<const double> x, std::span<const double> y, std::size_t min_len, const char* what) {
  if (x.size() != y.size()) {
    throw InvalidArgument(std::string(what) + ": length mismatch " + std::to_string(x.size()) + " vs " +
                          std::to_string(y.size()));
  }
  if (x.size() < min_len) throw InvalidArgument(std::string(what) + ": needs at least " + std::to_string(min_len) + " values");
}

}  // namespace

double mean(std::span<const double> x) {
  if (x.empty()) throw InvalidArgument("mean of an empty series");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sample_std(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

double pearson(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, 2, "pearson");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedMetric("pearson correlation undefined for a constant series");
  const double r = sxy / std::sqrt(sxx * syy);
  return std::max(-1.0, std::min(1.0, r));
}

double pearson_or_nan(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidArgument("pearson: length mismatch");
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  try {
    return pearson(x, y);
  } catch (const UndefinedMetric&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

double rmse(std::span<const double> x, std::span<const double> y, RmseVariant variant) {
  check_pair(x, y, 1, "rmse");
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sse += (x[i] - y[i]) * (x[i] - y[i]);
  const double n = static_cast<double>(x.size());
  return variant == RmseVariant::Standard ? std::sqrt(sse / n) : std::sqrt(sse) / n;
}

}  // namespace volreg::eval
