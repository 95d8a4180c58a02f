#pragma once

#include <span>

namespace volreg::eval {

/// Pearson correlation by the centered-product formula, accumulated in double.
/// Throws UndefinedMetric when either series is constant, InvalidArgument on
/// length mismatch or fewer than two points.
double pearson(std::span<const double> x, std::span<const double> y);

/// Pearson correlation, or NaN when it is undefined (constant series or fewer
/// than two points). Length mismatch still throws.
double pearson_or_nan(std::span<const double> x, std::span<const double> y);

enum class RmseVariant {
  Standard,       // sqrt(sum (x-y)^2 / n)
  PaperLiteral,   // sqrt(sum (x-y)^2) / n
};

double rmse(std::span<const double> x, std::span<const double> y, RmseVariant variant = RmseVariant::Standard);

double mean(std::span<const double> x);
/// Sample standard deviation (n-1 denominator); 0 for a single value.
double sample_std(std::span<const double> x);

}  // namespace volreg::eval
