#pragma once

#include <span>
#include <string>
#include <vector>

namespace intervene {

double mean(std::span<const double> x);
/// Sample standard deviation (n - 1); 0 for fewer than two values.
double sample_std(std::span<const double> x);
double median(std::vector<double> x);

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Student-t interval for the mean. A single value gives a zero-width interval.
ConfidenceInterval t_interval(std::span<const double> x, double level = 0.95);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

/// Two-sided paired t-test on a - b. Throws Error{LengthMismatch, InvalidArgument
/// (n < 2), DegenerateVariance}.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// One-sided paired t-test with alternative mean(a - b) < 0.
TTestResult paired_t_test_less(std::span<const double> a, std::span<const double> b);

/// Student-t cumulative distribution function.
double student_t_cdf(double t, double df);

double bonferroni(double p, std::size_t comparisons);
double bonferroni_threshold(double alpha, std::size_t comparisons);

/// (mean a - mean b) / sqrt((s_a^2 + s_b^2) / 2). Zero pooled deviation gives
/// +-inf for a nonzero difference and 0 otherwise.
double cohens_d(std::span<const double> a, std::span<const double> b);

/// Pearson sample correlation; 0 when either side is constant.
double correlation(std::span<const double> x, std::span<const double> y);

/// Shortest round-trip text, with "inf"/"-inf"/"nan" for non-finite values.
std::string format_stat(double v);

}  // namespace intervene
