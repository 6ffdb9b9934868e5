#include "intervene/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

#include "intervene/dataset.hpp"
#include "intervene/error.hpp"

namespace intervene {

double mean(std::span<const double> x) {
  if (x.empty()) throw Error(Errc::InvalidArgument, "mean of empty sample");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sample_std(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

double median(std::vector<double> x) {
  if (x.empty()) throw Error(Errc::InvalidArgument, "median of empty sample");
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

ConfidenceInterval t_interval(std::span<const double> x, double level) {
  const double m = mean(x);
  if (x.size() < 2) return {m, m};
  const boost::math::students_t dist(static_cast<double>(x.size() - 1));
  const double q = boost::math::quantile(dist, 0.5 + level / 2.0);
  const double half = q * sample_std(x) / std::sqrt(static_cast<double>(x.size()));
  return {m - half, m + half};
}

double student_t_cdf(double t, double df) { return boost::math::cdf(boost::math::students_t(df), t); }

namespace {

TTestResult paired_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(Errc::LengthMismatch, "paired samples differ in length");
  if (a.size() < 2) throw Error(Errc::InvalidArgument, "paired t-test needs at least two pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double sd = sample_std(d);
  if (!(sd > 0.0)) throw Error(Errc::DegenerateVariance, "differences have zero variance");
  TTestResult r;
  r.df = static_cast<double>(d.size() - 1);
  r.t = mean(d) / (sd / std::sqrt(static_cast<double>(d.size())));
  return r;
}

}  // namespace

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  auto r = paired_t(a, b);
  const boost::math::students_t dist(r.df);
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  return r;
}

TTestResult paired_t_test_less(std::span<const double> a, std::span<const double> b) {
  auto r = paired_t(a, b);
  r.p = boost::math::cdf(boost::math::students_t(r.df), r.t);
  return r;
}

double bonferroni(double p, std::size_t comparisons) {
  return std::min(1.0, p * static_cast<double>(comparisons));
}

double bonferroni_threshold(double alpha, std::size_t comparisons) {
  if (comparisons == 0) throw Error(Errc::InvalidArgument, "no comparisons");
  return alpha / static_cast<double>(comparisons);
}

double cohens_d(std::span<const double> a, std::span<const double> b) {
  const double sa = sample_std(a);
  const double sb = sample_std(b);
  const double pooled = std::sqrt((sa * sa + sb * sb) / 2.0);
  const double diff = mean(a) - mean(b);
  if (pooled > 0.0) return diff / pooled;
  if (diff == 0.0) return 0.0;
  return diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
}

double correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(Errc::LengthMismatch, "correlation inputs differ in length");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

std::string format_stat(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return format_double(v);
}

}  // namespace intervene
