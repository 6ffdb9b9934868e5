#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "intervene/dataset.hpp"
#include "intervene/rng.hpp"

namespace intervene {

/// Inclusive ISO-8601 date range with a label.
struct RegimeSpec {
  std::string start;
  std::string end;
  std::string label;

  friend bool operator==(const RegimeSpec&, const RegimeSpec&) = default;
};

struct Regime {
  RegimeSpec spec;
  std::size_t first = 0;  // row indices, inclusive
  std::size_t last = 0;

  std::size_t size() const { return last - first + 1; }
};

/// Static time-series archive. Row t holds features at t and the target
/// observed at t+1.
struct Archive {
  std::string timestamp_name = "date";
  std::vector<std::string> timestamps;
  std::vector<std::string> feature_names;
  std::string target_name;
  std::vector<std::vector<double>> features;  // [feature][row]
  std::vector<double> target;
  std::vector<Regime> regimes;

  std::size_t rows() const { return timestamps.size(); }
  std::vector<std::string> column_names() const;  // features then target
  std::vector<RegimeSpec> regime_specs() const;
  std::vector<double> row(std::size_t r) const;  // features then target
};

struct RegimeQuery {
  std::size_t regime = 0;
  std::size_t n = 1;
};

/// Header row, first column an ISO date, last column the target, every other
/// column a feature; RFC-4180 quoting. Rows with missing values are rejected.
/// Throws Error{IoError, ParseError, MissingColumn, EmptyRegime}.
Archive load_archive(const std::filesystem::path& csv_path, const std::vector<RegimeSpec>& regimes);

/// Parses CSV text; same rules as load_archive.
Archive parse_archive(const std::string& csv_text, const std::vector<RegimeSpec>& regimes);

void save_archive(const std::filesystem::path& csv_path, const Archive& archive);

/// Attaches regimes; throws Error{EmptyRegime} for ranges that hit no rows,
/// Error{InvalidArgument} for overlaps or fewer than two regimes.
void attach_regimes(Archive& archive, const std::vector<RegimeSpec>& regimes);

/// Uniform with-replacement draw from one regime; columns = features + target.
Dataset query(const Archive& archive, const RegimeQuery& q, Rng& rng);

/// Three AR(1) features and target y = 0.5 f1 - 0.4 f2 + 0.3 f3 + lambda_r (0.3 f1^2 + 0.8 sin(1.5 f2)) + noise.
/// Even regimes are calm (feature scale 0.3, lambda 0.2, noise 0.05); odd regimes are
/// volatile (scale 1.5, lambda 1, noise 0.2). Monthly dates from 1960-01-01.
Archive generate_synthetic_archive(std::size_t n_rows, std::size_t n_regimes, Rng& rng);

/// Splits every regime into training rows and every `every`-th row held out.
std::pair<Archive, Archive> split_holdout(const Archive& archive, std::size_t every);

/// Sample variance of the target inside each regime.
std::vector<double> regime_target_variance(const Archive& archive);

}  // namespace intervene
