#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "intervene/error.hpp"

namespace intervene {

/// do(V_node = value).
struct Intervention {
  std::size_t node = 0;
  double value = 0.0;

  friend bool operator==(const Intervention&, const Intervention&) = default;
};

struct Interval {
  double lo = -5.0;
  double hi = 5.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
  double width() const { return hi - lo; }
};

/// Samples x nodes, stored column-major. Provenance is either observational
/// (no intervention) or the intervention that produced every row.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t rows, std::size_t cols, std::optional<Intervention> provenance = std::nullopt);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  double& at(std::size_t r, std::size_t c) { return data_[c * rows_ + r]; }
  double at(std::size_t r, std::size_t c) const { return data_[c * rows_ + r]; }

  std::span<double> column(std::size_t c) { return {data_.data() + c * rows_, rows_}; }
  std::span<const double> column(std::size_t c) const { return {data_.data() + c * rows_, rows_}; }
  std::vector<double> row(std::size_t r) const;

  const std::optional<Intervention>& provenance() const { return provenance_; }
  void set_provenance(std::optional<Intervention> p) { provenance_ = p; }

  /// Optional per-row timestamps (simulation time for trajectories).
  const std::vector<double>& times() const { return times_; }
  void set_times(std::vector<double> t);

  const std::vector<double>& raw() const { return data_; }

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
  std::optional<Intervention> provenance_;
  std::vector<double> times_;
};

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

/// CSV with header = column names; a leading "time" column when the dataset
/// carries timestamps.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data,
                       const std::vector<std::string>& names);

/// JSON sidecar: {"provenance": "observational" | {"node":..,"name":..,"value":..}, "seed":.., "n":..}
void write_provenance_json(const std::filesystem::path& path, const Dataset& data,
                           const std::vector<std::string>& names, std::uint64_t seed);

}  // namespace intervene
