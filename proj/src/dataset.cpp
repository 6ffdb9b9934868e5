#include "intervene/dataset.hpp"

#include <array>
#include <charconv>
#include <fstream>

#include <nlohmann/json.hpp>

namespace intervene {

Dataset::Dataset(std::size_t rows, std::size_t cols, std::optional<Intervention> provenance)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0), provenance_(provenance) {}

std::vector<double> Dataset::row(std::size_t r) const {
  std::vector<double> out(cols_);
  for (std::size_t c = 0; c < cols_; ++c) out[c] = at(r, c);
  return out;
}

void Dataset::set_times(std::vector<double> t) {
  if (!t.empty() && t.size() != rows_) {
    throw Error(Errc::LengthMismatch, "timestamps must match row count");
  }
  times_ = std::move(t);
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data,
                       const std::vector<std::string>& names) {
  if (names.size() != data.cols()) throw Error(Errc::LengthMismatch, "column names do not match dataset");
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  const bool timed = !data.times().empty();
  if (timed) out << "time,";
  for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << names[c];
  out << '\n';
  for (std::size_t r = 0; r < data.rows(); ++r) {
    if (timed) out << format_double(data.times()[r]) << ',';
    for (std::size_t c = 0; c < data.cols(); ++c) out << (c ? "," : "") << format_double(data.at(r, c));
    out << '\n';
  }
}

void write_provenance_json(const std::filesystem::path& path, const Dataset& data,
                           const std::vector<std::string>& names, std::uint64_t seed) {
  nlohmann::json j;
  if (const auto& p = data.provenance()) {
    j["provenance"] = {{"node", p->node}, {"name", names.at(p->node)}, {"value", p->value}};
  } else {
    j["provenance"] = "observational";
  }
  j["seed"] = seed;
  j["n"] = data.rows();
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace intervene
