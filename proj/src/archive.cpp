#include "intervene/archive.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "intervene/error.hpp"

namespace intervene {

std::vector<std::string> Archive::column_names() const {
  auto names = feature_names;
  names.push_back(target_name);
  return names;
}

std::vector<RegimeSpec> Archive::regime_specs() const {
  std::vector<RegimeSpec> out;
  for (const auto& r : regimes) out.push_back(r.spec);
  return out;
}

std::vector<double> Archive::row(std::size_t r) const {
  std::vector<double> out;
  for (const auto& f : features) out.push_back(f.at(r));
  out.push_back(target.at(r));
  return out;
}

namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      field_started = false;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      record.push_back(std::move(field));
      field.clear();
      field_started = false;
      if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
      record.clear();
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw Error(Errc::ParseError, "unterminated quoted field");
  if (field_started || !record.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

bool is_iso_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  const int month = std::stoi(s.substr(5, 2));
  const int day = std::stoi(s.substr(8, 2));
  return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

double parse_number(const std::string& s, std::size_t line) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  while (begin < end && *begin == ' ') ++begin;
  if (begin == end) throw Error(Errc::ParseError, "missing value on line " + std::to_string(line));
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v)) {
    throw Error(Errc::ParseError, "bad number '" + s + "' on line " + std::to_string(line));
  }
  return v;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void attach_regimes(Archive& archive, const std::vector<RegimeSpec>& regimes) {
  if (regimes.size() < 2) throw Error(Errc::InvalidArgument, "need at least two regimes");
  archive.regimes.clear();
  for (const auto& spec : regimes) {
    if (!is_iso_date(spec.start) || !is_iso_date(spec.end)) {
      throw Error(Errc::ParseError, "regime '" + spec.label + "' dates must be YYYY-MM-DD");
    }
    const auto& ts = archive.timestamps;
    auto lo = std::lower_bound(ts.begin(), ts.end(), spec.start);
    auto hi = std::upper_bound(ts.begin(), ts.end(), spec.end);
    if (spec.end < spec.start || lo >= hi) {
      throw Error(Errc::EmptyRegime, "regime '" + spec.label + "' covers no rows");
    }
    archive.regimes.push_back({spec, static_cast<std::size_t>(lo - ts.begin()), static_cast<std::size_t>(hi - ts.begin()) - 1});
  }
  auto sorted = archive.regimes;
  std::sort(sorted.begin(), sorted.end(), [](const Regime& a, const Regime& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].first <= sorted[i - 1].last) {
      throw Error(Errc::InvalidArgument, "regimes '" + sorted[i - 1].spec.label + "' and '" + sorted[i].spec.label + "' overlap");
    }
  }
}

Archive parse_archive(const std::string& csv_text, const std::vector<RegimeSpec>& regimes) {
  const auto records = parse_csv(csv_text);
  if (records.empty()) throw Error(Errc::ParseError, "empty archive");
  const auto& header = records[0];
  if (header.size() < 3) throw Error(Errc::MissingColumn, "need timestamp, at least one feature, and a target column");
  Archive a;
  a.timestamp_name = header[0];
  a.feature_names.assign(header.begin() + 1, header.end() - 1);
  a.target_name = header.back();
  a.features.resize(a.feature_names.size());
  for (std::size_t line = 1; line < records.size(); ++line) {
    const auto& rec = records[line];
    if (rec.size() != header.size()) {
      throw Error(Errc::ParseError, "line " + std::to_string(line + 1) + " has " + std::to_string(rec.size()) + " fields");
    }
    if (!is_iso_date(rec[0])) throw Error(Errc::ParseError, "bad date '" + rec[0] + "' on line " + std::to_string(line + 1));
    if (!a.timestamps.empty() && !(a.timestamps.back() < rec[0])) {
      throw Error(Errc::ParseError, "timestamps not strictly increasing at line " + std::to_string(line + 1));
    }
    a.timestamps.push_back(rec[0]);
    for (std::size_t f = 0; f < a.feature_names.size(); ++f) a.features[f].push_back(parse_number(rec[f + 1], line + 1));
    a.target.push_back(parse_number(rec.back(), line + 1));
  }
  if (a.rows() == 0) throw Error(Errc::ParseError, "archive has no data rows");
  attach_regimes(a, regimes);
  return a;
}

Archive load_archive(const std::filesystem::path& csv_path, const std::vector<RegimeSpec>& regimes) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read " + csv_path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_archive(ss.str(), regimes);
}

void save_archive(const std::filesystem::path& csv_path, const Archive& archive) {
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + csv_path.string());
  out << quote_if_needed(archive.timestamp_name);
  for (const auto& n : archive.column_names()) out << ',' << quote_if_needed(n);
  out << "\r\n";
  for (std::size_t r = 0; r < archive.rows(); ++r) {
    out << archive.timestamps[r];
    for (const auto& f : archive.features) out << ',' << format_double(f[r]);
    out << ',' << format_double(archive.target[r]) << "\r\n";
  }
}

Dataset query(const Archive& archive, const RegimeQuery& q, Rng& rng) {
  if (q.regime >= archive.regimes.size()) throw Error(Errc::InvalidIndex, "regime index out of range");
  if (q.n == 0) throw Error(Errc::InvalidArgument, "query needs n >= 1");
  const auto& reg = archive.regimes[q.regime];
  if (reg.last < reg.first || reg.last >= archive.rows()) throw Error(Errc::EmptyRegime, reg.spec.label);
  const std::size_t nf = archive.features.size();
  Dataset out(q.n, nf + 1);
  for (std::size_t r = 0; r < q.n; ++r) {
    const std::size_t src = reg.first + uniform_index(rng, reg.size());
    for (std::size_t f = 0; f < nf; ++f) out.at(r, f) = archive.features[f][src];
    out.at(r, nf) = archive.target[src];
  }
  return out;
}

namespace {

std::string month_date(std::size_t months_after_1960) {
  char buf[40];
  const int year = 1960 + static_cast<int>(months_after_1960 / 12);
  const int month = 1 + static_cast<int>(months_after_1960 % 12);
  std::snprintf(buf, sizeof buf, "%04d-%02d-01", year, month);
  return buf;
}

}  // namespace

Archive generate_synthetic_archive(std::size_t n_rows, std::size_t n_regimes, Rng& rng) {
  if (n_regimes < 2) throw Error(Errc::InvalidArgument, "need at least two regimes");
  if (n_rows < n_regimes) throw Error(Errc::InvalidArgument, "fewer rows than regimes");
  constexpr double kRho = 0.8;
  Archive a;
  a.feature_names = {"f1", "f2", "f3"};
  a.target_name = "y_next";
  a.features.assign(3, {});
  std::vector<double> f(3, 0.0);
  std::vector<RegimeSpec> specs;
  const std::size_t seg = n_rows / n_regimes;
  for (std::size_t r = 0; r < n_rows; ++r) {
    const std::size_t regime = std::min(r / seg, n_regimes - 1);
    const bool volatile_regime = regime % 2 == 1;
    const double scale = volatile_regime ? 1.5 : 0.3;
    const double lambda = volatile_regime ? 1.0 : 0.2;
    const double noise = volatile_regime ? 0.2 : 0.05;
    for (auto& v : f) v = kRho * v + scale * std::sqrt(1.0 - kRho * kRho) * standard_normal(rng);
    const double y = 0.5 * f[0] - 0.4 * f[1] + 0.3 * f[2] +
                     lambda * (0.3 * f[0] * f[0] + 0.8 * std::sin(1.5 * f[1])) + noise * standard_normal(rng);
    a.timestamps.push_back(month_date(r));
    for (std::size_t k = 0; k < 3; ++k) a.features[k].push_back(f[k]);
    a.target.push_back(y);
  }
  for (std::size_t g = 0; g < n_regimes; ++g) {
    const std::size_t first = g * seg;
    const std::size_t last = g + 1 == n_regimes ? n_rows - 1 : (g + 1) * seg - 1;
    specs.push_back({month_date(first), month_date(last), (g % 2 == 1 ? "volatile-" : "calm-") + std::to_string(g)});
  }
  attach_regimes(a, specs);
  return a;
}

std::pair<Archive, Archive> split_holdout(const Archive& archive, std::size_t every) {
  if (every < 2) throw Error(Errc::InvalidArgument, "holdout stride must be >= 2");
  Archive train;
  Archive hold;
  for (Archive* a : {&train, &hold}) {
    a->timestamp_name = archive.timestamp_name;
    a->feature_names = archive.feature_names;
    a->target_name = archive.target_name;
    a->features.assign(archive.features.size(), {});
  }
  for (std::size_t r = 0; r < archive.rows(); ++r) {
    Archive& dst = (r % every == every - 1) ? hold : train;
    dst.timestamps.push_back(archive.timestamps[r]);
    for (std::size_t f = 0; f < archive.features.size(); ++f) dst.features[f].push_back(archive.features[f][r]);
    dst.target.push_back(archive.target[r]);
  }
  attach_regimes(train, archive.regime_specs());
  attach_regimes(hold, archive.regime_specs());
  return {std::move(train), std::move(hold)};
}

std::vector<double> regime_target_variance(const Archive& archive) {
  std::vector<double> out;
  for (const auto& reg : archive.regimes) {
    double mean = 0.0;
    for (std::size_t r = reg.first; r <= reg.last; ++r) mean += archive.target[r];
    mean /= static_cast<double>(reg.size());
    double var = 0.0;
    for (std::size_t r = reg.first; r <= reg.last; ++r) var += (archive.target[r] - mean) * (archive.target[r] - mean);
    out.push_back(reg.size() > 1 ? var / static_cast<double>(reg.size() - 1) : 0.0);
  }
  return out;
}

}  // namespace intervene
