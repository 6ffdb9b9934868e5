#include "intervene/duffing.hpp"

#include <cmath>
#include <limits>

#include "intervene/error.hpp"

namespace intervene {

void DuffingParams::validate() const {
  if (!(dt > 0.0)) throw Error(Errc::InvalidArgument, "dt must be positive");
  if (n_osc < 2) throw Error(Errc::InvalidArgument, "need at least two oscillators");
  if (k < 0.0) throw Error(Errc::InvalidArgument, "coupling must be non-negative");
  if (forcing_amplitude.size() != n_osc || forcing_frequency.size() != n_osc) {
    throw Error(Errc::InvalidArgument, "one forcing amplitude and frequency per oscillator");
  }
  if (stride == 0) throw Error(Errc::InvalidArgument, "stride must be positive");
}

double DuffingParams::forcing(std::size_t i, double t) const {
  const double a = forcing_amplitude[i];
  return a == 0.0 ? 0.0 : a * std::cos(forcing_frequency[i] * t);
}

std::vector<double> acceleration(const OscState& s, const DuffingParams& p, const std::optional<Clamp>& clamp) {
  const std::size_t n = s.x.size();
  std::vector<double> a(n);
  for (std::size_t i = 0; i < n; ++i) {
    double coupling = 0.0;
    if (i > 0) coupling += p.k * (s.x[i - 1] - s.x[i]);
    if (i + 1 < n) coupling += p.k * (s.x[i + 1] - s.x[i]);
    const double x = s.x[i];
    a[i] = -p.delta * s.v[i] - p.alpha * x - p.beta * x * x * x + p.forcing(i, s.t) + coupling;
  }
  if (clamp) a.at(clamp->index) = 0.0;
  return a;
}

namespace {

void apply_clamp(OscState& s, const std::optional<Clamp>& clamp) {
  if (!clamp) return;
  s.x.at(clamp->index) = clamp->value;
  s.v.at(clamp->index) = 0.0;
}

}  // namespace

OscState rk4_step(const OscState& s, const DuffingParams& p, const std::optional<Clamp>& clamp) {
  const std::size_t n = s.x.size();
  const double h = p.dt;
  auto offset = [&](const std::vector<double>& dx, const std::vector<double>& dv, double scale) {
    OscState o{s.x, s.v, s.t + scale};
    for (std::size_t i = 0; i < n; ++i) {
      o.x[i] += scale * dx[i];
      o.v[i] += scale * dv[i];
    }
    apply_clamp(o, clamp);
    return o;
  };

  OscState base = s;
  apply_clamp(base, clamp);
  const auto k1x = base.v;
  const auto k1v = acceleration(base, p, clamp);
  const OscState s2 = offset(k1x, k1v, h / 2);
  const auto k2x = s2.v;
  const auto k2v = acceleration(s2, p, clamp);
  const OscState s3 = offset(k2x, k2v, h / 2);
  const auto k3x = s3.v;
  const auto k3v = acceleration(s3, p, clamp);
  const OscState s4 = offset(k3x, k3v, h);
  const auto k4x = s4.v;
  const auto k4v = acceleration(s4, p, clamp);

  OscState out{base.x, base.v, s.t + h};
  for (std::size_t i = 0; i < n; ++i) {
    out.x[i] += h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
    out.v[i] += h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
    if (!std::isfinite(out.x[i]) || !std::isfinite(out.v[i])) {
      throw Error(Errc::NonFiniteState, "oscillator " + std::to_string(i) + " diverged at t=" + format_double(out.t));
    }
  }
  apply_clamp(out, clamp);
  return out;
}

OscState random_initial_state(const DuffingParams& p, const std::optional<Clamp>& clamp, Rng& rng) {
  OscState s;
  s.x.resize(p.n_osc);
  s.v.resize(p.n_osc);
  for (std::size_t i = 0; i < p.n_osc; ++i) {
    s.x[i] = uniform(rng, -1.0, 1.0);
    s.v[i] = uniform(rng, -0.5, 0.5);
  }
  apply_clamp(s, clamp);
  return s;
}

Dataset sample_trajectory(const DuffingParams& p, const std::optional<Clamp>& clamp, std::size_t horizon,
                          std::size_t stride, Rng& rng) {
  p.validate();
  if (stride == 0 || horizon < stride) throw Error(Errc::InvalidArgument, "need horizon >= stride >= 1");
  if (clamp && clamp->index >= p.n_osc) throw Error(Errc::InvalidIndex, "clamp index out of range");
  OscState s = random_initial_state(p, clamp, rng);
  for (std::size_t i = 0; i < p.burn_in; ++i) s = rk4_step(s, p, clamp);

  const std::size_t rows = horizon / stride;
  std::optional<Intervention> prov;
  if (clamp) prov = Intervention{clamp->index, clamp->value};
  Dataset out(rows, p.n_osc, prov);
  std::vector<double> times(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < stride; ++i) s = rk4_step(s, p, clamp);
    for (std::size_t c = 0; c < p.n_osc; ++c) out.at(r, c) = s.x[c];
    times[r] = s.t;
  }
  out.set_times(std::move(times));
  return out;
}

double oscillator_energy(const OscState& s, const DuffingParams& p, std::size_t i) {
  const double x = s.x.at(i);
  const double v = s.v.at(i);
  return 0.5 * v * v + 0.5 * p.alpha * x * x + 0.25 * p.beta * x * x * x * x;
}

double coupling_error(double estimated_k, double true_k) { return std::abs(estimated_k - true_k); }

nlohmann::json duffing_to_json(const DuffingParams& p) {
  return {{"delta", p.delta},
          {"alpha", p.alpha},
          {"beta", p.beta},
          {"k", p.k},
          {"n_osc", p.n_osc},
          {"forcing_amplitude", p.forcing_amplitude},
          {"forcing_frequency", p.forcing_frequency},
          {"dt", p.dt},
          {"burn_in", p.burn_in},
          {"stride", p.stride}};
}

DuffingParams duffing_from_json(const nlohmann::json& j) {
  DuffingParams p;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "delta") p.delta = value.get<double>();
      else if (key == "alpha") p.alpha = value.get<double>();
      else if (key == "beta") p.beta = value.get<double>();
      else if (key == "k") p.k = value.get<double>();
      else if (key == "n_osc") p.n_osc = value.get<std::size_t>();
      else if (key == "forcing_amplitude") p.forcing_amplitude = value.get<std::vector<double>>();
      else if (key == "forcing_frequency") p.forcing_frequency = value.get<std::vector<double>>();
      else if (key == "dt") p.dt = value.get<double>();
      else if (key == "burn_in") p.burn_in = value.get<std::size_t>();
      else if (key == "stride") p.stride = value.get<std::size_t>();
      else throw Error(Errc::ConfigError, "unknown duffing key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigError, std::string("duffing: ") + e.what());
  }
  p.validate();
  return p;
}

// --- CouplingLearner ---------------------------------------------------------

namespace {

struct Sample {
  Eigen::Matrix<double, CouplingLearner::kFeatures, 1> phi;
  double target;
};

/// Visits every interior snapshot of every unclamped oscillator.
template <typename F>
void for_each_sample(const Dataset& d, const DuffingParams& p, F&& f) {
  if (d.rows() < 3) return;
  if (d.times().size() != d.rows()) throw Error(Errc::InvalidArgument, "trajectory needs timestamps");
  const std::size_t n = d.cols();
  const auto clamped = d.provenance() ? static_cast<std::ptrdiff_t>(d.provenance()->node) : -1;
  for (std::size_t r = 1; r + 1 < d.rows(); ++r) {
    const double h = d.times()[r + 1] - d.times()[r];
    const double t = d.times()[r];
    for (std::size_t i = 0; i < n; ++i) {
      if (static_cast<std::ptrdiff_t>(i) == clamped) continue;
      const double x = d.at(r, i);
      double nbr = 0.0;
      if (i > 0) nbr += d.at(r, i - 1) - x;
      if (i + 1 < n) nbr += d.at(r, i + 1) - x;
      Sample s;
      s.phi << 1.0, x, x * x * x, (d.at(r + 1, i) - d.at(r - 1, i)) / (2.0 * h), nbr;
      s.target = (d.at(r + 1, i) - 2.0 * x + d.at(r - 1, i)) / (h * h) - p.forcing(i, t);
      f(i, s);
    }
  }
}

}  // namespace

CouplingLearner::CouplingLearner(DuffingParams params, double ridge)
    : params_(std::move(params)),
      ridge_(ridge),
      gram_(params_.n_osc, Mat::Zero()),
      moment_(params_.n_osc, Vec::Zero()),
      samples_(params_.n_osc, 0),
      weights_(params_.n_osc, Vec::Zero()),
      ledger_(params_.n_osc, std::numeric_limits<double>::infinity()) {
  params_.validate();
}

double CouplingLearner::coupling_estimate() const {
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < params_.n_osc; ++i) {
    if (samples_[i] < kFeatures) continue;
    acc += weights_[i](4);
    ++n;
  }
  return n == 0 ? 0.0 : acc / static_cast<double>(n);
}

std::unique_ptr<Learner> CouplingLearner::clone() const { return std::make_unique<CouplingLearner>(*this); }

void CouplingLearner::accumulate(const Dataset& data) {
  if (data.cols() != params_.n_osc) throw Error(Errc::LengthMismatch, "trajectory width");
  for_each_sample(data, params_, [&](std::size_t i, const Sample& s) {
    gram_[i] += s.phi * s.phi.transpose();
    moment_[i] += s.phi * s.target;
    ++samples_[i];
  });
  rows_seen_ += data.rows();
}

void CouplingLearner::solve() {
  for (std::size_t i = 0; i < params_.n_osc; ++i) {
    if (samples_[i] < kFeatures) continue;
    const double scale = std::max(1.0, gram_[i].trace());
    Mat a = gram_[i] + ridge_ * scale * Mat::Identity();
    weights_[i] = a.ldlt().solve(moment_[i]);
  }
}

void CouplingLearner::observe(const Dataset& data) { accumulate(data); }

void CouplingLearner::fit_episode(Rng&) { solve(); }

void CouplingLearner::fit_probe(const Dataset& probe, std::size_t, double, std::size_t, Rng&) {
  accumulate(probe);
  solve();
}

std::vector<double> CouplingLearner::validation_losses(const ValidationSet& val) const {
  std::vector<double> sse(params_.n_osc, 0.0);
  std::vector<std::size_t> count(params_.n_osc, 0);
  for (const auto& part : val.parts) {
    for_each_sample(part, params_, [&](std::size_t i, const Sample& s) {
      const double e = weights_[i].dot(s.phi) - s.target;
      sse[i] += e * e;
      ++count[i];
    });
  }
  for (std::size_t i = 0; i < params_.n_osc; ++i) sse[i] = count[i] ? sse[i] / static_cast<double>(count[i]) : 0.0;
  return sse;
}

const std::vector<double>& CouplingLearner::evaluate(const ValidationSet& val) {
  ledger_ = validation_losses(val);
  return ledger_;
}

}  // namespace intervene
