#include "intervene/nn.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

namespace intervene {

void Adam::step(std::span<double> params, std::span<const double> grad, double lr) {
  assert(params.size() == m_.size() && grad.size() == m_.size());
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
    const double m_hat = m_[i] / bc1;
    const double v_hat = v_[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
  }
}

void Adam::restore(std::vector<double> m, std::vector<double> v, long t) {
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

TwoLayerNet::TwoLayerNet(std::size_t in, std::size_t hidden, std::size_t out)
    : in_(in), hidden_(hidden), out_(out), params_(hidden * in + hidden + out * hidden + out, 0.0) {}

void TwoLayerNet::init_uniform(Rng& rng) {
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(in_, 1)));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(hidden_, 1)));
  std::uniform_real_distribution<double> u1(-bound1, bound1);
  std::uniform_real_distribution<double> u2(-bound2, bound2);
  const std::size_t layer1 = hidden_ * in_ + hidden_;
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i] = i < layer1 ? u1(rng) : u2(rng);
}

void TwoLayerNet::zero_output_layer() {
  std::fill(params_.begin() + static_cast<std::ptrdiff_t>(hidden_ * in_ + hidden_), params_.end(), 0.0);
}

void TwoLayerNet::forward(std::span<const double> x, std::span<double> out, Cache* cache, double dropout_p,
                          Rng* rng) const {
  assert(x.size() == in_ && out.size() == out_);
  Cache local;
  Cache& c = cache ? *cache : local;
  c.input.assign(x.begin(), x.end());
  c.pre.resize(hidden_);
  c.hidden.resize(hidden_);
  c.mask.clear();
  const bool stochastic = dropout_p > 0.0;
  if (stochastic) {
    c.mask.resize(hidden_);
    std::bernoulli_distribution keep(1.0 - dropout_p);
    const double scale = 1.0 / (1.0 - dropout_p);
    for (auto& m : c.mask) m = keep(*rng) ? scale : 0.0;
  }
  for (std::size_t h = 0; h < hidden_; ++h) {
    double acc = b1(h);
    const double* row = params_.data() + h * in_;
    for (std::size_t i = 0; i < in_; ++i) acc += row[i] * x[i];
    c.pre[h] = acc;
    double a = acc > 0.0 ? acc : 0.0;
    if (stochastic) a *= c.mask[h];
    c.hidden[h] = a;
  }
  for (std::size_t o = 0; o < out_; ++o) {
    double acc = b2(o);
    const double* row = params_.data() + hidden_ * in_ + hidden_ + o * hidden_;
    for (std::size_t h = 0; h < hidden_; ++h) acc += row[h] * c.hidden[h];
    out[o] = acc;
  }
}

void TwoLayerNet::backward(const Cache& c, std::span<const double> d_out, std::span<double> grad) const {
  assert(d_out.size() == out_ && grad.size() == params_.size());
  const std::size_t off_b1 = hidden_ * in_;
  const std::size_t off_w2 = off_b1 + hidden_;
  const std::size_t off_b2 = off_w2 + out_ * hidden_;
  std::vector<double> d_hidden(hidden_, 0.0);
  for (std::size_t o = 0; o < out_; ++o) {
    const double g = d_out[o];
    if (g == 0.0) continue;
    grad[off_b2 + o] += g;
    const double* row = params_.data() + off_w2 + o * hidden_;
    double* grow = grad.data() + off_w2 + o * hidden_;
    for (std::size_t h = 0; h < hidden_; ++h) {
      grow[h] += g * c.hidden[h];
      d_hidden[h] += g * row[h];
    }
  }
  for (std::size_t h = 0; h < hidden_; ++h) {
    if (c.pre[h] <= 0.0) continue;
    double g = d_hidden[h];
    if (!c.mask.empty()) g *= c.mask[h];
    if (g == 0.0) continue;
    grad[off_b1 + h] += g;
    double* grow = grad.data() + h * in_;
    for (std::size_t i = 0; i < in_; ++i) grow[i] += g * c.input[i];
  }
}

std::vector<double> log_softmax(std::span<const double> logits, double temperature) {
  std::vector<double> out(logits.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (double l : logits) mx = std::max(mx, l / temperature);
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l / temperature - mx);
  const double lse = mx + std::log(sum);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] / temperature - lse;
  return out;
}

}  // namespace intervene
