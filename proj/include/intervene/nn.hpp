#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "intervene/rng.hpp"

namespace intervene {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

/// Adam over a flat parameter vector.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n_params, AdamConfig cfg = {}) : cfg_(cfg), m_(n_params, 0.0), v_(n_params, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad, double lr);

  long steps_taken() const { return t_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }
  void restore(std::vector<double> m, std::vector<double> v, long t);

  friend bool operator==(const Adam&, const Adam&) = default;

 private:
  AdamConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  long t_ = 0;
};

/// in -> hidden (ReLU, optional inverted dropout) -> out.
/// Flat parameter layout: W1 [hidden x in] row-major, b1 [hidden],
/// W2 [out x hidden] row-major, b2 [out].
class TwoLayerNet {
 public:
  struct Cache {
    std::vector<double> input;
    std::vector<double> pre;     // hidden pre-activation
    std::vector<double> hidden;  // post ReLU and dropout
    std::vector<double> mask;    // empty when deterministic
  };

  TwoLayerNet() = default;
  TwoLayerNet(std::size_t in, std::size_t hidden, std::size_t out);

  std::size_t input_dim() const { return in_; }
  std::size_t hidden_dim() const { return hidden_; }
  std::size_t output_dim() const { return out_; }
  std::size_t param_count() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  /// Every weight and bias ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); fan_in 0 uses 1.
  void init_uniform(Rng& rng);
  void zero_output_layer();

  double& w1(std::size_t h, std::size_t i) { return params_[h * in_ + i]; }
  double& b1(std::size_t h) { return params_[hidden_ * in_ + h]; }
  double& w2(std::size_t o, std::size_t h) { return params_[hidden_ * in_ + hidden_ + o * hidden_ + h]; }
  double& b2(std::size_t o) { return params_[hidden_ * in_ + hidden_ + out_ * hidden_ + o]; }
  double w1(std::size_t h, std::size_t i) const { return params_[h * in_ + i]; }
  double b1(std::size_t h) const { return params_[hidden_ * in_ + h]; }
  double w2(std::size_t o, std::size_t h) const { return params_[hidden_ * in_ + hidden_ + o * hidden_ + h]; }
  double b2(std::size_t o) const { return params_[hidden_ * in_ + hidden_ + out_ * hidden_ + o]; }

  /// Writes `out_dim` outputs. `cache` may be null. With dropout_p > 0 a mask
  /// is drawn from rng (which must then be non-null).
  void forward(std::span<const double> x, std::span<double> out, Cache* cache = nullptr,
               double dropout_p = 0.0, Rng* rng = nullptr) const;

  /// Accumulates d(loss)/d(params) into grad given d(loss)/d(out).
  void backward(const Cache& cache, std::span<const double> d_out, std::span<double> grad) const;

  friend bool operator==(const TwoLayerNet&, const TwoLayerNet&) = default;

 private:
  std::size_t in_ = 0;
  std::size_t hidden_ = 0;
  std::size_t out_ = 0;
  std::vector<double> params_;
};

/// log-softmax of logits / temperature.
std::vector<double> log_softmax(std::span<const double> logits, double temperature = 1.0);

}  // namespace intervene
