#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ztn/errors.hpp"

namespace ztn {

struct AdamParams {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias-corrected moment estimates over a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t num_params, AdamParams p) : p_(p), m_(num_params, 0.0), v_(num_params, 0.0) {
    if (!(p_.learning_rate > 0.0) || !(p_.beta1 >= 0.0 && p_.beta1 < 1.0) || !(p_.beta2 >= 0.0 && p_.beta2 < 1.0) ||
        !(p_.epsilon > 0.0))
      throw ConfigError("invalid Adam hyperparameters");
  }

  void step(std::span<double> params, std::span<const double> grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) throw DataError("Adam parameter size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(p_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(p_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = p_.beta1 * m_[i] + (1.0 - p_.beta1) * grads[i];
      v_[i] = p_.beta2 * v_[i] + (1.0 - p_.beta2) * grads[i] * grads[i];
      const double m_hat = m_[i] / c1;
      const double v_hat = v_[i] / c2;
      params[i] -= p_.learning_rate * m_hat / (std::sqrt(v_hat) + p_.epsilon);
    }
  }

  std::size_t steps() const noexcept { return t_; }
  const std::vector<double>& first_moment() const noexcept { return m_; }
  const std::vector<double>& second_moment() const noexcept { return v_; }
  const AdamParams& params() const noexcept { return p_; }

 private:
  AdamParams p_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace ztn
