#include "narrsum/optim.hpp"

#include <cmath>
#include <string>

namespace narrsum::ad {

double global_grad_norm(std::span<Parameter* const> params) {
  double sq = 0.0;
  for (const Parameter* p : params) {
    for (double g : p->grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

double clip_global_norm(std::span<Parameter* const> params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (!std::isfinite(norm)) {
    throw NonFiniteGradient("non-finite gradient norm (" + std::to_string(norm) + ")");
  }
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (Parameter* p : params) {
      for (double& g : p->grad()) g *= factor;
    }
  }
  return norm;
}

Adam::Adam(std::vector<Parameter*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (Parameter* p : params_) {
    m_.emplace_back(p->shape().size(), 0.0);
    v_.emplace_back(p->shape().size(), 0.0);
  }
}

Adam::Adam(ParameterSet& params, AdamConfig config) : Adam(params.all(), config) {}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter* p = params_[k];
    if (p->frozen || !p->has_grad()) continue;
    auto data = p->data();
    auto grad = p->grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      data[i] -= config_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

double clipped_step(Adam& optimizer, double max_norm) {
  double norm = 0.0;
  try {
    norm = clip_global_norm(optimizer.params(), max_norm);
  } catch (const NonFiniteGradient&) {
    optimizer.zero_grad();
    throw;
  }
  optimizer.step();
  optimizer.zero_grad();
  return norm;
}

bool PlateauDecay::observe(double validation_loss, Adam& optimizer) {
  if (!seen_ || validation_loss < best_) {
    best_ = validation_loss;
    seen_ = true;
    return false;
  }
  optimizer.set_lr(optimizer.lr() * factor_);
  return true;
}

}  // namespace narrsum::ad
