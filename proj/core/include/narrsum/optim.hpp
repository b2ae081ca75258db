#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "narrsum/autodiff.hpp"

namespace narrsum::ad {

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double global_grad_norm(std::span<Parameter* const> params);

/// Rescales every gradient by max_norm / ||g|| when ||g|| > max_norm.
/// Returns the norm before clipping. Throws NonFiniteGradient if any
/// gradient entry is NaN or infinite.
double clip_global_norm(std::span<Parameter* const> params, double max_norm = 1.0);

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over a fixed parameter list. Frozen parameters are skipped.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig config = {});
  explicit Adam(ParameterSet& params, AdamConfig config = {});

  void step();
  void zero_grad();

  double lr() const { return config_.lr; }
  void set_lr(double lr) { config_.lr = lr; }
  long steps() const { return t_; }
  std::span<Parameter* const> params() const { return params_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamConfig config_;
  long t_ = 0;
};

/// Clips, then steps; on non-finite gradients the step is skipped, gradients
/// are cleared and the exception propagates.
double clipped_step(Adam& optimizer, double max_norm);

/// Halves the learning rate once validation loss fails to improve for a
/// full epoch.
class PlateauDecay {
 public:
  explicit PlateauDecay(double factor = 0.5) : factor_(factor) {}
  /// Returns true when the rate was decayed.
  bool observe(double validation_loss, Adam& optimizer);

 private:
  double factor_;
  double best_ = 0.0;
  bool seen_ = false;
};

}  // namespace narrsum::ad
