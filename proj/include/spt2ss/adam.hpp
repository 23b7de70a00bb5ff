#pragma once

#include <cstdint>
#include <vector>

#include "spt2ss/tensor.hpp"

namespace spt2ss {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam optimizer over a fixed parameter list. Moment buffers are keyed by
/// position, so the list must not change between steps.
class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, AdamConfig cfg = {});

  /// Applies one bias-corrected update from each parameter's accumulated gradient.
  void step();

  void zero_grad();

  std::int64_t step_count() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<Eigen::ArrayXd> m_;
  std::vector<Eigen::ArrayXd> v_;
  AdamConfig cfg_;
  std::int64_t t_ = 0;
};

/// Scales all gradients in place so their joint L2 norm does not exceed
/// `max_norm`. Returns the norm measured before clipping.
double clip_global_norm(const std::vector<Tensor>& params, double max_norm);

}  // namespace spt2ss
