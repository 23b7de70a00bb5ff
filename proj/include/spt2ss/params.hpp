#pragma once

#include <string>
#include <vector>

#include "spt2ss/rng.hpp"
#include "spt2ss/tensor.hpp"

namespace spt2ss {

/// One trainable tensor and its stable name. Checkpoints serialize parameters
/// in registration order, so every component appends its parameters in a
/// fixed sequence.
struct NamedParam {
  std::string name;
  Tensor tensor;
};

using ParamList = std::vector<NamedParam>;

inline std::vector<Tensor> tensors_of(const ParamList& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const NamedParam& p : params) out.push_back(p.tensor);
  return out;
}

/// Trainable tensor filled i.i.d. uniform on [-bound, bound].
inline Tensor init_uniform(Shape shape, double bound, Rng& rng) {
  Eigen::ArrayXd data(shape_numel(shape));
  for (Eigen::Index i = 0; i < data.size(); ++i) data[i] = rng.uniform(-bound, bound);
  return Tensor::from_data(std::move(shape), std::move(data), true);
}

}  // namespace spt2ss
