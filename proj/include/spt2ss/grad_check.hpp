#pragma once

#include <functional>
#include <vector>

#include "spt2ss/tensor.hpp"

namespace spt2ss {

/// Compares reverse-mode gradients of the scalar `fn()` against central
/// finite differences over every element of `params`. `fn` must rebuild its
/// graph from the current parameter values on each call. Returns the largest
/// relative error |analytic - numeric| / max(1, |analytic|, |numeric|).
double max_grad_rel_error(const std::function<Tensor()>& fn, const std::vector<Tensor>& params);

}  // namespace spt2ss
