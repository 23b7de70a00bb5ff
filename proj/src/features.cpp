#include "spt2ss/features.hpp"

#include <cmath>
#include <stdexcept>

#include "spt2ss/ops.hpp"

namespace spt2ss {

namespace {

Tensor conv_branch(const Tensor& x, const Tensor& w, const Tensor& b) {
  return tanh(add_bias(conv1d(x, w), b));
}

}  // namespace

FeatureExtractor::FeatureExtractor(bool image_enabled, Rng& rng)
    : image_enabled_(image_enabled) {
  const auto bound_1d = [](int k) { return 1.0 / std::sqrt(static_cast<double>(k)); };
  w3_ = init_uniform({3, 1, 8}, bound_1d(3), rng);
  b3_ = init_uniform({8}, bound_1d(3), rng);
  w5_ = init_uniform({5, 1, 8}, bound_1d(5), rng);
  b5_ = init_uniform({8}, bound_1d(5), rng);
  w7_ = init_uniform({7, 1, 8}, bound_1d(7), rng);
  b7_ = init_uniform({8}, bound_1d(7), rng);
  if (image_enabled_) {
    const double ba = 1.0 / std::sqrt(9.0);
    const double bb = 1.0 / std::sqrt(9.0 * 8.0);
    w2a_ = init_uniform({3, 3, 1, 8}, ba, rng);
    b2a_ = init_uniform({8}, ba, rng);
    w2b_ = init_uniform({3, 3, 8, 8}, bb, rng);
    b2b_ = init_uniform({8}, bb, rng);
  }
}

Tensor FeatureExtractor::extract_1d(const Tensor& load_norm) const {
  return concat_last({conv_branch(load_norm, w3_, b3_), conv_branch(load_norm, w5_, b5_),
                      conv_branch(load_norm, w7_, b7_)});
}

Tensor FeatureExtractor::extract_2d(const Tensor& image) const {
  if (!image_enabled_) throw std::logic_error("extract_2d: 2-D branch is disabled");
  if (image.ndim() != 4 || image.dim(1) != image.dim(2)) {
    throw std::invalid_argument("extract_2d: expected a square [B x L x L x 1] image, got " +
                                shape_str(image.shape()));
  }
  Tensor h = tanh(add_bias(conv2d(image, w2a_), b2a_));
  h = tanh(add_bias(conv2d(h, w2b_), b2b_));
  return mean_over_width(h);
}

Tensor FeatureExtractor::forward(const Tensor& load_norm, const Tensor& thickness,
                                 const Tensor& image) const {
  if (!same_shape(load_norm.shape(), thickness.shape())) {
    throw std::invalid_argument("feature forward: load " + shape_str(load_norm.shape()) +
                                " vs thickness " + shape_str(thickness.shape()));
  }
  std::vector<Tensor> blocks = {load_norm, thickness, extract_1d(load_norm)};
  if (image_enabled_) {
    if (!image.defined()) {
      throw std::invalid_argument("feature forward: 2-D branch enabled but no image given");
    }
    if (image.dim(1) != load_norm.dim(1)) {
      throw std::invalid_argument("feature forward: image rows " + shape_str(image.shape()) +
                                  " do not match sequence " + shape_str(load_norm.shape()));
    }
    blocks.push_back(extract_2d(image));
  }
  return concat_last(blocks);
}

void FeatureExtractor::append_params(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + "conv1d_k3.w", w3_});
  out.push_back({prefix + "conv1d_k3.b", b3_});
  out.push_back({prefix + "conv1d_k5.w", w5_});
  out.push_back({prefix + "conv1d_k5.b", b5_});
  out.push_back({prefix + "conv1d_k7.w", w7_});
  out.push_back({prefix + "conv1d_k7.b", b7_});
  if (image_enabled_) {
    out.push_back({prefix + "conv2d_a.w", w2a_});
    out.push_back({prefix + "conv2d_a.b", b2a_});
    out.push_back({prefix + "conv2d_b.w", w2b_});
    out.push_back({prefix + "conv2d_b.b", b2b_});
  }
}

}  // namespace spt2ss
