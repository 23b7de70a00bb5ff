#pragma once

#include "spt2ss/params.hpp"
#include "spt2ss/tensor.hpp"

namespace spt2ss {

/// Per-time-step channel layout of the feature matrix. The raw block passes
/// the inputs through untouched; the learned blocks come from the parallel
/// 1-D convolutions and the image stack.
inline constexpr int kRawChannels = 2;   // normalized load, thickness
inline constexpr int kF1dChannels = 24;  // 3 kernel scales x 8 channels
inline constexpr int kF2dChannels = 8;

/// Builds the per-step feature matrix fed to the encoder: raw channels,
/// multi-scale 1-D conv features of the load sequence, and (when image input
/// is enabled) 2-D conv features of its angular-field image reduced along
/// columns. Channel order is fixed: [load, thickness, f1d, f2d].
class FeatureExtractor {
 public:
  /// `image_enabled = false` drops the 2-D branch entirely (the 1-D baseline
  /// configuration, 26 channels instead of 34).
  FeatureExtractor(bool image_enabled, Rng& rng);

  int out_channels() const { return image_enabled_ ? kRawChannels + kF1dChannels + kF2dChannels
                                                   : kRawChannels + kF1dChannels; }
  bool image_enabled() const { return image_enabled_; }

  /// load_norm: [B x L x 1] in [0,1]. Three same-padded conv branches
  /// (kernels 3, 5, 7; 1 -> 8 channels; tanh), concatenated to [B x L x 24].
  Tensor extract_1d(const Tensor& load_norm) const;

  /// image: [B x L x L x 1]. Two same-padded 3x3 conv layers (1 -> 8 -> 8,
  /// tanh), then the mean over the column axis: [B x L x 8]. Row i of the
  /// image corresponds to time step i, so the reduction keeps rows aligned
  /// with time.
  Tensor extract_2d(const Tensor& image) const;

  /// Concatenates [load_norm, thickness, extract_1d, extract_2d] into
  /// [B x L x C]. `image` is ignored when the 2-D branch is disabled.
  Tensor forward(const Tensor& load_norm, const Tensor& thickness, const Tensor& image) const;

  void append_params(const std::string& prefix, ParamList& out) const;

 private:
  bool image_enabled_;
  Tensor w3_, b3_, w5_, b5_, w7_, b7_;      // 1-D branches, [K x 1 x 8] + [8]
  Tensor w2a_, b2a_, w2b_, b2b_;            // 2-D stack, [3 x 3 x Cin x 8] + [8]
};

}  // namespace spt2ss
