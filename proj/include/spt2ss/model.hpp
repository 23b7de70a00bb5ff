#pragma once

#include <vector>

#include "spt2ss/features.hpp"
#include "spt2ss/material.hpp"
#include "spt2ss/params.hpp"
#include "spt2ss/seq2seq.hpp"

namespace spt2ss {

struct ModelConfig {
  GridConfig grid;
  int hidden_size = 128;
  int num_layers = 5;
  int num_heads = 4;
  double dropout = 0.1;
  bool attn_exact = false;
  bool gaf_enabled = true;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Constant (non-trainable) tensors for one batch of specimens.
struct BatchInput {
  Tensor load_norm;    // [B x L_in x 1], min-max scaled
  Tensor thickness;    // [B x L_in x 1], t/4 broadcast over time
  Tensor image;        // [B x L_in x L_in x 1]; empty when images disabled
  Tensor target_norm;  // [B x L_out]; empty when built without targets
  int batch = 0;
};

/// Assembles model inputs: scaled load and thickness channels, the per-sample
/// angular-field image of the raw load curve (lenient mode), and optionally
/// the scaled stress targets.
BatchInput make_batch(const std::vector<const CurvePair*>& samples, const NormStats& stats,
                      bool gaf_enabled, bool with_target);

/// Feature extraction plus the encoder-decoder network, end to end:
/// curves in, normalized stress sequence out.
class SptStressModel {
 public:
  SptStressModel(const ModelConfig& cfg, Rng& rng);

  /// Returns [B x L_out] normalized stress predictions. Pass the batch's
  /// target and a positive ratio for teacher-forced training; inference uses
  /// ratio 0 and no target.
  Tensor forward(const BatchInput& batch, double teacher_forcing_ratio, bool training,
                 Rng& rng) const;

  /// Named parameters in serialization order:
  /// features, encoder, lift, decoder, attention, head.
  ParamList params() const;

  const ModelConfig& config() const { return cfg_; }
  const FeatureExtractor& features() const { return features_; }
  const Seq2SeqNet& net() const { return net_; }

 private:
  ModelConfig cfg_;
  FeatureExtractor features_;
  Seq2SeqNet net_;
};

}  // namespace spt2ss
