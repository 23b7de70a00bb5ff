#pragma once

#include "spt2ss/params.hpp"
#include "spt2ss/tensor.hpp"

namespace spt2ss {

/// Cross-attention from one decoder output onto the encoder's hidden
/// sequence. Two modes:
///  - exact: single head, no projections, no scaling. Scores are the raw
///    dot products h_i . o_t, softmaxed over i; the context is the convex
///    combination of the raw hidden states.
///  - multi-head: learned query/key/value projections split into
///    `num_heads` slices of width H/num_heads, per-head scaled dot-product
///    (1/sqrt(head_dim)) softmax, per-head contexts concatenated and mixed
///    by an output projection. No biases.
class CrossAttention {
 public:
  CrossAttention(int hidden_size, int num_heads, bool exact, Rng& rng);

  /// Per-sequence precomputation, reused across all decoder steps: projected
  /// keys/values in multi-head mode, the raw sequence itself in exact mode.
  struct Prepared {
    Tensor h_seq;   // [B x L x H]
    Tensor keys;    // [B x L x H]
    Tensor values;  // [B x L x H]
  };
  Prepared prepare(const Tensor& h_seq) const;

  struct Result {
    Tensor context;  // [B x H]
    Tensor alpha;    // [B x L]; in multi-head mode filled only on request
  };
  /// `want_alpha` asks for the attention weights (head average in multi-head
  /// mode); they are reporting output, not part of the forward computation.
  Result attend(const Tensor& o_t, const Prepared& prep, bool want_alpha = false) const;

  bool exact() const { return exact_; }
  int num_heads() const { return num_heads_; }
  int hidden_size() const { return hidden_; }

  void append_params(const std::string& prefix, ParamList& out) const;

 private:
  int hidden_;
  int num_heads_;
  bool exact_;
  Tensor w_q_, w_k_, w_v_, w_o_;  // [H x H] each, multi-head mode only
};

}  // namespace spt2ss
