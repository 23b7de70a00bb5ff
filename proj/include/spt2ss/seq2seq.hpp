#pragma once

#include "spt2ss/attention.hpp"
#include "spt2ss/lstm.hpp"
#include "spt2ss/params.hpp"
#include "spt2ss/tensor.hpp"

namespace spt2ss {

struct Seq2SeqConfig {
  int input_channels = 34;
  int hidden_size = 128;
  int num_layers = 5;
  int num_heads = 4;
  double dropout = 0.1;
  bool attn_exact = false;
};

/// Encoder-decoder over per-step feature rows. The encoder consumes the
/// whole feature matrix; the decoder starts from the encoder's final state
/// and a zero start token, lifts each previous scalar prediction to the
/// hidden width, takes one stacked-LSTM step, attends over the encoder
/// sequence and maps [output ; context] to the next scalar.
class Seq2SeqNet {
 public:
  Seq2SeqNet(const Seq2SeqConfig& cfg, Rng& rng);

  EncoderStates encode(const Tensor& m, bool training, Rng& rng) const;

  struct StepOut {
    Tensor y_hat;  // [B x 1]
    LstmState state;
    Tensor alpha;  // [B x L] when requested
  };
  StepOut decode_step(const Tensor& prev_y, const LstmState& state,
                      const CrossAttention::Prepared& prep, bool training, Rng& rng,
                      bool want_alpha = false) const;

  Tensor predict_head(const Tensor& o_t, const Tensor& context) const;

  /// Full pass: encode once, decode `l_out` steps autoregressively. When a
  /// target is given and the ratio is positive, each step's successor input
  /// is the ground truth with that probability (one draw per step, shared by
  /// the batch). Inference: null target, ratio 0.
  Tensor forward(const Tensor& m, int l_out, const Tensor* target, double teacher_forcing_ratio,
                 bool training, Rng& rng) const;

  const Seq2SeqConfig& config() const { return cfg_; }
  const CrossAttention& attention() const { return attn_; }
  const LstmStack& encoder() const { return encoder_; }
  const LstmStack& decoder() const { return decoder_; }

  void append_params(ParamList& out) const;

 private:
  Seq2SeqConfig cfg_;
  LstmStack encoder_;
  Tensor lift_w_, lift_b_;  // [1 x H], [H]
  LstmStack decoder_;
  CrossAttention attn_;
  Tensor head_w_, head_b_;  // [2H x 1], [1]
};

}  // namespace spt2ss
