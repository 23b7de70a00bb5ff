#pragma once

#include <utility>
#include <vector>

#include "spt2ss/params.hpp"
#include "spt2ss/tensor.hpp"

namespace spt2ss {

/// Per-layer recurrent state; each entry is [B x hidden].
struct LstmState {
  std::vector<Tensor> h;
  std::vector<Tensor> c;
};

/// Stacked LSTM. Gates are packed [input | forget | cell | output] along the
/// last axis of the combined projections, so each layer holds one
/// [in x 4H] input matrix, one [H x 4H] recurrent matrix and one [4H] bias.
/// Dropout (training only) masks the activations passed between layers,
/// never the recurrent path or the top layer's output.
class LstmStack {
 public:
  struct Layer {
    Tensor w_x;  // [in x 4H]
    Tensor w_h;  // [H x 4H]
    Tensor b;    // [4H]
  };

  LstmStack(int input_size, int hidden_size, int num_layers, double dropout, Rng& rng);

  int input_size() const { return input_size_; }
  int hidden_size() const { return hidden_size_; }
  int num_layers() const { return static_cast<int>(layers_.size()); }
  double dropout() const { return dropout_; }
  const std::vector<Layer>& layers() const { return layers_; }

  LstmState zero_state(int batch) const;

  /// One step through the whole stack. x: [B x input_size]. Returns the top
  /// layer's hidden output and the updated per-layer state.
  std::pair<Tensor, LstmState> step(const Tensor& x, const LstmState& state, bool training,
                                    Rng& rng) const;

  void append_params(const std::string& prefix, ParamList& out) const;

 private:
  int input_size_;
  int hidden_size_;
  double dropout_;
  std::vector<Layer> layers_;
};

/// Single-cell update from pre-computed gate inputs [B x 4H]:
/// c = sigmoid(f)*c_prev + sigmoid(i)*tanh(g), h = sigmoid(o)*tanh(c).
std::pair<Tensor, Tensor> lstm_gate_step(const Tensor& gates, const Tensor& c_prev, int hidden);

/// Multiplicative inverted-dropout mask: keep probability 1-rate, kept
/// entries scaled by 1/(1-rate). Constant (non-trainable) tensor.
Tensor dropout_mask(Shape shape, double rate, Rng& rng);

struct EncoderStates {
  Tensor h_seq;          // [B x L x H], top layer
  LstmState final_state;  // handed to the decoder
};

/// Runs the stack over a whole sequence [B x L x C], layer by layer: the
/// input projection of a layer is one matrix product over all steps, the
/// recurrence walks left to right from zero states.
EncoderStates encoder_forward(const LstmStack& stack, const Tensor& m, bool training, Rng& rng);

}  // namespace spt2ss
