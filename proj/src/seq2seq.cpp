#include "spt2ss/seq2seq.hpp"

#include <cmath>
#include <stdexcept>

#include "spt2ss/ops.hpp"

namespace spt2ss {

Seq2SeqNet::Seq2SeqNet(const Seq2SeqConfig& cfg, Rng& rng)
    : cfg_(cfg),
      encoder_(cfg.input_channels, cfg.hidden_size, cfg.num_layers, cfg.dropout, rng),
      lift_w_(init_uniform({1, cfg.hidden_size}, 1.0, rng)),
      lift_b_(init_uniform({cfg.hidden_size}, 1.0, rng)),
      decoder_(cfg.hidden_size, cfg.hidden_size, cfg.num_layers, cfg.dropout, rng),
      attn_(cfg.hidden_size, cfg.num_heads, cfg.attn_exact, rng),
      head_w_(init_uniform({2 * cfg.hidden_size, 1},
                           1.0 / std::sqrt(2.0 * cfg.hidden_size), rng)),
      head_b_(init_uniform({1}, 1.0 / std::sqrt(2.0 * cfg.hidden_size), rng)) {}

EncoderStates Seq2SeqNet::encode(const Tensor& m, bool training, Rng& rng) const {
  return encoder_forward(encoder_, m, training, rng);
}

Tensor Seq2SeqNet::predict_head(const Tensor& o_t, const Tensor& context) const {
  return add_bias(matmul(concat_last({o_t, context}), head_w_), head_b_);
}

Seq2SeqNet::StepOut Seq2SeqNet::decode_step(const Tensor& prev_y, const LstmState& state,
                                            const CrossAttention::Prepared& prep, bool training,
                                            Rng& rng, bool want_alpha) const {
  if (prev_y.ndim() != 2 || prev_y.dim(1) != 1) {
    throw std::invalid_argument("decode_step: previous output must be [B x 1], got " +
                                shape_str(prev_y.shape()));
  }
  Tensor x = add_bias(matmul(prev_y, lift_w_), lift_b_);
  auto [o_t, next_state] = decoder_.step(x, state, training, rng);
  CrossAttention::Result att = attn_.attend(o_t, prep, want_alpha);
  StepOut out;
  out.y_hat = predict_head(o_t, att.context);
  out.state = std::move(next_state);
  out.alpha = std::move(att.alpha);
  return out;
}

Tensor Seq2SeqNet::forward(const Tensor& m, int l_out, const Tensor* target,
                           double teacher_forcing_ratio, bool training, Rng& rng) const {
  if (teacher_forcing_ratio < 0.0 || teacher_forcing_ratio > 1.0) {
    throw std::invalid_argument("forward: teacher forcing ratio " +
                                std::to_string(teacher_forcing_ratio) + " outside [0, 1]");
  }
  if (l_out < 1) throw std::invalid_argument("forward: output length must be positive");
  if (!target && teacher_forcing_ratio > 0.0) {
    throw std::invalid_argument("forward: teacher forcing requires a target sequence");
  }
  const int batch = m.dim(0);
  if (target && (target->ndim() != 2 || target->dim(0) != batch || target->dim(1) != l_out)) {
    throw std::invalid_argument("forward: target " + shape_str(target->shape()) +
                                " does not match [B x " + std::to_string(l_out) + "]");
  }

  EncoderStates enc = encode(m, training, rng);
  CrossAttention::Prepared prep = attn_.prepare(enc.h_seq);
  LstmState state = std::move(enc.final_state);
  Tensor prev = Tensor::zeros({batch, 1});

  std::vector<Tensor> ys;
  ys.reserve(static_cast<std::size_t>(l_out));
  for (int t = 0; t < l_out; ++t) {
    StepOut so = decode_step(prev, state, prep, training, rng);
    state = std::move(so.state);
    ys.push_back(so.y_hat);
    if (t + 1 < l_out) {
      const bool teach =
          target && teacher_forcing_ratio > 0.0 && rng.bernoulli(teacher_forcing_ratio);
      prev = teach ? slice_last(*target, t, 1) : so.y_hat;
    }
  }
  return reshape(stack_time(ys), {batch, l_out});
}

void Seq2SeqNet::append_params(ParamList& out) const {
  encoder_.append_params("encoder.", out);
  out.push_back({"decoder.lift.w", lift_w_});
  out.push_back({"decoder.lift.b", lift_b_});
  decoder_.append_params("decoder.", out);
  attn_.append_params("attention.", out);
  out.push_back({"head.w", head_w_});
  out.push_back({"head.b", head_b_});
}

}  // namespace spt2ss
