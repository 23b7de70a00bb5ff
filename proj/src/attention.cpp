#include "spt2ss/attention.hpp"

#include <cmath>
#include <stdexcept>

#include "spt2ss/ops.hpp"

namespace spt2ss {

CrossAttention::CrossAttention(int hidden_size, int num_heads, bool exact, Rng& rng)
    : hidden_(hidden_size), num_heads_(exact ? 1 : num_heads), exact_(exact) {
  if (hidden_size < 1) throw std::invalid_argument("CrossAttention: hidden size must be positive");
  if (exact_) return;
  if (num_heads < 1 || hidden_size % num_heads != 0) {
    throw std::invalid_argument("CrossAttention: hidden size " + std::to_string(hidden_size) +
                                " not divisible by " + std::to_string(num_heads) + " heads");
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  w_q_ = init_uniform({hidden_size, hidden_size}, bound, rng);
  w_k_ = init_uniform({hidden_size, hidden_size}, bound, rng);
  w_v_ = init_uniform({hidden_size, hidden_size}, bound, rng);
  w_o_ = init_uniform({hidden_size, hidden_size}, bound, rng);
}

CrossAttention::Prepared CrossAttention::prepare(const Tensor& h_seq) const {
  if (h_seq.ndim() != 3 || h_seq.dim(2) != hidden_) {
    throw std::invalid_argument("CrossAttention::prepare: expected [B x L x " +
                                std::to_string(hidden_) + "], got " + shape_str(h_seq.shape()));
  }
  if (h_seq.dim(1) == 0) throw std::invalid_argument("CrossAttention::prepare: empty sequence");
  if (exact_) return {h_seq, h_seq, h_seq};
  const int batch = h_seq.dim(0), length = h_seq.dim(1);
  Tensor flat = reshape(h_seq, {batch * length, hidden_});
  return {h_seq, reshape(matmul(flat, w_k_), {batch, length, hidden_}),
          reshape(matmul(flat, w_v_), {batch, length, hidden_})};
}

CrossAttention::Result CrossAttention::attend(const Tensor& o_t, const Prepared& prep,
                                              bool want_alpha) const {
  if (o_t.ndim() != 2 || o_t.dim(1) != hidden_) {
    throw std::invalid_argument("CrossAttention::attend: expected [B x " +
                                std::to_string(hidden_) + "], got " + shape_str(o_t.shape()));
  }
  if (exact_) {
    Tensor alpha = softmax(attn_scores(o_t, prep.keys));
    return {attn_context(alpha, prep.values), alpha};
  }
  const int dh = hidden_ / num_heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor q = matmul(o_t, w_q_);
  std::vector<Tensor> contexts;
  contexts.reserve(static_cast<std::size_t>(num_heads_));
  Tensor alpha_sum;
  for (int h = 0; h < num_heads_; ++h) {
    Tensor qh = slice_last(q, h * dh, dh);
    Tensor kh = slice_last(prep.keys, h * dh, dh);
    Tensor vh = slice_last(prep.values, h * dh, dh);
    Tensor alpha = softmax(mul(attn_scores(qh, kh), scale));
    contexts.push_back(attn_context(alpha, vh));
    if (want_alpha) alpha_sum = h == 0 ? alpha : add(alpha_sum, alpha);
  }
  Result out;
  out.context = matmul(concat_last(contexts), w_o_);
  if (want_alpha) out.alpha = mul(alpha_sum, 1.0 / num_heads_);
  return out;
}

void CrossAttention::append_params(const std::string& prefix, ParamList& out) const {
  if (exact_) return;
  out.push_back({prefix + "w_q", w_q_});
  out.push_back({prefix + "w_k", w_k_});
  out.push_back({prefix + "w_v", w_v_});
  out.push_back({prefix + "w_o", w_o_});
}

}  // namespace spt2ss
