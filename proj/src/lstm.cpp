#include "spt2ss/lstm.hpp"

#include <cmath>
#include <stdexcept>

#include "spt2ss/ops.hpp"

namespace spt2ss {

LstmStack::LstmStack(int input_size, int hidden_size, int num_layers, double dropout, Rng& rng)
    : input_size_(input_size), hidden_size_(hidden_size), dropout_(dropout) {
  if (input_size < 1 || hidden_size < 1 || num_layers < 1) {
    throw std::invalid_argument("LstmStack: sizes must be positive");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw std::invalid_argument("LstmStack: dropout must be in [0, 1)");
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  layers_.reserve(static_cast<std::size_t>(num_layers));
  for (int l = 0; l < num_layers; ++l) {
    const int in = l == 0 ? input_size : hidden_size;
    Layer layer;
    layer.w_x = init_uniform({in, 4 * hidden_size}, bound, rng);
    layer.w_h = init_uniform({hidden_size, 4 * hidden_size}, bound, rng);
    layer.b = init_uniform({4 * hidden_size}, bound, rng);
    layers_.push_back(std::move(layer));
  }
}

LstmState LstmStack::zero_state(int batch) const {
  LstmState s;
  s.h.reserve(layers_.size());
  s.c.reserve(layers_.size());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    s.h.push_back(Tensor::zeros({batch, hidden_size_}));
    s.c.push_back(Tensor::zeros({batch, hidden_size_}));
  }
  return s;
}

std::pair<Tensor, Tensor> lstm_gate_step(const Tensor& gates, const Tensor& c_prev, int hidden) {
  Tensor i = sigmoid(slice_last(gates, 0, hidden));
  Tensor f = sigmoid(slice_last(gates, hidden, hidden));
  Tensor g = tanh(slice_last(gates, 2 * hidden, hidden));
  Tensor o = sigmoid(slice_last(gates, 3 * hidden, hidden));
  Tensor c = add(mul(f, c_prev), mul(i, g));
  Tensor h = mul(o, tanh(c));
  return {std::move(h), std::move(c)};
}

Tensor dropout_mask(Shape shape, double rate, Rng& rng) {
  const double scale = 1.0 / (1.0 - rate);
  Eigen::ArrayXd m(shape_numel(shape));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m[i] = rng.bernoulli(1.0 - rate) ? scale : 0.0;
  }
  return Tensor::from_data(std::move(shape), std::move(m), false);
}

std::pair<Tensor, LstmState> LstmStack::step(const Tensor& x, const LstmState& state,
                                             bool training, Rng& rng) const {
  if (x.ndim() != 2 || x.dim(1) != input_size_) {
    throw std::invalid_argument("LstmStack::step: input " + shape_str(x.shape()) +
                                " does not match input size " + std::to_string(input_size_));
  }
  if (state.h.size() != layers_.size() || state.c.size() != layers_.size()) {
    throw std::invalid_argument("LstmStack::step: state has " + std::to_string(state.h.size()) +
                                " layers, stack has " + std::to_string(layers_.size()));
  }
  LstmState next;
  next.h.reserve(layers_.size());
  next.c.reserve(layers_.size());
  Tensor input = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    Tensor gates = add(add_bias(matmul(input, layer.w_x), layer.b),
                       matmul(state.h[l], layer.w_h));
    auto [h, c] = lstm_gate_step(gates, state.c[l], hidden_size_);
    next.h.push_back(h);
    next.c.push_back(c);
    if (training && dropout_ > 0.0 && l + 1 < layers_.size()) {
      input = mul(h, dropout_mask(h.shape(), dropout_, rng));
    } else {
      input = h;
    }
  }
  return {next.h.back(), std::move(next)};
}

void LstmStack::append_params(const std::string& prefix, ParamList& out) const {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string base = prefix + "layer" + std::to_string(l) + ".";
    out.push_back({base + "w_x", layers_[l].w_x});
    out.push_back({base + "w_h", layers_[l].w_h});
    out.push_back({base + "b", layers_[l].b});
  }
}

EncoderStates encoder_forward(const LstmStack& stack, const Tensor& m, bool training, Rng& rng) {
  if (m.ndim() != 3) {
    throw std::invalid_argument("encoder_forward: expected [B x L x C], got " +
                                shape_str(m.shape()));
  }
  if (m.dim(2) != stack.input_size()) {
    throw std::invalid_argument("encoder_forward: " + std::to_string(m.dim(2)) +
                                " channels do not match input projection of size " +
                                std::to_string(stack.input_size()));
  }
  const int batch = m.dim(0);
  const int length = m.dim(1);
  const int hidden = stack.hidden_size();

  EncoderStates out;
  Tensor input = m;
  for (std::size_t l = 0; l < stack.layers().size(); ++l) {
    const LstmStack::Layer& layer = stack.layers()[l];
    const int in_dim = input.dim(2);
    Tensor proj = reshape(
        add_bias(matmul(reshape(input, {batch * length, in_dim}), layer.w_x), layer.b),
        {batch, length, 4 * hidden});
    Tensor h = Tensor::zeros({batch, hidden});
    Tensor c = Tensor::zeros({batch, hidden});
    std::vector<Tensor> hs;
    hs.reserve(static_cast<std::size_t>(length));
    for (int t = 0; t < length; ++t) {
      Tensor gates = add(slice_time(proj, t), matmul(h, layer.w_h));
      auto [nh, nc] = lstm_gate_step(gates, c, hidden);
      h = std::move(nh);
      c = std::move(nc);
      hs.push_back(h);
    }
    out.final_state.h.push_back(h);
    out.final_state.c.push_back(c);
    Tensor seq = stack_time(hs);
    out.h_seq = seq;
    if (training && stack.dropout() > 0.0 && l + 1 < stack.layers().size()) {
      seq = mul(seq, dropout_mask(seq.shape(), stack.dropout(), rng));
    }
    input = seq;
  }
  return out;
}

}  // namespace spt2ss
