#pragma once

#include <vector>

#include "spt2ss/tensor.hpp"

namespace spt2ss {

// Elementwise binary ops. Shapes must match exactly, or one side must be a
// single-element tensor (scalar broadcast). All are differentiable.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// Elementwise with a plain constant (no node is created for the constant).
Tensor add(const Tensor& a, double c);
Tensor mul(const Tensor& a, double c);

Tensor neg(const Tensor& a);

// Elementwise unary ops with exact analytic derivatives.
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);  // rejects non-positive entries
Tensor abs(const Tensor& a);  // derivative sign(x), 0 at 0
Tensor pow(const Tensor& a, double exponent);  // rejects negative base with non-integer exponent

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double c) { return add(a, c); }
inline Tensor operator-(const Tensor& a, double c) { return add(a, -c); }
inline Tensor operator*(const Tensor& a, double c) { return mul(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return mul(a, c); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

/// [m x k] . [k x n] -> [m x n]; gradients dA = dC.B^T, dB = A^T.dC.
Tensor matmul(const Tensor& a, const Tensor& b);

/// x viewed as rows of width b.size(): every row gets b added. Gradient of b is
/// the column sum of the incoming gradient.
Tensor add_bias(const Tensor& x, const Tensor& b);

/// Softmax over the last axis, max-subtracted for stability. Rejects NaN input.
Tensor softmax(const Tensor& x);

/// Same-padded stride-1 cross-correlation. x [B x L x Cin], w [K x Cin x Cout],
/// K odd; output [B x L x Cout].
Tensor conv1d(const Tensor& x, const Tensor& w);

/// 2D analog: x [B x H x W x Cin], w [K x K x Cin x Cout] -> [B x H x W x Cout].
Tensor conv2d(const Tensor& x, const Tensor& w);

Tensor sum(const Tensor& x);   // -> scalar
Tensor mean(const Tensor& x);  // -> scalar

/// Mean over the third axis of a 4-D tensor: [B x H x W x C] -> [B x H x C].
Tensor mean_over_width(const Tensor& x);

/// Same data, new shape (element count preserved).
Tensor reshape(const Tensor& x, Shape shape);

/// Columns [start, start+len) of x viewed as rows of width last-dim.
Tensor slice_last(const Tensor& x, int start, int len);

/// Concatenate along the last axis; leading dimensions must agree.
Tensor concat_last(const std::vector<Tensor>& parts);

/// Time step t of a [B x L x C] sequence -> [B x C].
Tensor slice_time(const Tensor& x, int t);

/// Stack L tensors of shape [B x C] into [B x L x C].
Tensor stack_time(const std::vector<Tensor>& steps);

/// Attention helpers over per-sample matrices.
/// scores[b,l] = dot(keys[b,l,:], q[b,:]);  q [B x D], keys [B x L x D] -> [B x L].
Tensor attn_scores(const Tensor& q, const Tensor& keys);
/// context[b,:] = sum_l alpha[b,l] * values[b,l,:];  -> [B x D].
Tensor attn_context(const Tensor& alpha, const Tensor& values);

}  // namespace spt2ss
