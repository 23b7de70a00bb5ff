#include "spt2ss/ops.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace spt2ss {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using CVecMap = Eigen::Map<const Eigen::VectorXd>;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

bool is_scalar(const Tensor& t) { return t.size() == 1; }

int last_dim(const Tensor& t) { return t.dim(t.ndim() - 1); }

// Shape/broadcast resolution for elementwise binary ops.
struct Binary {
  bool a_scalar = false;
  bool b_scalar = false;
  Shape shape;
};

Binary resolve_binary(const char* op, const Tensor& a, const Tensor& b) {
  Binary r;
  if (same_shape(a.shape(), b.shape())) {
    r.shape = a.shape();
  } else if (is_scalar(b)) {
    r.b_scalar = true;
    r.shape = a.shape();
  } else if (is_scalar(a)) {
    r.a_scalar = true;
    r.shape = b.shape();
  } else {
    fail(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
         shape_str(b.shape()));
  }
  return r;
}

// Attaches the backward function produced by `make_fn()` when needed.
template <class MakeFn>
Tensor finish(Tensor out, MakeFn&& make_fn) {
  if (out.requires_grad()) out.node()->backward_fn = make_fn(out.node().get());
  return out;
}

void accumulate_scalar(Node* n, double v) { n->grad_acc()[0] += v; }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  const Binary r = resolve_binary("add", a, b);
  Eigen::ArrayXd data;
  if (r.a_scalar)
    data = a.data()[0] + b.data();
  else if (r.b_scalar)
    data = a.data() + b.data()[0];
  else
    data = a.data() + b.data();
  Tensor out = make_op(r.shape, std::move(data), {a, b}, nullptr);
  Node* an = a.node().get();
  Node* bn = b.node().get();
  return finish(std::move(out), [=](Node*) {
    return [=](const Eigen::ArrayXd& g) {
      if (an->requires_grad) {
        if (r.a_scalar)
          accumulate_scalar(an, g.sum());
        else
          an->grad_acc() += g;
      }
      if (bn->requires_grad) {
        if (r.b_scalar)
          accumulate_scalar(bn, g.sum());
        else
          bn->grad_acc() += g;
      }
    };
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const Binary r = resolve_binary("sub", a, b);
  Eigen::ArrayXd data;
  if (r.a_scalar)
    data = a.data()[0] - b.data();
  else if (r.b_scalar)
    data = a.data() - b.data()[0];
  else
    data = a.data() - b.data();
  Tensor out = make_op(r.shape, std::move(data), {a, b}, nullptr);
  Node* an = a.node().get();
  Node* bn = b.node().get();
  return finish(std::move(out), [=](Node*) {
    return [=](const Eigen::ArrayXd& g) {
      if (an->requires_grad) {
        if (r.a_scalar)
          accumulate_scalar(an, g.sum());
        else
          an->grad_acc() += g;
      }
      if (bn->requires_grad) {
        if (r.b_scalar)
          accumulate_scalar(bn, -g.sum());
        else
          bn->grad_acc() -= g;
      }
    };
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const Binary r = resolve_binary("mul", a, b);
  Eigen::ArrayXd data;
  if (r.a_scalar)
    data = a.data()[0] * b.data();
  else if (r.b_scalar)
    data = a.data() * b.data()[0];
  else
    data = a.data() * b.data();
  Tensor out = make_op(r.shape, std::move(data), {a, b}, nullptr);
  Node* an = a.node().get();
  Node* bn = b.node().get();
  return finish(std::move(out), [=](Node*) {
    return [=](const Eigen::ArrayXd& g) {
      if (an->requires_grad) {
        if (r.a_scalar)
          accumulate_scalar(an, (g * bn->data).sum());
        else if (r.b_scalar)
          an->grad_acc() += g * bn->data[0];
        else
          an->grad_acc() += g * bn->data;
      }
      if (bn->requires_grad) {
        if (r.b_scalar)
          accumulate_scalar(bn, (g * an->data).sum());
        else if (r.a_scalar)
          bn->grad_acc() += g * an->data[0];
        else
          bn->grad_acc() += g * an->data;
      }
    };
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  const Binary r = resolve_binary("div", a, b);
  Eigen::ArrayXd data;
  if (r.a_scalar)
    data = a.data()[0] / b.data();
  else if (r.b_scalar)
    data = a.data() / b.data()[0];
  else
    data = a.data() / b.data();
  Tensor out = make_op(r.shape, std::move(data), {a, b}, nullptr);
  Node* an = a.node().get();
  Node* bn = b.node().get();
  return finish(std::move(out), [=](Node*) {
    return [=](const Eigen::ArrayXd& g) {
      if (an->requires_grad) {
        if (r.a_scalar)
          accumulate_scalar(an, (g / bn->data).sum());
        else if (r.b_scalar)
          an->grad_acc() += g / bn->data[0];
        else
          an->grad_acc() += g / bn->data;
      }
      if (bn->requires_grad) {
        if (r.b_scalar) {
          const double b0 = bn->data[0];
          accumulate_scalar(bn, -(g * an->data).sum() / (b0 * b0));
        } else if (r.a_scalar) {
          bn->grad_acc() -= g * an->data[0] / (bn->data * bn->data);
        } else {
          bn->grad_acc() -= g * an->data / (bn->data * bn->data);
        }
      }
    };
  });
}

Tensor add(const Tensor& a, double c) {
  Tensor out = make_op(a.shape(), a.data() + c, {a}, nullptr);
  Node* an = a.node().get();
  return finish(std::move(out), [=](Node*) {
    return [=](const Eigen::ArrayXd& g) { an->grad_acc() += g; };
  });
}

Tensor mul(const Tensor& a, double c) {
  Tensor out = make_op(a.shape(), a.data() * c, {a}, nullptr);
  Node* an = a.node().get();
  return finish(std::move(out), [=](Node*) {
    return [=](const Eigen::ArrayXd& g) { an->grad_acc() += g * c; };
  });
}

Tensor neg(const Tensor& a) { return mul(a, -1.0); }

Tensor tanh(const Tensor& a) {
  Eigen::ArrayXd y = a.data().unaryExpr([](double v) { return std::tanh(v); });
  Tensor out = make_op(a.shape(), std::move(y), {a}, nullptr);
  Node* an = a.node().get();
  return finish(std::move(out), [=](Node* on) {
    return [=](const Eigen::ArrayXd& g) { an->grad_acc() += g * (1.0 - on->data * on->data); };
  });
}

Tensor sigmoid(const Tensor& a) {
  Eigen::ArrayXd y = a.data().unaryExpr([](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
  Tensor out = make_op(a.shape(), std::move(y), {a}, nullptr);
  Node* an = a.node().get();
  return finish(std::move(out), [=](Node* on) {
    return [=](const Eigen::ArrayXd& g) { an->grad_acc() += g * on->data * (1.0 - on->data); };
  });
}

Tensor exp(const Tensor& a) {
  Eigen::ArrayXd y = a.data().exp();
  Tensor out = make_op(a.shape(), std::move(y), {a}, nullptr);
  Node* an = a.node().get();
  return finish(std::move(out), [=](Node* on) {
    return [=](const Eigen::ArrayXd& g) { an->grad_acc() += g * on->data; };
  });
}

Tensor log(const Tensor& a) {
  for (Eigen::Index i = 0; i < a.data().size(); ++i) {
    if (!(a.data()[i] > 0.0)) {
      fail("log: non-positive value " + std::to_string(a.data()[i]) + " at flat index " +
           std::to_string(i));
    }
  }
  Tensor out = make_op(a.shape(), a.data().log(), {a}, nullptr);
  Node* an = a.node().get();
  return finish(std::move(out), [=](Node*) {
    return [=](const Eigen::ArrayXd& g) { an->grad_acc() += g / an->data; };
  });
}

Tensor abs(const Tensor& a) {
  Tensor out = make_op(a.shape(), a.data().abs(), {a}, nullptr);
  Node* an = a.node().get();
  return finish(std::move(out), [=](Node*) {
    return [=](const Eigen::ArrayXd& g) {
      an->grad_acc() += g * an->data.unaryExpr([](double v) {
        return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
      });
    };
  });
}

Tensor pow(const Tensor& a, double exponent) {
  const bool integral = exponent == std::floor(exponent);
  for (Eigen::Index i = 0; i < a.data().size(); ++i) {
    const double v = a.data()[i];
    if (v < 0.0 && !integral) {
      fail("pow: negative base " + std::to_string(v) + " with non-integer exponent " +
           std::to_string(exponent));
    }
    if (v == 0.0 && exponent < 0.0) fail("pow: zero base with negative exponent");
  }
  Eigen::ArrayXd y = a.data().unaryExpr([&](double v) { return std::pow(v, exponent); });
  Tensor out = make_op(a.shape(), std::move(y), {a}, nullptr);
  Node* an = a.node().get();
  return finish(std::move(out), [=](Node*) {
    return [=](const Eigen::ArrayXd& g) {
      an->grad_acc() += g * exponent * an->data.unaryExpr([&](double v) {
        return std::pow(v, exponent - 1.0);
      });
    };
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2) {
    fail("matmul: expected 2-D operands, got " + shape_str(a.shape()) + " and " +
         shape_str(b.shape()));
  }
  const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2) {
    fail("matmul: inner dimensions differ, " + shape_str(a.shape()) + " vs " +
         shape_str(b.shape()));
  }
  Eigen::ArrayXd data(static_cast<Eigen::Index>(m) * n);
  {
    CMatMap am(a.data().data(), m, k);
    CMatMap bm(b.data().data(), k, n);
    MatMap cm(data.data(), m, n);
    cm.noalias() = am * bm;
  }
  Tensor out = make_op({m, n}, std::move(data), {a, b}, nullptr);
  Node* an = a.node().get();
  Node* bn = b.node().get();
  return finish(std::move(out), [=](Node*) {
    return [=](const Eigen::ArrayXd& g) {
      CMatMap gm(g.data(), m, n);
      if (an->requires_grad) {
        CMatMap bm(bn->data.data(), k, n);
        MatMap ga(an->grad_acc().data(), m, k);
        ga.noalias() += gm * bm.transpose();
      }
      if (bn->requires_grad) {
        CMatMap am(an->data.data(), m, k);
        MatMap gb(bn->grad_acc().data(), k, n);
        gb.noalias() += am.transpose() * gm;
      }
    };
  });
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  if (b.ndim() != 1) fail("add_bias: bias must be 1-D, got " + shape_str(b.shape()));
  const int n = b.dim(0);
  if (last_dim(x) != n) {
    fail("add_bias: last dim of " + shape_str(x.shape()) + " does not match bias " +
         shape_str(b.shape()));
  }
  const Eigen::Index rows = x.size() / n;
  Eigen::ArrayXd data(x.size());
  {
    CMatMap xm(x.data().data(), rows, n);
    MatMap ym(data.data(), rows, n);
    ym = xm.rowwise() + CVecMap(b.data().data(), n).transpose();
  }
  Tensor out = make_op(x.shape(), std::move(data), {x, b}, nullptr);
  Node* xn = x.node().get();
  Node* bn = b.node().get();
  return finish(std::move(out), [=](Node*) {
    return [=](const Eigen::ArrayXd& g) {
      if (xn->requires_grad) xn->grad_acc() += g;
      if (bn->requires_grad) {
        CMatMap gm(g.data(), rows, n);
        VecMap gb(bn->grad_acc().data(), n);
        gb.noalias() += gm.colwise().sum().transpose();
      }
    };
  });
}

Tensor softmax(const Tensor& x) {
  if (x.data().hasNaN()) fail("softmax: NaN in input");
  const int n = last_dim(x);
  const Eigen::Index rows = x.size() / n;
  Eigen::ArrayXd data(x.size());
  for (Eigen::Index r = 0; r < rows; ++r) {
    Eigen::Map<const Eigen::ArrayXd> row(x.data().data() + r * n, n);
    Eigen::Map<Eigen::ArrayXd> yrow(data.data() + r * n, n);
    const double m = row.maxCoeff();
    yrow = (row - m).exp();
    yrow /= yrow.sum();
  }
  Tensor out = make_op(x.shape(), std::move(data), {x}, nullptr);
  Node* xn = x.node().get();
  return finish(std::move(out), [=](Node* on) {
    return [=](const Eigen::ArrayXd& g) {
      for (Eigen::Index r = 0; r < rows; ++r) {
        Eigen::Map<const Eigen::ArrayXd> grow(g.data() + r * n, n);
        Eigen::Map<const Eigen::ArrayXd> yrow(on->data.data() + r * n, n);
        Eigen::Map<Eigen::ArrayXd> gx(xn->grad_acc().data() + r * n, n);
        const double dot = (grow * yrow).sum();
        gx += (grow - dot) * yrow;
      }
    };
  });
}

namespace {

// Fills a [length x K*Cin] patch matrix for same-padded 1-D cross-correlation.
void im2col_1d(const double* x, int length, int cin, int k, RowMat& cols) {
  const int pad = (k - 1) / 2;
  for (int t = 0; t < length; ++t) {
    double* row = cols.data() + static_cast<std::ptrdiff_t>(t) * k * cin;
    for (int kk = 0; kk < k; ++kk) {
      const int src = t + kk - pad;
      double* dst = row + static_cast<std::ptrdiff_t>(kk) * cin;
      if (src >= 0 && src < length)
        std::memcpy(dst, x + static_cast<std::ptrdiff_t>(src) * cin, sizeof(double) * cin);
      else
        std::memset(dst, 0, sizeof(double) * cin);
    }
  }
}

void col2im_1d(const RowMat& cols, int length, int cin, int k, double* gx) {
  const int pad = (k - 1) / 2;
  for (int t = 0; t < length; ++t) {
    const double* row = cols.data() + static_cast<std::ptrdiff_t>(t) * k * cin;
    for (int kk = 0; kk < k; ++kk) {
      const int src = t + kk - pad;
      if (src < 0 || src >= length) continue;
      double* dst = gx + static_cast<std::ptrdiff_t>(src) * cin;
      const double* s = row + static_cast<std::ptrdiff_t>(kk) * cin;
      for (int c = 0; c < cin; ++c) dst[c] += s[c];
    }
  }
}

void im2col_2d(const double* x, int h, int w, int cin, int k, RowMat& cols) {
  const int pad = (k - 1) / 2;
  const std::ptrdiff_t row_stride = static_cast<std::ptrdiff_t>(w) * cin;
  for (int y = 0; y < h; ++y) {
    for (int xo = 0; xo < w; ++xo) {
      double* row = cols.data() + (static_cast<std::ptrdiff_t>(y) * w + xo) * k * k * cin;
      for (int ky = 0; ky < k; ++ky) {
        const int sy = y + ky - pad;
        double* dst = row + static_cast<std::ptrdiff_t>(ky) * k * cin;
        if (sy < 0 || sy >= h) {
          std::memset(dst, 0, sizeof(double) * k * cin);
          continue;
        }
        const int sx0 = xo - pad;
        if (sx0 >= 0 && sx0 + k <= w) {
          std::memcpy(dst, x + sy * row_stride + static_cast<std::ptrdiff_t>(sx0) * cin,
                      sizeof(double) * k * cin);
        } else {
          for (int kx = 0; kx < k; ++kx) {
            const int sx = sx0 + kx;
            double* d = dst + static_cast<std::ptrdiff_t>(kx) * cin;
            if (sx >= 0 && sx < w)
              std::memcpy(d, x + sy * row_stride + static_cast<std::ptrdiff_t>(sx) * cin,
                          sizeof(double) * cin);
            else
              std::memset(d, 0, sizeof(double) * cin);
          }
        }
      }
    }
  }
}

void col2im_2d(const RowMat& cols, int h, int w, int cin, int k, double* gx) {
  const int pad = (k - 1) / 2;
  const std::ptrdiff_t row_stride = static_cast<std::ptrdiff_t>(w) * cin;
  for (int y = 0; y < h; ++y) {
    for (int xo = 0; xo < w; ++xo) {
      const double* row = cols.data() + (static_cast<std::ptrdiff_t>(y) * w + xo) * k * k * cin;
      for (int ky = 0; ky < k; ++ky) {
        const int sy = y + ky - pad;
        if (sy < 0 || sy >= h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int sx = xo + kx - pad;
          if (sx < 0 || sx >= w) continue;
          double* dst = gx + sy * row_stride + static_cast<std::ptrdiff_t>(sx) * cin;
          const double* s = row + (static_cast<std::ptrdiff_t>(ky) * k + kx) * cin;
          for (int c = 0; c < cin; ++c) dst[c] += s[c];
        }
      }
    }
  }
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& w) {
  if (x.ndim() != 3) fail("conv1d: input must be [B x L x Cin], got " + shape_str(x.shape()));
  if (w.ndim() != 3) fail("conv1d: kernel must be [K x Cin x Cout], got " + shape_str(w.shape()));
  const int batch = x.dim(0), length = x.dim(1), cin = x.dim(2);
  const int k = w.dim(0), cout = w.dim(2);
  if (k % 2 == 0) fail("conv1d: kernel size must be odd, got " + std::to_string(k));
  if (w.dim(1) != cin) {
    fail("conv1d: kernel " + shape_str(w.shape()) + " does not match input channels of " +
         shape_str(x.shape()));
  }
  Eigen::ArrayXd data(static_cast<Eigen::Index>(batch) * length * cout);
  {
    RowMat cols(length, k * cin);
    CMatMap wm(w.data().data(), k * cin, cout);
    for (int b = 0; b < batch; ++b) {
      im2col_1d(x.data().data() + static_cast<std::ptrdiff_t>(b) * length * cin, length, cin, k,
                cols);
      MatMap ym(data.data() + static_cast<std::ptrdiff_t>(b) * length * cout, length, cout);
      ym.noalias() = cols * wm;
    }
  }
  Tensor out = make_op({batch, length, cout}, std::move(data), {x, w}, nullptr);
  Node* xn = x.node().get();
  Node* wn = w.node().get();
  return finish(std::move(out), [=](Node*) {
    return [=](const Eigen::ArrayXd& g) {
      RowMat cols(length, k * cin);
      CMatMap wm(wn->data.data(), k * cin, cout);
      for (int b = 0; b < batch; ++b) {
        CMatMap gm(g.data() + static_cast<std::ptrdiff_t>(b) * length * cout, length, cout);
        if (wn->requires_grad) {
          im2col_1d(xn->data.data() + static_cast<std::ptrdiff_t>(b) * length * cin, length, cin,
                    k, cols);
          MatMap gw(wn->grad_acc().data(), k * cin, cout);
          gw.noalias() += cols.transpose() * gm;
        }
        if (xn->requires_grad) {
          cols.noalias() = gm * wm.transpose();
          col2im_1d(cols, length, cin, k,
                    xn->grad_acc().data() + static_cast<std::ptrdiff_t>(b) * length * cin);
        }
      }
    };
  });
}

Tensor conv2d(const Tensor& x, const Tensor& w) {
  if (x.ndim() != 4) fail("conv2d: input must be [B x H x W x Cin], got " + shape_str(x.shape()));
  if (w.ndim() != 4) {
    fail("conv2d: kernel must be [K x K x Cin x Cout], got " + shape_str(w.shape()));
  }
  const int batch = x.dim(0), h = x.dim(1), wdt = x.dim(2), cin = x.dim(3);
  const int k = w.dim(0), cout = w.dim(3);
  if (k % 2 == 0) fail("conv2d: kernel size must be odd, got " + std::to_string(k));
  if (w.dim(1) != k || w.dim(2) != cin) {
    fail("conv2d: kernel " + shape_str(w.shape()) + " does not match input " +
         shape_str(x.shape()));
  }
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * wdt;
  Eigen::ArrayXd data(static_cast<Eigen::Index>(batch) * plane * cout);
  {
    RowMat cols(plane, k * k * cin);
    CMatMap wm(w.data().data(), k * k * cin, cout);
    for (int b = 0; b < batch; ++b) {
      im2col_2d(x.data().data() + b * plane * cin, h, wdt, cin, k, cols);
      MatMap ym(data.data() + b * plane * cout, plane, cout);
      ym.noalias() = cols * wm;
    }
  }
  Tensor out = make_op({batch, h, wdt, cout}, std::move(data), {x, w}, nullptr);
  Node* xn = x.node().get();
  Node* wn = w.node().get();
  return finish(std::move(out), [=](Node*) {
    return [=](const Eigen::ArrayXd& g) {
      RowMat cols(plane, k * k * cin);
      CMatMap wm(wn->data.data(), k * k * cin, cout);
      for (int b = 0; b < batch; ++b) {
        CMatMap gm(g.data() + b * plane * cout, plane, cout);
        if (wn->requires_grad) {
          im2col_2d(xn->data.data() + b * plane * cin, h, wdt, cin, k, cols);
          MatMap gw(wn->grad_acc().data(), k * k * cin, cout);
          gw.noalias() += cols.transpose() * gm;
        }
        if (xn->requires_grad) {
          cols.noalias() = gm * wm.transpose();
          col2im_2d(cols, h, wdt, cin, k, xn->grad_acc().data() + b * plane * cin);
        }
      }
    };
  });
}

Tensor sum(const Tensor& x) {
  Tensor out = make_op({1}, Eigen::ArrayXd::Constant(1, x.data().sum()), {x}, nullptr);
  Node* xn = x.node().get();
  return finish(std::move(out), [=](Node*) {
    return [=](const Eigen::ArrayXd& g) { xn->grad_acc() += g[0]; };
  });
}

Tensor mean(const Tensor& x) {
  const double inv = 1.0 / static_cast<double>(x.size());
  Tensor out = make_op({1}, Eigen::ArrayXd::Constant(1, x.data().sum() * inv), {x}, nullptr);
  Node* xn = x.node().get();
  return finish(std::move(out), [=](Node*) {
    return [=](const Eigen::ArrayXd& g) { xn->grad_acc() += g[0] * inv; };
  });
}

Tensor mean_over_width(const Tensor& x) {
  if (x.ndim() != 4) {
    fail("mean_over_width: expected [B x H x W x C], got " + shape_str(x.shape()));
  }
  const int batch = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const double inv = 1.0 / static_cast<double>(w);
  Eigen::ArrayXd data(static_cast<Eigen::Index>(batch) * h * c);
  for (int b = 0; b < batch; ++b) {
    for (int y = 0; y < h; ++y) {
      CMatMap block(x.data().data() + ((static_cast<std::ptrdiff_t>(b) * h + y) * w) * c, w, c);
      Eigen::Map<Eigen::RowVectorXd> orow(
          data.data() + (static_cast<std::ptrdiff_t>(b) * h + y) * c, c);
      orow = block.colwise().sum() * inv;
    }
  }
  Tensor out = make_op({batch, h, c}, std::move(data), {x}, nullptr);
  Node* xn = x.node().get();
  return finish(std::move(out), [=](Node*) {
    return [=](const Eigen::ArrayXd& g) {
      for (int b = 0; b < batch; ++b) {
        for (int y = 0; y < h; ++y) {
          Eigen::Map<const Eigen::RowVectorXd> grow(
              g.data() + (static_cast<std::ptrdiff_t>(b) * h + y) * c, c);
          MatMap block(
              xn->grad_acc().data() + ((static_cast<std::ptrdiff_t>(b) * h + y) * w) * c, w, c);
          block.rowwise() += grow * inv;
        }
      }
    };
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.size()) {
    fail("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  Tensor out = make_op(std::move(shape), x.data(), {x}, nullptr);
  Node* xn = x.node().get();
  return finish(std::move(out), [=](Node*) {
    return [=](const Eigen::ArrayXd& g) { xn->grad_acc() += g; };
  });
}

Tensor slice_last(const Tensor& x, int start, int len) {
  const int n = last_dim(x);
  if (start < 0 || len <= 0 || start + len > n) {
    fail("slice_last: range [" + std::to_string(start) + ", " + std::to_string(start + len) +
         ") out of bounds for last dim " + std::to_string(n));
  }
  const Eigen::Index rows = x.size() / n;
  Shape out_shape = x.shape();
  out_shape.back() = len;
  Eigen::ArrayXd data(rows * len);
  for (Eigen::Index r = 0; r < rows; ++r) {
    std::memcpy(data.data() + r * len, x.data().data() + r * n + start, sizeof(double) * len);
  }
  Tensor out = make_op(std::move(out_shape), std::move(data), {x}, nullptr);
  Node* xn = x.node().get();
  return finish(std::move(out), [=](Node*) {
    return [=](const Eigen::ArrayXd& g) {
      Eigen::ArrayXd& gx = xn->grad_acc();
      for (Eigen::Index r = 0; r < rows; ++r) {
        Eigen::Map<Eigen::ArrayXd>(gx.data() + r * n + start, len) +=
            Eigen::Map<const Eigen::ArrayXd>(g.data() + r * len, len);
      }
    };
  });
}

Tensor concat_last(const std::vector<Tensor>& parts) {
  if (parts.empty()) fail("concat_last: no inputs");
  const Tensor& first = parts.front();
  const Eigen::Index rows = first.size() / last_dim(first);
  int total = 0;
  for (const Tensor& p : parts) {
    const Eigen::Index r = p.size() / last_dim(p);
    if (r != rows || p.ndim() != first.ndim()) {
      fail("concat_last: incompatible part " + shape_str(p.shape()) + " vs " +
           shape_str(first.shape()));
    }
    total += last_dim(p);
  }
  Shape out_shape = first.shape();
  out_shape.back() = total;
  Eigen::ArrayXd data(rows * total);
  int offset = 0;
  for (const Tensor& p : parts) {
    const int n = last_dim(p);
    for (Eigen::Index r = 0; r < rows; ++r) {
      std::memcpy(data.data() + r * total + offset, p.data().data() + r * n, sizeof(double) * n);
    }
    offset += n;
  }
  Tensor out = make_op(std::move(out_shape), std::move(data), parts, nullptr);
  std::vector<Node*> nodes;
  std::vector<int> widths;
  nodes.reserve(parts.size());
  for (const Tensor& p : parts) {
    nodes.push_back(p.node().get());
    widths.push_back(last_dim(p));
  }
  return finish(std::move(out), [=](Node*) {
    return [=](const Eigen::ArrayXd& g) {
      int off = 0;
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        const int n = widths[i];
        if (nodes[i]->requires_grad) {
          Eigen::ArrayXd& gp = nodes[i]->grad_acc();
          for (Eigen::Index r = 0; r < rows; ++r) {
            Eigen::Map<Eigen::ArrayXd>(gp.data() + r * n, n) +=
                Eigen::Map<const Eigen::ArrayXd>(g.data() + r * total + off, n);
          }
        }
        off += n;
      }
    };
  });
}

Tensor slice_time(const Tensor& x, int t) {
  if (x.ndim() != 3) fail("slice_time: expected [B x L x C], got " + shape_str(x.shape()));
  const int batch = x.dim(0), length = x.dim(1), c = x.dim(2);
  if (t < 0 || t >= length) {
    fail("slice_time: step " + std::to_string(t) + " out of range for length " +
         std::to_string(length));
  }
  Eigen::ArrayXd data(static_cast<Eigen::Index>(batch) * c);
  for (int b = 0; b < batch; ++b) {
    std::memcpy(data.data() + static_cast<std::ptrdiff_t>(b) * c,
                x.data().data() + (static_cast<std::ptrdiff_t>(b) * length + t) * c,
                sizeof(double) * c);
  }
  Tensor out = make_op({batch, c}, std::move(data), {x}, nullptr);
  Node* xn = x.node().get();
  return finish(std::move(out), [=](Node*) {
    return [=](const Eigen::ArrayXd& g) {
      Eigen::ArrayXd& gx = xn->grad_acc();
      for (int b = 0; b < batch; ++b) {
        Eigen::Map<Eigen::ArrayXd>(gx.data() + (static_cast<std::ptrdiff_t>(b) * length + t) * c,
                                   c) +=
            Eigen::Map<const Eigen::ArrayXd>(g.data() + static_cast<std::ptrdiff_t>(b) * c, c);
      }
    };
  });
}

Tensor stack_time(const std::vector<Tensor>& steps) {
  if (steps.empty()) fail("stack_time: no inputs");
  const int batch = steps.front().dim(0);
  const int c = steps.front().dim(1);
  const int length = static_cast<int>(steps.size());
  for (const Tensor& s : steps) {
    if (s.ndim() != 2 || s.dim(0) != batch || s.dim(1) != c) {
      fail("stack_time: inconsistent step shape " + shape_str(s.shape()));
    }
  }
  Eigen::ArrayXd data(static_cast<Eigen::Index>(batch) * length * c);
  for (int t = 0; t < length; ++t) {
    const double* src = steps[static_cast<std::size_t>(t)].data().data();
    for (int b = 0; b < batch; ++b) {
      std::memcpy(data.data() + (static_cast<std::ptrdiff_t>(b) * length + t) * c,
                  src + static_cast<std::ptrdiff_t>(b) * c, sizeof(double) * c);
    }
  }
  Tensor out = make_op({batch, length, c}, std::move(data), steps, nullptr);
  std::vector<Node*> nodes;
  nodes.reserve(steps.size());
  for (const Tensor& s : steps) nodes.push_back(s.node().get());
  return finish(std::move(out), [=](Node*) {
    return [=](const Eigen::ArrayXd& g) {
      for (int t = 0; t < length; ++t) {
        Node* sn = nodes[static_cast<std::size_t>(t)];
        if (!sn->requires_grad) continue;
        Eigen::ArrayXd& gs = sn->grad_acc();
        for (int b = 0; b < batch; ++b) {
          Eigen::Map<Eigen::ArrayXd>(gs.data() + static_cast<std::ptrdiff_t>(b) * c, c) +=
              Eigen::Map<const Eigen::ArrayXd>(
                  g.data() + (static_cast<std::ptrdiff_t>(b) * length + t) * c, c);
        }
      }
    };
  });
}

Tensor attn_scores(const Tensor& q, const Tensor& keys) {
  if (q.ndim() != 2 || keys.ndim() != 3) {
    fail("attn_scores: expected q [B x D] and keys [B x L x D], got " + shape_str(q.shape()) +
         " and " + shape_str(keys.shape()));
  }
  const int batch = q.dim(0), d = q.dim(1), length = keys.dim(1);
  if (keys.dim(0) != batch || keys.dim(2) != d) {
    fail("attn_scores: shape mismatch " + shape_str(q.shape()) + " vs " +
         shape_str(keys.shape()));
  }
  if (length == 0) fail("attn_scores: empty key sequence");
  Eigen::ArrayXd data(static_cast<Eigen::Index>(batch) * length);
  for (int b = 0; b < batch; ++b) {
    CMatMap kb(keys.data().data() + static_cast<std::ptrdiff_t>(b) * length * d, length, d);
    CVecMap qb(q.data().data() + static_cast<std::ptrdiff_t>(b) * d, d);
    VecMap sb(data.data() + static_cast<std::ptrdiff_t>(b) * length, length);
    sb.noalias() = kb * qb;
  }
  Tensor out = make_op({batch, length}, std::move(data), {q, keys}, nullptr);
  Node* qn = q.node().get();
  Node* kn = keys.node().get();
  return finish(std::move(out), [=](Node*) {
    return [=](const Eigen::ArrayXd& g) {
      for (int b = 0; b < batch; ++b) {
        CVecMap gb(g.data() + static_cast<std::ptrdiff_t>(b) * length, length);
        if (qn->requires_grad) {
          CMatMap kb(kn->data.data() + static_cast<std::ptrdiff_t>(b) * length * d, length, d);
          VecMap gq(qn->grad_acc().data() + static_cast<std::ptrdiff_t>(b) * d, d);
          gq.noalias() += kb.transpose() * gb;
        }
        if (kn->requires_grad) {
          CVecMap qb(qn->data.data() + static_cast<std::ptrdiff_t>(b) * d, d);
          MatMap gk(kn->grad_acc().data() + static_cast<std::ptrdiff_t>(b) * length * d, length,
                    d);
          gk.noalias() += gb * qb.transpose();
        }
      }
    };
  });
}

Tensor attn_context(const Tensor& alpha, const Tensor& values) {
  if (alpha.ndim() != 2 || values.ndim() != 3) {
    fail("attn_context: expected alpha [B x L] and values [B x L x D], got " +
         shape_str(alpha.shape()) + " and " + shape_str(values.shape()));
  }
  const int batch = alpha.dim(0), length = alpha.dim(1), d = values.dim(2);
  if (values.dim(0) != batch || values.dim(1) != length) {
    fail("attn_context: shape mismatch " + shape_str(alpha.shape()) + " vs " +
         shape_str(values.shape()));
  }
  Eigen::ArrayXd data(static_cast<Eigen::Index>(batch) * d);
  for (int b = 0; b < batch; ++b) {
    CMatMap vb(values.data().data() + static_cast<std::ptrdiff_t>(b) * length * d, length, d);
    CVecMap ab(alpha.data().data() + static_cast<std::ptrdiff_t>(b) * length, length);
    VecMap cb(data.data() + static_cast<std::ptrdiff_t>(b) * d, d);
    cb.noalias() = vb.transpose() * ab;
  }
  Tensor out = make_op({batch, d}, std::move(data), {alpha, values}, nullptr);
  Node* an = alpha.node().get();
  Node* vn = values.node().get();
  return finish(std::move(out), [=](Node*) {
    return [=](const Eigen::ArrayXd& g) {
      for (int b = 0; b < batch; ++b) {
        CVecMap gb(g.data() + static_cast<std::ptrdiff_t>(b) * d, d);
        if (an->requires_grad) {
          CMatMap vb(vn->data.data() + static_cast<std::ptrdiff_t>(b) * length * d, length, d);
          VecMap ga(an->grad_acc().data() + static_cast<std::ptrdiff_t>(b) * length, length);
          ga.noalias() += vb * gb;
        }
        if (vn->requires_grad) {
          CVecMap ab(an->data.data() + static_cast<std::ptrdiff_t>(b) * length, length);
          MatMap gv(vn->grad_acc().data() + static_cast<std::ptrdiff_t>(b) * length * d, length,
                    d);
          gv.noalias() += ab * gb.transpose();
        }
      }
    };
  });
}

}  // namespace spt2ss
