#include "perspective/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <Eigen/Core>

namespace perspective::ad {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
ConstMatMap<T> as_matrix(const Tensor<T>& t) {
  return ConstMatMap<T>(t.data(), t.dim(0), t.dim(1));
}
template <typename T>
MatMap<T> as_matrix(Tensor<T>& t) {
  return MatMap<T>(t.data(), t.dim(0), t.dim(1));
}

template <typename T>
Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> as_array(const Tensor<T>& t) {
  return {t.data(), static_cast<Eigen::Index>(t.size())};
}
template <typename T>
Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> as_array(Tensor<T>& t) {
  return {t.data(), static_cast<Eigen::Index>(t.size())};
}

// Messages are only built when the check fails.
#define require(ok, what)                  \
  do {                                     \
    if (!(ok)) throw ShapeError(what);     \
  } while (false)

template <typename T>
void require_rank2(const Tensor<T>& t, const char* op) {
  require(t.rank() == 2, std::string(op) + ": expected a rank-2 operand, got " + shape_string(t.shape()));
}

template <typename T>
void accumulate(Tensor<T>& into, const Tensor<T>& from) {
  T* a = into.data();
  const T* b = from.data();
  for (std::size_t i = 0, n = into.size(); i < n; ++i) a[i] += b[i];
}

}  // namespace

const char* to_string(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "?";
}

const char* to_string(Padding p) { return p == Padding::Valid ? "valid" : "same"; }

Activation parse_activation(const std::string& s) {
  for (Activation a : {Activation::Linear, Activation::Relu, Activation::Tanh, Activation::Sigmoid})
    if (s == to_string(a)) return a;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

Padding parse_padding(const std::string& s) {
  if (s == "valid") return Padding::Valid;
  if (s == "same") return Padding::Same;
  throw std::invalid_argument("unknown padding '" + s + "'");
}

// ---------------------------------------------------------------------------
// Tape

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
Var<T> Tape<T>::leaf(Tensor<T> value) {
  nodes_.push_back(Node{std::move(value), {}, recording_, {}});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, std::initializer_list<Var<T>> parents, Backward backward) {
  bool needs = false;
  if (recording_)
    for (const Var<T>& p : parents) {
      if (p.tape != this) throw std::logic_error("operands live on different tapes");
      needs = needs || needs_grad(p.id);
    }
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : Backward{}});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
Tensor<T>& Tape<T>::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor<T>(n.value.shape());
  return n.grad;
}

template <typename T>
void Tape<T>::backward(Var<T> out) {
  if (!recording_) throw std::logic_error("backward() on a tape that does not record");
  if (value(out).size() != 1) throw ShapeError("backward() needs a single-element output");
  if (!needs_grad(out.id)) return;
  grad(out.id)[0] += T(1);
  for (int id = out.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.backward && !n.grad.empty()) n.backward(*this, id);
  }
}

// ---------------------------------------------------------------------------
// Ops

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  require_rank2(av, "matmul");
  require_rank2(bv, "matmul");
  require(av.dim(1) == bv.dim(0), "matmul: " + shape_string(av.shape()) + " * " + shape_string(bv.shape()));
  Tensor<T> out({av.dim(0), bv.dim(1)});
  as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv);
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<T>& tape, int self) {
    const Tensor<T>& g = tape.grad(self);
    if (tape.needs_grad(a)) as_matrix(tape.grad(a)).noalias() += as_matrix(g) * as_matrix(b.value()).transpose();
    if (tape.needs_grad(b)) as_matrix(tape.grad(b)).noalias() += as_matrix(a.value()).transpose() * as_matrix(g);
  });
}

template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias) {
  const Tensor<T>& xv = x.value();
  const Tensor<T>& bv = bias.value();
  require_rank2(xv, "add_bias");
  require(bv.size() == static_cast<std::size_t>(xv.dim(1)),
          "add_bias: bias " + shape_string(bv.shape()) + " for input " + shape_string(xv.shape()));
  Tensor<T> out = xv;
  const int rows = xv.dim(0), cols = xv.dim(1);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out.at(r, c) += bv[static_cast<std::size_t>(c)];
  return x.tape->record(std::move(out), {x, bias}, [x, bias, rows, cols](Tape<T>& tape, int self) {
    const Tensor<T>& g = tape.grad(self);
    if (tape.needs_grad(x)) accumulate(tape.grad(x), g);
    if (tape.needs_grad(bias)) {
      Tensor<T>& gb = tape.grad(bias);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) gb[static_cast<std::size_t>(c)] += g.at(r, c);
    }
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require(a.value().same_shape(b.value()), "add: shape mismatch");
  Tensor<T> out = a.value();
  accumulate(out, b.value());
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<T>& tape, int self) {
    const Tensor<T>& g = tape.grad(self);
    if (tape.needs_grad(a)) accumulate(tape.grad(a), g);
    if (tape.needs_grad(b)) accumulate(tape.grad(b), g);
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  require(a.value().same_shape(b.value()), "sub: shape mismatch");
  Tensor<T> out = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<T>& tape, int self) {
    const Tensor<T>& g = tape.grad(self);
    if (tape.needs_grad(a)) accumulate(tape.grad(a), g);
    if (tape.needs_grad(b)) {
      Tensor<T>& gb = tape.grad(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require(a.value().same_shape(b.value()), "mul: shape mismatch");
  Tensor<T> out = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<T>& tape, int self) {
    const Tensor<T>& g = tape.grad(self);
    if (tape.needs_grad(a)) {
      Tensor<T>& ga = tape.grad(a);
      const Tensor<T>& bv = b.value();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tape.needs_grad(b)) {
      Tensor<T>& gb = tape.grad(b);
      const Tensor<T>& av = a.value();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  Tensor<T> out = a.value();
  for (T& v : out.values()) v *= factor;
  return a.tape->record(std::move(out), {a}, [a, factor](Tape<T>& tape, int self) {
    const Tensor<T>& g = tape.grad(self);
    Tensor<T>& ga = tape.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

template <typename T>
Var<T> relu(Var<T> x) {
  Tensor<T> out = x.value();
  for (T& v : out.values()) v = v > T(0) ? v : T(0);
  return x.tape->record(std::move(out), {x}, [x](Tape<T>& tape, int self) {
    const Tensor<T>& g = tape.grad(self);
    const Tensor<T>& xv = x.value();
    Tensor<T>& gx = tape.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] > T(0)) gx[i] += g[i];
  });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  Tensor<T> out(x.value().shape());
  as_array(out) = as_array(x.value()).logistic();
  return x.tape->record(std::move(out), {x}, [x](Tape<T>& tape, int self) {
    const auto y = as_array(tape.value(self));
    as_array(tape.grad(x)) += as_array(tape.grad(self)) * y * (T(1) - y);
  });
}

template <typename T>
Var<T> tanh(Var<T> x) {
  Tensor<T> out(x.value().shape());
  as_array(out) = as_array(x.value()).tanh();
  return x.tape->record(std::move(out), {x}, [x](Tape<T>& tape, int self) {
    const auto y = as_array(tape.value(self));
    as_array(tape.grad(x)) += as_array(tape.grad(self)) * (T(1) - y.square());
  });
}

template <typename T>
Var<T> activate(Var<T> x, Activation a) {
  switch (a) {
    case Activation::Linear: return x;
    case Activation::Relu: return relu(x);
    case Activation::Tanh: return tanh(x);
    case Activation::Sigmoid: return sigmoid(x);
  }
  return x;
}

template <typename T>
Var<T> concat_cols(Var<T> a, Var<T> b) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  require_rank2(av, "concat_cols");
  require_rank2(bv, "concat_cols");
  require(av.dim(0) == bv.dim(0), "concat_cols: row counts differ");
  const int rows = av.dim(0), ca = av.dim(1), cb = bv.dim(1);
  Tensor<T> out({rows, ca + cb});
  for (int r = 0; r < rows; ++r) {
    std::copy_n(av.data() + r * ca, ca, out.data() + r * (ca + cb));
    std::copy_n(bv.data() + r * cb, cb, out.data() + r * (ca + cb) + ca);
  }
  return a.tape->record(std::move(out), {a, b}, [a, b, rows, ca, cb](Tape<T>& tape, int self) {
    const Tensor<T>& g = tape.grad(self);
    const bool na = tape.needs_grad(a), nb = tape.needs_grad(b);
    for (int r = 0; r < rows; ++r) {
      const T* src = g.data() + r * (ca + cb);
      if (na) {
        T* d = tape.grad(a).data() + r * ca;
        for (int c = 0; c < ca; ++c) d[c] += src[c];
      }
      if (nb) {
        T* d = tape.grad(b).data() + r * cb;
        for (int c = 0; c < cb; ++c) d[c] += src[ca + c];
      }
    }
  });
}

template <typename T>
Var<T> slice_cols(Var<T> x, int begin, int count) {
  const Tensor<T>& xv = x.value();
  require_rank2(xv, "slice_cols");
  require(begin >= 0 && count >= 0 && begin + count <= xv.dim(1), "slice_cols: range out of bounds");
  const int rows = xv.dim(0), cols = xv.dim(1);
  Tensor<T> out({rows, count});
  for (int r = 0; r < rows; ++r) std::copy_n(xv.data() + r * cols + begin, count, out.data() + r * count);
  return x.tape->record(std::move(out), {x}, [x, rows, cols, begin, count](Tape<T>& tape, int self) {
    const Tensor<T>& g = tape.grad(self);
    Tensor<T>& gx = tape.grad(x);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < count; ++c) gx[static_cast<std::size_t>(r * cols + begin + c)] += g.at(r, c);
  });
}

template <typename T>
Var<T> slice_rows(Var<T> x, int begin, int count) {
  const Tensor<T>& xv = x.value();
  require_rank2(xv, "slice_rows");
  require(begin >= 0 && count >= 0 && begin + count <= xv.dim(0), "slice_rows: range out of bounds");
  const int cols = xv.dim(1);
  const auto offset = static_cast<std::size_t>(begin) * static_cast<std::size_t>(cols);
  Tensor<T> out({count, cols});
  std::copy_n(xv.data() + offset, out.size(), out.data());
  return x.tape->record(std::move(out), {x}, [x, offset](Tape<T>& tape, int self) {
    const Tensor<T>& g = tape.grad(self);
    T* gx = tape.grad(x).data() + offset;
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

template <typename T>
Var<T> reshape(Var<T> x, std::vector<int> shape) {
  Tensor<T> out = x.value();
  out.reshape(std::move(shape));
  return x.tape->record(std::move(out), {x}, [x](Tape<T>& tape, int self) {
    accumulate(tape.grad(x), tape.grad(self));
  });
}

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> kernels, Var<T> bias, Padding padding) {
  const Tensor<T>& xv = x.value();
  const Tensor<T>& kv = kernels.value();
  require(xv.rank() == 4, "conv2d: input must be [B x C x H x W], got " + shape_string(xv.shape()));
  require(kv.rank() == 4 && kv.dim(2) == kv.dim(3), "conv2d: kernels must be [F x C x K x K]");
  require(kv.dim(1) == xv.dim(1), "conv2d: channel mismatch between input " + shape_string(xv.shape()) +
                                      " and kernels " + shape_string(kv.shape()));
  require(bias.value().size() == static_cast<std::size_t>(kv.dim(0)), "conv2d: bias size mismatch");
  const int B = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  const int F = kv.dim(0), K = kv.dim(2);
  const int pad = padding == Padding::Same ? K / 2 : 0;
  const int OH = H + 2 * pad - K + 1, OW = W + 2 * pad - K + 1;
  require(OH >= 1 && OW >= 1, "conv2d: input " + shape_string(xv.shape()) + " smaller than kernel");

  // im2col: one row per (b, oy, ox), one column per (c, ki, kj); padded taps stay zero.
  const int P = OH * OW, CKK = C * K * K;
  auto cols = std::make_shared<RowMat<T>>(RowMat<T>::Zero(static_cast<Eigen::Index>(B) * P, CKK));
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      const T* in = xv.data() + (static_cast<std::size_t>(b) * C + c) * H * W;
      for (int ki = 0; ki < K; ++ki)
        for (int kj = 0; kj < K; ++kj) {
          const int col = (c * K + ki) * K + kj;
          for (int oy = 0; oy < OH; ++oy) {
            const int iy = oy + ki - pad;
            if (iy < 0 || iy >= H) continue;
            const int x0 = std::max(0, pad - kj), x1 = std::min(OW, W + pad - kj);
            for (int ox = x0; ox < x1; ++ox)
              (*cols)(static_cast<Eigen::Index>(b) * P + oy * OW + ox, col) = in[iy * W + ox + kj - pad];
          }
        }
    }
  const ConstMatMap<T> kmat(kv.data(), F, CKK);
  const RowMat<T> prod = (*cols) * kmat.transpose();  // [B*P x F]
  Tensor<T> out({B, F, OH, OW});
  const T* bv = bias.value().data();
  for (int b = 0; b < B; ++b)
    for (int f = 0; f < F; ++f) {
      T* o = out.data() + (static_cast<std::size_t>(b) * F + f) * P;
      for (int p = 0; p < P; ++p) o[p] = prod(static_cast<Eigen::Index>(b) * P + p, f) + bv[f];
    }

  return x.tape->record(std::move(out), {x, kernels, bias},
                        [=](Tape<T>& tape, int self) {
                          const Tensor<T>& g = tape.grad(self);
                          RowMat<T> gmat(static_cast<Eigen::Index>(B) * P, F);
                          for (int b = 0; b < B; ++b)
                            for (int f = 0; f < F; ++f) {
                              const T* go = g.data() + (static_cast<std::size_t>(b) * F + f) * P;
                              for (int p = 0; p < P; ++p) gmat(static_cast<Eigen::Index>(b) * P + p, f) = go[p];
                            }
                          if (tape.needs_grad(bias)) {
                            T* gb = tape.grad(bias).data();
                            for (int f = 0; f < F; ++f) gb[f] += gmat.col(f).sum();
                          }
                          if (tape.needs_grad(kernels)) {
                            Tensor<T>& gk = tape.grad(kernels);
                            MatMap<T>(gk.data(), F, CKK).noalias() += gmat.transpose() * (*cols);
                          }
                          if (tape.needs_grad(x)) {
                            const Tensor<T>& kv = kernels.value();
                            const RowMat<T> gcols = gmat * ConstMatMap<T>(kv.data(), F, CKK);
                            T* gx = tape.grad(x).data();
                            for (int b = 0; b < B; ++b)
                              for (int c = 0; c < C; ++c) {
                                T* gplane = gx + (static_cast<std::size_t>(b) * C + c) * H * W;
                                for (int ki = 0; ki < K; ++ki)
                                  for (int kj = 0; kj < K; ++kj) {
                                    const int col = (c * K + ki) * K + kj;
                                    for (int oy = 0; oy < OH; ++oy) {
                                      const int iy = oy + ki - pad;
                                      if (iy < 0 || iy >= H) continue;
                                      const int x0 = std::max(0, pad - kj), x1 = std::min(OW, W + pad - kj);
                                      for (int ox = x0; ox < x1; ++ox)
                                        gplane[iy * W + ox + kj - pad] +=
                                            gcols(static_cast<Eigen::Index>(b) * P + oy * OW + ox, col);
                                    }
                                  }
                              }
                          }
                        });
}

template <typename T>
Var<T> dueling(Var<T> value, Var<T> advantage) {
  const Tensor<T>& vv = value.value();
  const Tensor<T>& av = advantage.value();
  require_rank2(av, "dueling");
  const int rows = av.dim(0), cols = av.dim(1);
  require(vv.size() == static_cast<std::size_t>(rows), "dueling: value must have one entry per row");
  Tensor<T> out({rows, cols});
  std::vector<int> argmax(static_cast<std::size_t>(rows));
  for (int r = 0; r < rows; ++r) {
    int best = 0;
    for (int c = 1; c < cols; ++c)
      if (av.at(r, c) > av.at(r, best)) best = c;
    argmax[static_cast<std::size_t>(r)] = best;
    const T top = av.at(r, best);
    for (int c = 0; c < cols; ++c) out.at(r, c) = vv[static_cast<std::size_t>(r)] + (av.at(r, c) - top);
  }
  return value.tape->record(std::move(out), {value, advantage},
                            [value, advantage, rows, cols, argmax](Tape<T>& tape, int self) {
                              const Tensor<T>& g = tape.grad(self);
                              const bool nv = tape.needs_grad(value), na = tape.needs_grad(advantage);
                              for (int r = 0; r < rows; ++r) {
                                T row_sum = T(0);
                                for (int c = 0; c < cols; ++c) row_sum += g.at(r, c);
                                if (nv) tape.grad(value)[static_cast<std::size_t>(r)] += row_sum;
                                if (na) {
                                  Tensor<T>& ga = tape.grad(advantage);
                                  for (int c = 0; c < cols; ++c) ga.at(r, c) += g.at(r, c);
                                  ga.at(r, argmax[static_cast<std::size_t>(r)]) -= row_sum;
                                }
                              }
                            });
}

template <typename T>
Var<T> gather_cols(Var<T> x, std::span<const int> index) {
  const Tensor<T>& xv = x.value();
  require_rank2(xv, "gather_cols");
  const int rows = xv.dim(0), cols = xv.dim(1);
  require(index.size() == static_cast<std::size_t>(rows), "gather_cols: one index per row required");
  std::vector<int> idx(index.begin(), index.end());
  Tensor<T> out({rows});
  for (int r = 0; r < rows; ++r) {
    const int c = idx[static_cast<std::size_t>(r)];
    require(c >= 0 && c < cols, "gather_cols: index out of range");
    out[static_cast<std::size_t>(r)] = xv.at(r, c);
  }
  return x.tape->record(std::move(out), {x}, [x, idx = std::move(idx)](Tape<T>& tape, int self) {
    const Tensor<T>& g = tape.grad(self);
    Tensor<T>& gx = tape.grad(x);
    for (std::size_t r = 0; r < idx.size(); ++r) gx.at(static_cast<int>(r), idx[r]) += g[r];
  });
}

template <typename T>
Var<T> weighted_squared_error(Var<T> pred, std::span<const T> target, std::span<const T> weight) {
  const Tensor<T>& pv = pred.value();
  require(pv.size() == target.size() && pv.size() == weight.size(), "weighted_squared_error: size mismatch");
  std::vector<T> diff(pv.size());
  std::vector<T> w(weight.begin(), weight.end());
  T total = T(0);
  for (std::size_t i = 0; i < pv.size(); ++i) {
    diff[i] = pv[i] - target[i];
    total += w[i] * diff[i] * diff[i];
  }
  return pred.tape->record(Tensor<T>({1}, {total}), {pred},
                           [pred, diff = std::move(diff), w = std::move(w)](Tape<T>& tape, int self) {
                             const T g = tape.grad(self)[0];
                             Tensor<T>& gp = tape.grad(pred);
                             for (std::size_t i = 0; i < diff.size(); ++i) gp[i] += g * T(2) * w[i] * diff[i];
                           });
}

template <typename T>
Var<T> softmax_cross_entropy(Var<T> logits, std::span<const int> labels) {
  const Tensor<T>& lv = logits.value();
  require_rank2(lv, "softmax_cross_entropy");
  const int rows = lv.dim(0), cols = lv.dim(1);
  require(cols >= 2, "softmax_cross_entropy: need at least two classes");
  require(labels.size() == static_cast<std::size_t>(rows), "softmax_cross_entropy: one label per row required");
  Tensor<T> probs({rows, cols});
  T total = T(0);
  for (int r = 0; r < rows; ++r) {
    const int label = labels[static_cast<std::size_t>(r)];
    require(label >= 0 && label < cols, "softmax_cross_entropy: label out of range");
    T top = lv.at(r, 0);
    for (int c = 1; c < cols; ++c) top = std::max(top, lv.at(r, c));
    T z = T(0);
    for (int c = 0; c < cols; ++c) z += std::exp(lv.at(r, c) - top);
    const T log_z = top + std::log(z);
    for (int c = 0; c < cols; ++c) probs.at(r, c) = std::exp(lv.at(r, c) - log_z);
    total += log_z - lv.at(r, label);
  }
  std::vector<int> lab(labels.begin(), labels.end());
  return logits.tape->record(
      Tensor<T>({1}, {total / T(rows)}), {logits},
      [logits, probs = std::move(probs), lab = std::move(lab), rows, cols](Tape<T>& tape, int self) {
        const T g = tape.grad(self)[0] / T(rows);
        Tensor<T>& gl = tape.grad(logits);
        for (int r = 0; r < rows; ++r) {
          for (int c = 0; c < cols; ++c) gl.at(r, c) += g * probs.at(r, c);
          gl.at(r, lab[static_cast<std::size_t>(r)]) -= g;
        }
      });
}

template <typename T>
Var<T> sum(Var<T> x) {
  T total = T(0);
  for (T v : x.value().values()) total += v;
  return x.tape->record(Tensor<T>({1}, {total}), {x}, [x](Tape<T>& tape, int self) {
    const T g = tape.grad(self)[0];
    for (T& v : tape.grad(x).values()) v += g;
  });
}

#define PERSPECTIVE_INSTANTIATE(T)                                                                    \
  template class Tape<T>;                                                                             \
  template Var<T> matmul(Var<T>, Var<T>);                                                             \
  template Var<T> add_bias(Var<T>, Var<T>);                                                           \
  template Var<T> add(Var<T>, Var<T>);                                                                \
  template Var<T> sub(Var<T>, Var<T>);                                                                \
  template Var<T> mul(Var<T>, Var<T>);                                                                \
  template Var<T> scale(Var<T>, T);                                                                   \
  template Var<T> relu(Var<T>);                                                                       \
  template Var<T> sigmoid(Var<T>);                                                                    \
  template Var<T> tanh(Var<T>);                                                                       \
  template Var<T> activate(Var<T>, Activation);                                                       \
  template Var<T> concat_cols(Var<T>, Var<T>);                                                        \
  template Var<T> slice_rows(Var<T>, int, int);                                                       \
  template Var<T> slice_cols(Var<T>, int, int);                                                       \
  template Var<T> reshape(Var<T>, std::vector<int>);                                                  \
  template Var<T> conv2d(Var<T>, Var<T>, Var<T>, Padding);                                            \
  template Var<T> dueling(Var<T>, Var<T>);                                                            \
  template Var<T> gather_cols(Var<T>, std::span<const int>);                                          \
  template Var<T> weighted_squared_error(Var<T>, std::span<const T>, std::span<const T>);             \
  template Var<T> softmax_cross_entropy(Var<T>, std::span<const int>);                                \
  template Var<T> sum(Var<T>);

PERSPECTIVE_INSTANTIATE(float)
PERSPECTIVE_INSTANTIATE(double)

#undef PERSPECTIVE_INSTANTIATE

#undef require

}  // namespace perspective::ad
