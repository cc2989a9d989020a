#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qtrack/mask.hpp"
#include "qtrack/rng.hpp"

namespace qtrack {

// Reverse-mode tape over dense Eigen matrices, rebuilt every step
// (define-by-run). Ops whose output rows correspond to decoder queries
// evaluate row by row, so a query's forward value never depends on the
// bits of other rows; this is what makes the denoising-isolation
// contract hold exactly rather than approximately.
template <typename S>
class Tape {
 public:
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using BackFn = std::function<void(Tape&, int)>;

  struct Node {
    Mat value;
    Mat grad;
    BackFn back;
    const char* name = "";
  };

  int emplace(Mat value, BackFn back = nullptr, const char* name = "") {
    if (check_finite_ && !value.allFinite()) {
      throw std::runtime_error(std::string("tape: non-finite value in op '") + name + "'");
    }
    nodes_.push_back(Node{std::move(value), Mat(), std::move(back), name});
    return static_cast<int>(nodes_.size()) - 1;
  }

  const Mat& val(int id) const { return nodes_[id].value; }
  Mat& grad(int id) { return nodes_[id].grad; }
  std::size_t size() const { return nodes_.size(); }
  void set_check_finite(bool on) { check_finite_ = on; }

  // Seeds d(root)/d(root) = 1 and sweeps the tape in reverse creation
  // order. root must be a 1x1 scalar node.
  void backward(int root) {
    if (nodes_[root].value.rows() != 1 || nodes_[root].value.cols() != 1) {
      throw std::logic_error("tape backward: root is not a scalar");
    }
    for (auto& n : nodes_) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    nodes_[root].grad(0, 0) = S(1);
    for (int id = root; id >= 0; --id) {
      auto& n = nodes_[id];
      if (n.back) n.back(*this, id);
      if (check_finite_ && !n.grad.allFinite()) {
        throw std::runtime_error(std::string("tape: non-finite gradient in op '") + n.name + "'");
      }
    }
  }

 private:
  std::vector<Node> nodes_;
  bool check_finite_ = true;
};

template <typename S>
struct Var {
  int id = -1;
  Tape<S>* tape = nullptr;

  bool valid() const { return tape != nullptr && id >= 0; }
  const typename Tape<S>::Mat& val() const { return tape->val(id); }
  const typename Tape<S>::Mat& grad() const { return tape->grad(id); }
  Eigen::Index rows() const { return val().rows(); }
  Eigen::Index cols() const { return val().cols(); }
};

template <typename S>
Var<S> leaf(Tape<S>& tape, typename Tape<S>::Mat value, const char* name = "leaf") {
  return Var<S>{tape.emplace(std::move(value), nullptr, name), &tape};
}

// ---- elementwise arithmetic ----

template <typename S>
Var<S> operator+(Var<S> a, Var<S> b) {
  auto& t = *a.tape;
  int id = t.emplace(t.val(a.id) + t.val(b.id),
                     [ia = a.id, ib = b.id](Tape<S>& T, int self) {
                       T.grad(ia) += T.grad(self);
                       T.grad(ib) += T.grad(self);
                     },
                     "add");
  return {id, &t};
}

template <typename S>
Var<S> operator-(Var<S> a, Var<S> b) {
  auto& t = *a.tape;
  int id = t.emplace(t.val(a.id) - t.val(b.id),
                     [ia = a.id, ib = b.id](Tape<S>& T, int self) {
                       T.grad(ia) += T.grad(self);
                       T.grad(ib) -= T.grad(self);
                     },
                     "sub");
  return {id, &t};
}

template <typename S>
Var<S> operator*(Var<S> a, Var<S> b) {  // elementwise
  auto& t = *a.tape;
  int id = t.emplace((t.val(a.id).array() * t.val(b.id).array()).matrix(),
                     [ia = a.id, ib = b.id](Tape<S>& T, int self) {
                       T.grad(ia).array() += T.grad(self).array() * T.val(ib).array();
                       T.grad(ib).array() += T.grad(self).array() * T.val(ia).array();
                     },
                     "mul");
  return {id, &t};
}

template <typename S>
Var<S> operator/(Var<S> a, Var<S> b) {  // elementwise
  auto& t = *a.tape;
  int id = t.emplace((t.val(a.id).array() / t.val(b.id).array()).matrix(),
                     [ia = a.id, ib = b.id](Tape<S>& T, int self) {
                       const auto& g = T.grad(self).array();
                       const auto& vb = T.val(ib).array();
                       T.grad(ia).array() += g / vb;
                       T.grad(ib).array() -= g * T.val(ia).array() / (vb * vb);
                     },
                     "div");
  return {id, &t};
}

template <typename S>
Var<S> scale(Var<S> a, S c) {
  auto& t = *a.tape;
  int id = t.emplace(t.val(a.id) * c,
                     [ia = a.id, c](Tape<S>& T, int self) { T.grad(ia) += T.grad(self) * c; },
                     "scale");
  return {id, &t};
}

template <typename S>
Var<S> add_const(Var<S> a, S c) {
  auto& t = *a.tape;
  int id = t.emplace((t.val(a.id).array() + c).matrix(),
                     [ia = a.id](Tape<S>& T, int self) { T.grad(ia) += T.grad(self); },
                     "add_const");
  return {id, &t};
}

// Broadcast a 1 x d row (bias) over every row of a.
template <typename S>
Var<S> add_rowwise(Var<S> a, Var<S> bias) {
  auto& t = *a.tape;
  typename Tape<S>::Mat v = t.val(a.id);
  v.rowwise() += t.val(bias.id).row(0);
  int id = t.emplace(std::move(v),
                     [ia = a.id, ib = bias.id](Tape<S>& T, int self) {
                       T.grad(ia) += T.grad(self);
                       T.grad(ib).row(0) += T.grad(self).colwise().sum();
                     },
                     "add_rowwise");
  return {id, &t};
}

// ---- matrix products (forward row-by-row; see class comment) ----

template <typename S>
Var<S> matmul(Var<S> a, Var<S> b) {
  auto& t = *a.tape;
  const auto& A = t.val(a.id);
  const auto& B = t.val(b.id);
  typename Tape<S>::Mat v(A.rows(), B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i) v.row(i).noalias() = A.row(i) * B;
  int id = t.emplace(std::move(v),
                     [ia = a.id, ib = b.id](Tape<S>& T, int self) {
                       const auto& g = T.grad(self);
                       T.grad(ia).noalias() += g * T.val(ib).transpose();
                       T.grad(ib).noalias() += T.val(ia).transpose() * g;
                     },
                     "matmul");
  return {id, &t};
}

template <typename S>
Var<S> matmul_nt(Var<S> a, Var<S> b) {  // a * b^T
  auto& t = *a.tape;
  const auto& A = t.val(a.id);
  const auto& B = t.val(b.id);
  typename Tape<S>::Mat v(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i) v.row(i).noalias() = A.row(i) * B.transpose();
  int id = t.emplace(std::move(v),
                     [ia = a.id, ib = b.id](Tape<S>& T, int self) {
                       const auto& g = T.grad(self);
                       T.grad(ia).noalias() += g * T.val(ib);
                       T.grad(ib).noalias() += g.transpose() * T.val(ia);
                     },
                     "matmul_nt");
  return {id, &t};
}

// ---- shape ops ----

template <typename S>
Var<S> slice_cols(Var<S> a, int begin, int n) {
  auto& t = *a.tape;
  int id = t.emplace(t.val(a.id).middleCols(begin, n),
                     [ia = a.id, begin, n](Tape<S>& T, int self) {
                       T.grad(ia).middleCols(begin, n) += T.grad(self);
                     },
                     "slice_cols");
  return {id, &t};
}

template <typename S>
Var<S> slice_rows(Var<S> a, int begin, int n) {
  auto& t = *a.tape;
  int id = t.emplace(t.val(a.id).middleRows(begin, n),
                     [ia = a.id, begin, n](Tape<S>& T, int self) {
                       T.grad(ia).middleRows(begin, n) += T.grad(self);
                     },
                     "slice_rows");
  return {id, &t};
}

template <typename S>
Var<S> concat_cols(const std::vector<Var<S>>& parts) {
  auto& t = *parts.front().tape;
  Eigen::Index rows = t.val(parts.front().id).rows();
  Eigen::Index cols = 0;
  for (auto p : parts) cols += t.val(p.id).cols();
  typename Tape<S>::Mat v(rows, cols);
  std::vector<int> ids;
  std::vector<int> offsets;
  Eigen::Index at = 0;
  for (auto p : parts) {
    const auto& m = t.val(p.id);
    v.middleCols(at, m.cols()) = m;
    ids.push_back(p.id);
    offsets.push_back(static_cast<int>(at));
    at += m.cols();
  }
  int id = t.emplace(std::move(v),
                     [ids, offsets](Tape<S>& T, int self) {
                       for (std::size_t k = 0; k < ids.size(); ++k) {
                         auto& g = T.grad(ids[k]);
                         g += T.grad(self).middleCols(offsets[k], g.cols());
                       }
                     },
                     "concat_cols");
  return {id, &t};
}

template <typename S>
Var<S> concat_rows(const std::vector<Var<S>>& parts) {
  auto& t = *parts.front().tape;
  Eigen::Index cols = t.val(parts.front().id).cols();
  Eigen::Index rows = 0;
  for (auto p : parts) rows += t.val(p.id).rows();
  typename Tape<S>::Mat v(rows, cols);
  std::vector<int> ids;
  std::vector<int> offsets;
  Eigen::Index at = 0;
  for (auto p : parts) {
    const auto& m = t.val(p.id);
    v.middleRows(at, m.rows()) = m;
    ids.push_back(p.id);
    offsets.push_back(static_cast<int>(at));
    at += m.rows();
  }
  int id = t.emplace(std::move(v),
                     [ids, offsets](Tape<S>& T, int self) {
                       for (std::size_t k = 0; k < ids.size(); ++k) {
                         auto& g = T.grad(ids[k]);
                         g += T.grad(self).middleRows(offsets[k], g.rows());
                       }
                     },
                     "concat_rows");
  return {id, &t};
}

template <typename S>
Var<S> gather_rows(Var<S> a, std::vector<int> indices) {
  auto& t = *a.tape;
  const auto& A = t.val(a.id);
  typename Tape<S>::Mat v(static_cast<Eigen::Index>(indices.size()), A.cols());
  for (std::size_t k = 0; k < indices.size(); ++k) v.row(static_cast<Eigen::Index>(k)) = A.row(indices[k]);
  int id = t.emplace(std::move(v),
                     [ia = a.id, indices = std::move(indices)](Tape<S>& T, int self) {
                       for (std::size_t k = 0; k < indices.size(); ++k) {
                         T.grad(ia).row(indices[k]) += T.grad(self).row(static_cast<Eigen::Index>(k));
                       }
                     },
                     "gather_rows");
  return {id, &t};
}

// ---- nonlinearities ----

template <typename S>
Var<S> relu(Var<S> a) {
  auto& t = *a.tape;
  int id = t.emplace(t.val(a.id).cwiseMax(S(0)),
                     [ia = a.id](Tape<S>& T, int self) {
                       T.grad(ia).array() +=
                           T.grad(self).array() * (T.val(ia).array() > S(0)).template cast<S>();
                     },
                     "relu");
  return {id, &t};
}

template <typename S>
Var<S> sigmoid(Var<S> a) {
  auto& t = *a.tape;
  typename Tape<S>::Mat v =
      (S(1) / (S(1) + (-t.val(a.id).array()).exp())).matrix();
  int id = t.emplace(std::move(v),
                     [ia = a.id](Tape<S>& T, int self) {
                       const auto& y = T.val(self).array();
                       T.grad(ia).array() += T.grad(self).array() * y * (S(1) - y);
                     },
                     "sigmoid");
  return {id, &t};
}

template <typename S>
Var<S> log_op(Var<S> a) {
  auto& t = *a.tape;
  int id = t.emplace(t.val(a.id).array().log().matrix(),
                     [ia = a.id](Tape<S>& T, int self) {
                       T.grad(ia).array() += T.grad(self).array() / T.val(ia).array();
                     },
                     "log");
  return {id, &t};
}

// Clamp into [lo, hi]; gradient passes only through unclamped entries.
template <typename S>
Var<S> clamp(Var<S> a, S lo, S hi) {
  auto& t = *a.tape;
  int id = t.emplace(t.val(a.id).cwiseMax(lo).cwiseMin(hi),
                     [ia = a.id, lo, hi](Tape<S>& T, int self) {
                       const auto& x = T.val(ia).array();
                       T.grad(ia).array() +=
                           T.grad(self).array() * ((x > lo) && (x < hi)).template cast<S>();
                     },
                     "clamp");
  return {id, &t};
}

template <typename S>
Var<S> abs_op(Var<S> a) {
  auto& t = *a.tape;
  int id = t.emplace(t.val(a.id).cwiseAbs(),
                     [ia = a.id](Tape<S>& T, int self) {
                       const auto& x = T.val(ia).array();
                       T.grad(ia).array() +=
                           T.grad(self).array() * (x > S(0)).template cast<S>() -
                           T.grad(self).array() * (x < S(0)).template cast<S>();
                     },
                     "abs");
  return {id, &t};
}

// Elementwise x^e for strictly positive x.
template <typename S>
Var<S> pow_const(Var<S> a, S exponent) {
  auto& t = *a.tape;
  int id = t.emplace(t.val(a.id).array().pow(exponent).matrix(),
                     [ia = a.id, exponent](Tape<S>& T, int self) {
                       T.grad(ia).array() += T.grad(self).array() * exponent *
                                             T.val(ia).array().pow(exponent - S(1));
                     },
                     "pow_const");
  return {id, &t};
}

template <typename S>
Var<S> emin(Var<S> a, Var<S> b) {  // ties route gradient to a
  auto& t = *a.tape;
  int id = t.emplace(t.val(a.id).cwiseMin(t.val(b.id)),
                     [ia = a.id, ib = b.id](Tape<S>& T, int self) {
                       const auto pick_a = (T.val(ia).array() <= T.val(ib).array()).template cast<S>();
                       T.grad(ia).array() += T.grad(self).array() * pick_a;
                       T.grad(ib).array() += T.grad(self).array() * (S(1) - pick_a);
                     },
                     "emin");
  return {id, &t};
}

template <typename S>
Var<S> emax(Var<S> a, Var<S> b) {
  auto& t = *a.tape;
  int id = t.emplace(t.val(a.id).cwiseMax(t.val(b.id)),
                     [ia = a.id, ib = b.id](Tape<S>& T, int self) {
                       const auto pick_a = (T.val(ia).array() >= T.val(ib).array()).template cast<S>();
                       T.grad(ia).array() += T.grad(self).array() * pick_a;
                       T.grad(ib).array() += T.grad(self).array() * (S(1) - pick_a);
                     },
                     "emax");
  return {id, &t};
}

// log(x / (1 - x)) on values clamped into (eps, 1-eps).
template <typename S>
Var<S> logit(Var<S> a, S eps = S(1e-6)) {
  auto c = clamp(a, eps, S(1) - eps);
  auto& t = *a.tape;
  int id = t.emplace((c.val().array() / (S(1) - c.val().array())).log().matrix(),
                     [ic = c.id](Tape<S>& T, int self) {
                       const auto& x = T.val(ic).array();
                       T.grad(ic).array() += T.grad(self).array() / (x * (S(1) - x));
                     },
                     "logit");
  return {id, &t};
}

// ---- reductions ----

template <typename S>
Var<S> sum_all(Var<S> a) {
  auto& t = *a.tape;
  typename Tape<S>::Mat v(1, 1);
  v(0, 0) = t.val(a.id).sum();
  int id = t.emplace(std::move(v),
                     [ia = a.id](Tape<S>& T, int self) {
                       T.grad(ia).array() += T.grad(self)(0, 0);
                     },
                     "sum_all");
  return {id, &t};
}

template <typename S>
Var<S> mean_all(Var<S> a) {
  const S n = static_cast<S>(a.val().size());
  return scale(sum_all(a), S(1) / n);
}

// ---- row-wise layers ----

// Row-wise layer norm with affine parameters gamma/beta (1 x d each).
template <typename S>
Var<S> layer_norm(Var<S> x, Var<S> gamma, Var<S> beta, S eps = S(1e-5)) {
  auto& t = *x.tape;
  const auto& X = t.val(x.id);
  const Eigen::Index n = X.rows(), d = X.cols();
  typename Tape<S>::Mat xhat(n, d), v(n, d);
  Eigen::Matrix<S, Eigen::Dynamic, 1> inv_sigma(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const S mu = X.row(i).mean();
    const S var = (X.row(i).array() - mu).square().mean();
    const S is = S(1) / std::sqrt(var + eps);
    inv_sigma(i) = is;
    xhat.row(i) = ((X.row(i).array() - mu) * is).matrix();
    v.row(i) = (xhat.row(i).array() * t.val(gamma.id).row(0).array()).matrix() + t.val(beta.id).row(0);
  }
  int id = t.emplace(
      std::move(v),
      [ix = x.id, ig = gamma.id, ib = beta.id, xhat = std::move(xhat),
       inv_sigma = std::move(inv_sigma)](Tape<S>& T, int self) {
        const auto& g = T.grad(self);
        const Eigen::Index n = g.rows(), d = g.cols();
        for (Eigen::Index i = 0; i < n; ++i) {
          // dL/dx = (gy - mean(gy) - xhat * mean(gy * xhat)) / sigma, gy = g ⊙ gamma
          Eigen::Array<S, 1, Eigen::Dynamic> gy =
              g.row(i).array() * T.val(ig).row(0).array();
          const S m1 = gy.mean();
          const S m2 = (gy * xhat.row(i).array()).mean();
          T.grad(ix).row(i).array() +=
              (gy - m1 - xhat.row(i).array() * m2) * inv_sigma(i);
          T.grad(ig).row(0).array() += g.row(i).array() * xhat.row(i).array();
          T.grad(ib).row(0).array() += g.row(i).array();
          (void)d;
        }
      },
      "layer_norm");
  return {id, &t};
}

// Row-wise softmax over visible entries only. Invisible entries are
// never read in the forward pass and receive exactly zero output and
// zero gradient.
template <typename S>
Var<S> masked_softmax(Var<S> logits, const MaskMatrix& mask) {
  auto& t = *logits.tape;
  const auto& L = t.val(logits.id);
  if (L.rows() != mask.rows() || L.cols() != mask.cols()) {
    throw std::logic_error("masked_softmax: mask shape mismatch");
  }
  std::vector<std::vector<int>> visible(static_cast<std::size_t>(L.rows()));
  for (Eigen::Index i = 0; i < L.rows(); ++i) {
    for (Eigen::Index j = 0; j < L.cols(); ++j) {
      if (mask(i, j)) visible[static_cast<std::size_t>(i)].push_back(static_cast<int>(j));
    }
    if (visible[static_cast<std::size_t>(i)].empty()) {
      throw std::logic_error("masked_softmax: row with no visible entries");
    }
  }
  typename Tape<S>::Mat v = Tape<S>::Mat::Zero(L.rows(), L.cols());
  for (Eigen::Index i = 0; i < L.rows(); ++i) {
    const auto& vis = visible[static_cast<std::size_t>(i)];
    S mx = L(i, vis[0]);
    for (int j : vis) mx = std::max(mx, L(i, j));
    S denom = S(0);
    for (int j : vis) {
      const S e = std::exp(L(i, j) - mx);
      v(i, j) = e;
      denom += e;
    }
    for (int j : vis) v(i, j) /= denom;
  }
  int id = t.emplace(std::move(v),
                     [il = logits.id, visible = std::move(visible)](Tape<S>& T, int self) {
                       const auto& p = T.val(self);
                       const auto& g = T.grad(self);
                       for (Eigen::Index i = 0; i < p.rows(); ++i) {
                         const auto& vis = visible[static_cast<std::size_t>(i)];
                         S dot = S(0);
                         for (int j : vis) dot += p(i, j) * g(i, j);
                         for (int j : vis) T.grad(il)(i, j) += p(i, j) * (g(i, j) - dot);
                       }
                     },
                     "masked_softmax");
  return {id, &t};
}

// Dense row softmax (cross-attention: every key visible).
template <typename S>
Var<S> softmax_rows(Var<S> logits) {
  auto& t = *logits.tape;
  const auto& L = t.val(logits.id);
  typename Tape<S>::Mat v(L.rows(), L.cols());
  for (Eigen::Index i = 0; i < L.rows(); ++i) {
    const S mx = L.row(i).maxCoeff();
    Eigen::Array<S, 1, Eigen::Dynamic> e = (L.row(i).array() - mx).exp();
    v.row(i) = (e / e.sum()).matrix();
  }
  int id = t.emplace(std::move(v),
                     [il = logits.id](Tape<S>& T, int self) {
                       const auto& p = T.val(self);
                       const auto& g = T.grad(self);
                       for (Eigen::Index i = 0; i < p.rows(); ++i) {
                         const S dot = (p.row(i).array() * g.row(i).array()).sum();
                         T.grad(il).row(i).array() += p.row(i).array() * (g.row(i).array() - dot);
                       }
                     },
                     "softmax_rows");
  return {id, &t};
}

// Inverted dropout; identity when rate == 0.
template <typename S>
Var<S> dropout(Var<S> a, double rate, Rng& rng) {
  if (rate <= 0.0) return a;
  auto& t = *a.tape;
  const auto& A = t.val(a.id);
  typename Tape<S>::Mat keep(A.rows(), A.cols());
  const S inv = S(1.0 / (1.0 - rate));
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      keep(i, j) = bernoulli(rng, rate) ? S(0) : inv;
    }
  }
  typename Tape<S>::Mat v = (A.array() * keep.array()).matrix();
  int id = t.emplace(std::move(v),
                     [ia = a.id, keep = std::move(keep)](Tape<S>& T, int self) {
                       T.grad(ia).array() += T.grad(self).array() * keep.array();
                     },
                     "dropout");
  return {id, &t};
}

}  // namespace qtrack
