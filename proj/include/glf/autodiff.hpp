#pragma once

// Dense 2-D tensors with a single-use reverse-mode gradient tape.
//
// Every tensor is a rows x cols matrix of doubles (scalars are 1x1). A tensor
// is either detached (a plain immutable value) or linked to a node on a Tape.
// Operations on detached operands stay detached; if any operand is linked, the
// result is recorded on that operand's tape together with its adjoint rule.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace glf {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Raised when a forward operation produces NaN or Inf.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TapeError : std::logic_error {
  using std::logic_error::logic_error;
};

class Tape;

class Tensor {
 public:
  Tensor() : Tensor(Mat(0, 0)) {}
  explicit Tensor(Mat value) : value_(std::make_shared<const Mat>(std::move(value))) {}

  static Tensor scalar(double v) {
    Mat m(1, 1);
    m(0, 0) = v;
    return Tensor(std::move(m));
  }
  static Tensor zeros(Eigen::Index r, Eigen::Index c) { return Tensor(Mat::Zero(r, c)); }
  static Tensor ones(Eigen::Index r, Eigen::Index c) { return Tensor(Mat::Ones(r, c)); }

  const Mat& value() const { return *value_; }
  Eigen::Index rows() const { return value_->rows(); }
  Eigen::Index cols() const { return value_->cols(); }
  Eigen::Index size() const { return value_->size(); }
  bool is_scalar() const { return rows() == 1 && cols() == 1; }
  double item() const {
    if (!is_scalar()) throw ShapeError("item() on non-scalar tensor");
    return (*value_)(0, 0);
  }

  bool linked() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::size_t node() const { return node_; }

  std::string shape_string() const {
    return "(" + std::to_string(rows()) + "x" + std::to_string(cols()) + ")";
  }

 private:
  friend class Tape;
  Tensor(std::shared_ptr<const Mat> v, Tape* t, std::size_t n) : value_(std::move(v)), tape_(t), node_(n) {}

  std::shared_ptr<const Mat> value_;
  Tape* tape_ = nullptr;
  std::size_t node_ = 0;
};

// Append-only record of operations. Topological order is append order, so the
// backward sweep walks nodes in reverse exactly once.
class Tape {
 public:
  // Adjoint rule: given the output adjoint, accumulate into input adjoints.
  using Adjoint = std::function<void(const Mat& out_grad, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor leaf(Mat value) {
    check_open();
    auto v = std::make_shared<const Mat>(std::move(value));
    nodes_.push_back(Node{v->rows(), v->cols(), {}, nullptr, true});
    return Tensor(std::move(v), this, nodes_.size() - 1);
  }
  Tensor leaf(const Tensor& t) { return leaf(t.value()); }

  // Records a custom op. `adjoint` may be null for ops that carry no gradient.
  Tensor record(Mat value, Adjoint adjoint) {
    check_open();
    auto v = std::make_shared<const Mat>(std::move(value));
    nodes_.push_back(Node{v->rows(), v->cols(), {}, std::move(adjoint), false});
    return Tensor(std::move(v), this, nodes_.size() - 1);
  }

  // Accumulate `g` into the adjoint of tensor `t` (no-op for detached tensors).
  void accumulate(const Tensor& t, const Mat& g) {
    if (t.tape_ != this) return;
    Node& n = nodes_[t.node_];
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.rows, n.cols);
    n.grad += g;
  }

  void backward(const Tensor& loss) {
    if (consumed_) throw TapeError("backward called on a consumed tape");
    if (!loss.is_scalar()) throw ShapeError("backward requires a scalar loss, got " + loss.shape_string());
    if (loss.tape_ != this) throw TapeError("loss is not recorded on this tape");
    consumed_ = true;
    Mat seed(1, 1);
    seed(0, 0) = 1.0;
    accumulate(loss, seed);
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      Node& n = nodes_[i];
      if (n.is_leaf || !n.adjoint || n.grad.size() == 0) continue;
      const Mat g = n.grad;
      n.adjoint(g, *this);
      n.adjoint = nullptr;  // release captured operands
    }
  }

  // d(loss)/d(t); zero for tensors that did not participate.
  Mat grad(const Tensor& t) const {
    if (t.tape_ != this) throw TapeError("tensor is not recorded on this tape");
    if (!consumed_) throw TapeError("grad requested before backward");
    const Node& n = nodes_[t.node_];
    if (n.grad.size() == 0) return Mat::Zero(n.rows, n.cols);
    return n.grad;
  }

  bool consumed() const { return consumed_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Eigen::Index rows = 0, cols = 0;
    Mat grad;
    Adjoint adjoint;
    bool is_leaf = false;
  };

  void check_open() const {
    if (consumed_) throw TapeError("cannot record on a consumed tape");
  }

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

namespace detail {

inline void check_finite(const Mat& m, const char* op) {
  if (!m.allFinite()) throw NumericError(std::string("non-finite value produced by ") + op);
}

inline Tape* common_tape(std::initializer_list<const Tensor*> ts) {
  Tape* tape = nullptr;
  for (const Tensor* t : ts) {
    if (!t->linked()) continue;
    if (tape != nullptr && tape != t->tape()) throw TapeError("operands live on different tapes");
    tape = t->tape();
  }
  return tape;
}

inline Tensor make(Mat value, const char* op, std::initializer_list<const Tensor*> inputs, Tape::Adjoint adjoint) {
  check_finite(value, op);
  Tape* tape = common_tape(inputs);
  if (tape == nullptr) return Tensor(std::move(value));
  return tape->record(std::move(value), std::move(adjoint));
}

// Stop-gradient replay. While a recorder is active in Record mode, each
// stop_gradient output is stored in call order; in Replay mode the n-th call
// returns the n-th stored value instead of its input. Finite-difference checks
// use this to hold every stop-gradient quantity at its base-point value.
struct SgRecorder {
  enum class Mode { Record, Replay } mode = Mode::Record;
  std::vector<Mat> values;
  std::size_t cursor = 0;
};

inline thread_local SgRecorder* active_sg_recorder = nullptr;

}  // namespace detail

class StopGradientScope {
 public:
  enum class Mode { Record, Replay };

  StopGradientScope(detail::SgRecorder& rec, Mode mode) : rec_(rec), prev_(detail::active_sg_recorder) {
    rec_.mode = mode == Mode::Record ? detail::SgRecorder::Mode::Record : detail::SgRecorder::Mode::Replay;
    if (mode == Mode::Record) rec_.values.clear();
    rec_.cursor = 0;
    detail::active_sg_recorder = &rec_;
  }
  ~StopGradientScope() { detail::active_sg_recorder = prev_; }
  StopGradientScope(const StopGradientScope&) = delete;
  StopGradientScope& operator=(const StopGradientScope&) = delete;

 private:
  detail::SgRecorder& rec_;
  detail::SgRecorder* prev_;
};

// Forward value is the input, bit for bit; the result is detached so nothing
// upstream receives gradient through it.
inline Tensor stop_gradient(const Tensor& a) {
  detail::SgRecorder* rec = detail::active_sg_recorder;
  if (rec == nullptr) return Tensor(a.value());
  if (rec->mode == detail::SgRecorder::Mode::Record) {
    rec->values.push_back(a.value());
    return Tensor(a.value());
  }
  if (rec->cursor >= rec->values.size()) throw TapeError("stop_gradient replay out of sync");
  const Mat& v = rec->values[rec->cursor++];
  if (v.rows() != a.rows() || v.cols() != a.cols()) throw TapeError("stop_gradient replay shape mismatch");
  return Tensor(v);
}

// ---------------------------------------------------------------------------
// Elementwise

namespace detail {

inline void require_same_or_scalar(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return;
  if (a.is_scalar() || b.is_scalar()) return;
  throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
}

// Expand a scalar operand to the target shape.
inline Mat expand(const Tensor& t, Eigen::Index r, Eigen::Index c) {
  if (t.rows() == r && t.cols() == c) return t.value();
  return Mat::Constant(r, c, t.item());
}

// Reduce an adjoint back to the operand's shape (sum for scalar broadcast).
inline Mat reduce_to(const Tensor& t, const Mat& g) {
  if (t.rows() == g.rows() && t.cols() == g.cols()) return g;
  Mat s(1, 1);
  s(0, 0) = g.sum();
  return s;
}

inline std::pair<Eigen::Index, Eigen::Index> out_shape(const Tensor& a, const Tensor& b) {
  if (a.is_scalar() && !b.is_scalar()) return {b.rows(), b.cols()};
  return {a.rows(), a.cols()};
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_or_scalar(a, b, "add");
  auto [r, c] = detail::out_shape(a, b);
  Mat out = detail::expand(a, r, c) + detail::expand(b, r, c);
  return detail::make(std::move(out), "add", {&a, &b}, [a, b](const Mat& g, Tape& t) {
    t.accumulate(a, detail::reduce_to(a, g));
    t.accumulate(b, detail::reduce_to(b, g));
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_or_scalar(a, b, "sub");
  auto [r, c] = detail::out_shape(a, b);
  Mat out = detail::expand(a, r, c) - detail::expand(b, r, c);
  return detail::make(std::move(out), "sub", {&a, &b}, [a, b](const Mat& g, Tape& t) {
    t.accumulate(a, detail::reduce_to(a, g));
    t.accumulate(b, detail::reduce_to(b, Mat(-g)));
  });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_or_scalar(a, b, "mul");
  auto [r, c] = detail::out_shape(a, b);
  Mat av = detail::expand(a, r, c), bv = detail::expand(b, r, c);
  Mat out = av.cwiseProduct(bv);
  return detail::make(std::move(out), "mul", {&a, &b}, [a, b, av, bv](const Mat& g, Tape& t) {
    if (a.linked()) t.accumulate(a, detail::reduce_to(a, Mat(g.cwiseProduct(bv))));
    if (b.linked()) t.accumulate(b, detail::reduce_to(b, Mat(g.cwiseProduct(av))));
  });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
  detail::require_same_or_scalar(a, b, "div");
  auto [r, c] = detail::out_shape(a, b);
  Mat av = detail::expand(a, r, c), bv = detail::expand(b, r, c);
  if ((bv.array() == 0.0).any()) throw DomainError("div: division by zero");
  Mat out = av.cwiseQuotient(bv);
  return detail::make(std::move(out), "div", {&a, &b}, [a, b, av, bv](const Mat& g, Tape& t) {
    if (a.linked()) t.accumulate(a, detail::reduce_to(a, Mat(g.cwiseQuotient(bv))));
    if (b.linked()) {
      Mat gb = -(g.array() * av.array() / (bv.array() * bv.array())).matrix();
      t.accumulate(b, detail::reduce_to(b, gb));
    }
  });
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double s) { return add(a, Tensor::scalar(s)); }
inline Tensor operator-(const Tensor& a, double s) { return sub(a, Tensor::scalar(s)); }
inline Tensor operator*(const Tensor& a, double s) { return mul(a, Tensor::scalar(s)); }
inline Tensor operator*(double s, const Tensor& a) { return mul(Tensor::scalar(s), a); }
inline Tensor operator/(const Tensor& a, double s) { return div(a, Tensor::scalar(s)); }

inline Tensor negate(const Tensor& a) {
  Mat out = -a.value();
  return detail::make(std::move(out), "negate", {&a}, [a](const Mat& g, Tape& t) { t.accumulate(a, Mat(-g)); });
}
inline Tensor operator-(const Tensor& a) { return negate(a); }

inline Tensor exp(const Tensor& a) {
  Mat out = a.value().array().exp().matrix();
  Mat y = out;
  return detail::make(std::move(out), "exp", {&a},
                      [a, y](const Mat& g, Tape& t) { t.accumulate(a, Mat(g.cwiseProduct(y))); });
}

inline Tensor log(const Tensor& a) {
  if ((a.value().array() <= 0.0).any()) throw DomainError("log of non-positive value");
  Mat out = a.value().array().log().matrix();
  return detail::make(std::move(out), "log", {&a},
                      [a](const Mat& g, Tape& t) { t.accumulate(a, Mat(g.cwiseQuotient(a.value()))); });
}

inline Tensor sqrt(const Tensor& a) {
  if ((a.value().array() <= 0.0).any()) throw DomainError("sqrt of non-positive value");
  Mat out = a.value().array().sqrt().matrix();
  Mat y = out;
  return detail::make(std::move(out), "sqrt", {&a}, [a, y](const Mat& g, Tape& t) {
    t.accumulate(a, Mat((0.5 * g.array() / y.array()).matrix()));
  });
}

inline Tensor pow(const Tensor& a, double p) {
  if (p != std::floor(p) && (a.value().array() < 0.0).any()) throw DomainError("pow: negative base with fractional exponent");
  Mat out = a.value().array().pow(p).matrix();
  return detail::make(std::move(out), "pow", {&a}, [a, p](const Mat& g, Tape& t) {
    t.accumulate(a, Mat((g.array() * p * a.value().array().pow(p - 1.0)).matrix()));
  });
}

inline Tensor square(const Tensor& a) { return mul(a, a); }

inline Tensor relu(const Tensor& a) {
  Mat out = a.value().cwiseMax(0.0);
  return detail::make(std::move(out), "relu", {&a}, [a](const Mat& g, Tape& t) {
    t.accumulate(a, Mat((a.value().array() > 0.0).select(g.array(), 0.0).matrix()));
  });
}

inline Tensor tanh(const Tensor& a) {
  Mat out = a.value().array().tanh().matrix();
  Mat y = out;
  return detail::make(std::move(out), "tanh", {&a}, [a, y](const Mat& g, Tape& t) {
    t.accumulate(a, Mat((g.array() * (1.0 - y.array().square())).matrix()));
  });
}

// max(a, floor); gradient passes only where a > floor.
inline Tensor clamp_min(const Tensor& a, double floor) {
  Mat out = a.value().cwiseMax(floor);
  return detail::make(std::move(out), "clamp_min", {&a}, [a, floor](const Mat& g, Tape& t) {
    t.accumulate(a, Mat((a.value().array() > floor).select(g.array(), 0.0).matrix()));
  });
}

// ---------------------------------------------------------------------------
// Reductions and linear algebra

inline Tensor sum(const Tensor& a) {
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  return detail::make(std::move(out), "sum", {&a}, [a](const Mat& g, Tape& t) {
    t.accumulate(a, Mat::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

inline Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean of empty tensor");
  return sum(a) / static_cast<double>(a.size());
}

// Sum over columns: (r x c) -> (r x 1).
inline Tensor row_sum(const Tensor& a) {
  Mat out = a.value().rowwise().sum();
  return detail::make(std::move(out), "row_sum", {&a}, [a](const Mat& g, Tape& t) {
    t.accumulate(a, Mat(g.col(0).replicate(1, a.cols())));
  });
}

// Sum over rows: (r x c) -> (1 x c).
inline Tensor col_sum(const Tensor& a) {
  Mat out = a.value().colwise().sum();
  return detail::make(std::move(out), "col_sum", {&a}, [a](const Mat& g, Tape& t) {
    t.accumulate(a, Mat(g.row(0).replicate(a.rows(), 1)));
  });
}

// Repeat a (1 x c) row vector to (rows x c).
inline Tensor broadcast_rows(const Tensor& v, Eigen::Index rows) {
  if (v.rows() != 1) throw ShapeError("broadcast_rows expects a row vector, got " + v.shape_string());
  Mat out = v.value().replicate(rows, 1);
  return detail::make(std::move(out), "broadcast_rows", {&v},
                      [v](const Mat& g, Tape& t) { t.accumulate(v, Mat(g.colwise().sum())); });
}

// Repeat an (r x 1) column vector to (r x cols).
inline Tensor broadcast_cols(const Tensor& v, Eigen::Index cols) {
  if (v.cols() != 1) throw ShapeError("broadcast_cols expects a column vector, got " + v.shape_string());
  Mat out = v.value().replicate(1, cols);
  return detail::make(std::move(out), "broadcast_cols", {&v},
                      [v](const Mat& g, Tape& t) { t.accumulate(v, Mat(g.rowwise().sum())); });
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: non-conformable " + a.shape_string() + " x " + b.shape_string());
  Mat out = a.value() * b.value();
  return detail::make(std::move(out), "matmul", {&a, &b}, [a, b](const Mat& g, Tape& t) {
    if (a.linked()) t.accumulate(a, Mat(g * b.value().transpose()));
    if (b.linked()) t.accumulate(b, Mat(a.value().transpose() * g));
  });
}

inline Tensor transpose(const Tensor& a) {
  Mat out = a.value().transpose();
  return detail::make(std::move(out), "transpose", {&a},
                      [a](const Mat& g, Tape& t) { t.accumulate(a, Mat(g.transpose())); });
}

// Stack along rows (axis 0) or columns (axis 1).
inline Tensor concat(const std::vector<Tensor>& parts, int axis = 0) {
  if (parts.empty()) throw ShapeError("concat of nothing");
  Eigen::Index r = 0, c = 0;
  for (const auto& p : parts) {
    if (axis == 0) {
      if (p.cols() != parts.front().cols()) throw ShapeError("concat: column mismatch");
      r += p.rows();
    } else {
      if (p.rows() != parts.front().rows()) throw ShapeError("concat: row mismatch");
      c += p.cols();
    }
  }
  if (axis == 0) c = parts.front().cols();
  else r = parts.front().rows();
  Mat out(r, c);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    if (axis == 0) {
      out.middleRows(off, p.rows()) = p.value();
      off += p.rows();
    } else {
      out.middleCols(off, p.cols()) = p.value();
      off += p.cols();
    }
  }
  Tape* tape = nullptr;
  for (const auto& p : parts) {
    if (p.linked()) {
      if (tape != nullptr && tape != p.tape()) throw TapeError("operands live on different tapes");
      tape = p.tape();
    }
  }
  detail::check_finite(out, "concat");
  if (tape == nullptr) return Tensor(std::move(out));
  return tape->record(std::move(out), [parts, axis](const Mat& g, Tape& t) {
    Eigen::Index o = 0;
    for (const auto& p : parts) {
      if (axis == 0) {
        t.accumulate(p, Mat(g.middleRows(o, p.rows())));
        o += p.rows();
      } else {
        t.accumulate(p, Mat(g.middleCols(o, p.cols())));
        o += p.cols();
      }
    }
  });
}

// Rectangular block [r0, r0+nr) x [c0, c0+nc).
inline Tensor slice(const Tensor& a, Eigen::Index r0, Eigen::Index nr, Eigen::Index c0, Eigen::Index nc) {
  if (r0 < 0 || c0 < 0 || nr < 0 || nc < 0 || r0 + nr > a.rows() || c0 + nc > a.cols())
    throw ShapeError("slice out of range on " + a.shape_string());
  Mat out = a.value().block(r0, c0, nr, nc);
  return detail::make(std::move(out), "slice", {&a}, [a, r0, nr, c0, nc](const Mat& g, Tape& t) {
    Mat full = Mat::Zero(a.rows(), a.cols());
    full.block(r0, c0, nr, nc) = g;
    t.accumulate(a, full);
  });
}

inline Tensor slice_rows(const Tensor& a, Eigen::Index r0, Eigen::Index nr) { return slice(a, r0, nr, 0, a.cols()); }

// Max-shifted log(sum(exp(a))) over all entries.
inline Tensor log_sum_exp(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("log_sum_exp of empty tensor");
  const double m = a.value().maxCoeff();
  const double s = (a.value().array() - m).exp().sum();
  Mat out(1, 1);
  out(0, 0) = m + std::log(s);
  const double lse = out(0, 0);
  return detail::make(std::move(out), "log_sum_exp", {&a}, [a, lse](const Mat& g, Tape& t) {
    t.accumulate(a, Mat((g(0, 0) * (a.value().array() - lse).exp()).matrix()));
  });
}

// Row-wise log-softmax. With exclude_diagonal (square input), entry (i, i) is
// left out of row i's normalization and reported as 0 in the output.
inline Tensor log_softmax_rows(const Tensor& a, bool exclude_diagonal = false) {
  if (exclude_diagonal && a.rows() != a.cols()) throw ShapeError("log_softmax_rows: diagonal exclusion needs a square input");
  if (exclude_diagonal && a.cols() < 2) throw ShapeError("log_softmax_rows: no off-diagonal entries");
  const Mat& x = a.value();
  Mat out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (!(exclude_diagonal && i == j)) m = std::max(m, x(i, j));
    double s = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (!(exclude_diagonal && i == j)) s += std::exp(x(i, j) - m);
    const double lse = m + std::log(s);
    for (Eigen::Index j = 0; j < x.cols(); ++j) out(i, j) = (exclude_diagonal && i == j) ? 0.0 : x(i, j) - lse;
  }
  Mat y = out;
  return detail::make(std::move(out), "log_softmax_rows", {&a}, [a, y, exclude_diagonal](const Mat& g, Tape& t) {
    Mat ga(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      double gs = 0.0;
      for (Eigen::Index j = 0; j < y.cols(); ++j)
        if (!(exclude_diagonal && i == j)) gs += g(i, j);
      for (Eigen::Index j = 0; j < y.cols(); ++j)
        ga(i, j) = (exclude_diagonal && i == j) ? 0.0 : g(i, j) - std::exp(y(i, j)) * gs;
    }
    t.accumulate(a, ga);
  });
}

// Squared Euclidean distances between all row pairs: (n x d) -> (n x n).
inline Tensor pairwise_sq_dists(const Tensor& a) {
  const Mat& x = a.value();
  const Eigen::Index n = x.rows();
  Vec sq = x.rowwise().squaredNorm();
  Mat gram = x * x.transpose();
  Mat out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) out(i, j) = i == j ? 0.0 : std::max(0.0, sq(i) + sq(j) - 2.0 * gram(i, j));
  return detail::make(std::move(out), "pairwise_sq_dists", {&a}, [a](const Mat& g, Tape& t) {
    // d/dx_i sum_ij g_ij |x_i - x_j|^2 = 2 sum_j (g_ij + g_ji)(x_i - x_j)
    Mat gs = g + g.transpose();
    gs.diagonal().setZero();
    Vec w = gs.rowwise().sum();
    Mat ga = 2.0 * (w.asDiagonal() * a.value() - gs * a.value());
    t.accumulate(a, ga);
  });
}

// Rows `anchors[k]` of a square matrix with column anchors[k] removed:
// (n x n) -> (|anchors| x n-1).
inline Tensor gather_offdiag(const Tensor& a, const std::vector<std::size_t>& anchors) {
  if (a.rows() != a.cols()) throw ShapeError("gather_offdiag expects a square input");
  const Eigen::Index n = a.rows();
  Mat out(static_cast<Eigen::Index>(anchors.size()), n - 1);
  for (std::size_t k = 0; k < anchors.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(anchors[k]);
    if (i >= n) throw ShapeError("gather_offdiag: anchor out of range");
    Eigen::Index c = 0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) out(static_cast<Eigen::Index>(k), c++) = a.value()(i, j);
  }
  return detail::make(std::move(out), "gather_offdiag", {&a}, [a, anchors, n](const Mat& g, Tape& t) {
    Mat ga = Mat::Zero(n, n);
    for (std::size_t k = 0; k < anchors.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(anchors[k]);
      Eigen::Index c = 0;
      for (Eigen::Index j = 0; j < n; ++j)
        if (j != i) ga(i, j) += g(static_cast<Eigen::Index>(k), c++);
    }
    t.accumulate(a, ga);
  });
}

// Divides every row by its Euclidean norm.
inline Tensor l2_normalize_rows(const Tensor& a) {
  Vec norms = a.value().rowwise().norm();
  if ((norms.array() == 0.0).any()) throw DomainError("l2_normalize_rows: zero-norm row");
  Mat out = norms.cwiseInverse().asDiagonal() * a.value();
  Mat y = out;
  return detail::make(std::move(out), "l2_normalize_rows", {&a}, [a, y, norms](const Mat& g, Tape& t) {
    // (g - y (y . g)) / |x| per row
    Vec dots = (g.cwiseProduct(y)).rowwise().sum();
    Mat ga = norms.cwiseInverse().asDiagonal() * (g - dots.asDiagonal() * y);
    t.accumulate(a, ga);
  });
}

// ---------------------------------------------------------------------------
// Gradient checking

struct GradCheckResult {
  double max_rel_error = 0.0;
  Mat analytic;
  Mat numeric;
};

using ScalarFn = std::function<Tensor(const Tensor&)>;

// Compares the tape gradient of f at x against central differences, with every
// stop_gradient output held at its value at x. Error per coordinate is
// |analytic - central| / max(1, |central|).
inline GradCheckResult finite_difference_check(const ScalarFn& f, const Mat& x, double h = 1e-5) {
  detail::SgRecorder rec;
  GradCheckResult res;
  {
    StopGradientScope scope(rec, StopGradientScope::Mode::Record);
    Tape tape;
    Tensor leaf = tape.leaf(x);
    Tensor loss = f(leaf);
    if (!std::isfinite(loss.item())) throw NumericError("finite_difference_check: non-finite loss");
    if (!loss.linked()) {
      res.analytic = Mat::Zero(x.rows(), x.cols());
    } else {
      tape.backward(loss);
      res.analytic = tape.grad(leaf);
    }
  }
  res.numeric = Mat::Zero(x.rows(), x.cols());
  Mat xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = xp.data()[i];
    auto eval = [&](double v) {
      xp.data()[i] = v;
      StopGradientScope scope(rec, StopGradientScope::Mode::Replay);
      const double y = f(Tensor(xp)).item();
      if (!std::isfinite(y)) throw NumericError("finite_difference_check: non-finite loss");
      return y;
    };
    const double up = eval(orig + h);
    const double dn = eval(orig - h);
    xp.data()[i] = orig;
    res.numeric.data()[i] = (up - dn) / (2.0 * h);
  }
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double c = res.numeric.data()[i];
    const double e = std::abs(res.analytic.data()[i] - c) / std::max(1.0, std::abs(c));
    res.max_rel_error = std::max(res.max_rel_error, e);
  }
  return res;
}

}  // namespace glf
