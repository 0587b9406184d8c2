#include "hge/tape.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace hge {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using CVecMap = Eigen::Map<const Eigen::VectorXd>;

CMatMap mat(const Tensor& t) { return CMatMap(t.data(), t.rows(), t.cols()); }
MatMap mat(Tensor& t) { return MatMap(t.data(), t.rows(), t.cols()); }
CVecMap vec(const Tensor& t) { return CVecMap(t.data(), t.size()); }
VecMap vec(Tensor& t) { return VecMap(t.data(), t.size()); }

void softmax_row(const double* x, double* y, int n) {
  double m = x[0];
  for (int i = 1; i < n; ++i) m = std::max(m, x[i]);
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    y[i] = std::exp(x[i] - m);
    z += y[i];
  }
  for (int i = 0; i < n; ++i) y[i] /= z;
}

double lrelu_fwd(double x, double slope) { return x >= 0.0 ? x : slope * x; }
double lrelu_bwd(double x, double slope) { return x >= 0.0 ? 1.0 : slope; }

}  // namespace

Var Tape::leaf(const Tensor* external) {
  if (!external->all_finite()) throw NumericError("leaf tensor contains NaN/Inf");
  Slot s;
  s.ext = external;
  s.needs_grad = true;
  slots_.push_back(std::move(s));
  return {static_cast<int>(slots_.size()) - 1};
}

Var Tape::constant(Tensor v) {
  if (!v.all_finite()) throw NumericError("constant tensor contains NaN/Inf");
  Slot s;
  s.owned = std::move(v);
  slots_.push_back(std::move(s));
  return {static_cast<int>(slots_.size()) - 1};
}

Var Tape::constant_ref(const Tensor* external) {
  if (!external->all_finite()) throw NumericError("constant tensor contains NaN/Inf");
  Slot s;
  s.ext = external;
  slots_.push_back(std::move(s));
  return {static_cast<int>(slots_.size()) - 1};
}

const Tensor& Tape::val(Var v) const {
  const Slot& s = slots_[v.id];
  return s.ext ? *s.ext : s.owned;
}

const Tensor& Tape::grad(Var v) {
  return grad_buf(v);
}

bool Tape::requires_grad(Var v) const { return slots_[v.id].needs_grad; }

Var Tape::push(Tensor value, bool needs_grad, const char* opname) {
  if (!value.all_finite()) throw NumericError(std::string(opname) + ": non-finite result");
  Slot s;
  s.owned = std::move(value);
  s.needs_grad = needs_grad;
  slots_.push_back(std::move(s));
  return {static_cast<int>(slots_.size()) - 1};
}

Tensor& Tape::grad_buf(Var v) {
  Slot& s = slots_[v.id];
  if (s.grad.empty() && val(v).size() > 0) s.grad = Tensor::zeros(val(v).shape());
  return s.grad;
}

void Tape::accum(Var v, const Tensor& g) {
  if (!slots_[v.id].needs_grad) return;
  Tensor& buf = grad_buf(v);
  vec(buf) += vec(g);
}

Var Tape::add(Var a, Var b) {
  const Tensor& x = val(a);
  const Tensor& y = val(b);
  if (!x.same_shape(y)) throw shape_error("add", x, y);
  Tensor out = x;
  vec(out) += vec(y);
  bool ng = requires_grad(a) || requires_grad(b);
  Var o = push(std::move(out), ng, "add");
  if (ng)
    records_.push_back([this, a, b, o] {
      accum(a, grad_buf(o));
      accum(b, grad_buf(o));
    });
  return o;
}

Var Tape::sub(Var a, Var b) {
  const Tensor& x = val(a);
  const Tensor& y = val(b);
  if (!x.same_shape(y)) throw shape_error("sub", x, y);
  Tensor out = x;
  vec(out) -= vec(y);
  bool ng = requires_grad(a) || requires_grad(b);
  Var o = push(std::move(out), ng, "sub");
  if (ng)
    records_.push_back([this, a, b, o] {
      accum(a, grad_buf(o));
      if (requires_grad(b)) vec(grad_buf(b)) -= vec(grad_buf(o));
    });
  return o;
}

Var Tape::mul(Var a, Var b) {
  const Tensor& x = val(a);
  const Tensor& y = val(b);
  if (!x.same_shape(y)) throw shape_error("mul", x, y);
  Tensor out = x;
  vec(out).array() *= vec(y).array();
  bool ng = requires_grad(a) || requires_grad(b);
  Var o = push(std::move(out), ng, "mul");
  if (ng)
    records_.push_back([this, a, b, o] {
      const Tensor& g = grad_buf(o);
      if (requires_grad(a)) {
        Tensor ga = g;
        vec(ga).array() *= vec(val(b)).array();
        accum(a, ga);
      }
      if (requires_grad(b)) {
        Tensor gb = g;
        vec(gb).array() *= vec(val(a)).array();
        accum(b, gb);
      }
    });
  return o;
}

Var Tape::affine(Var a, double k, double b) {
  Tensor out = val(a);
  vec(out) = k * vec(out).array() + b;
  bool ng = requires_grad(a);
  Var o = push(std::move(out), ng, "affine");
  if (ng)
    records_.push_back([this, a, o, k] {
      const Tensor& g = grad_buf(o);
      Tensor ga = g;
      vec(ga) *= k;
      accum(a, ga);
    });
  return o;
}

Var Tape::add_broadcast(Var v, Var s) {
  const Tensor& x = val(v);
  const Tensor& sv = val(s);
  if (sv.size() != 1) throw shape_error("add_broadcast", x, sv);
  Tensor out = x;
  vec(out).array() += sv.item();
  bool ng = requires_grad(v) || requires_grad(s);
  Var o = push(std::move(out), ng, "add_broadcast");
  if (ng)
    records_.push_back([this, v, s, o] {
      const Tensor& g = grad_buf(o);
      accum(v, g);
      if (requires_grad(s)) grad_buf(s)[0] += vec(g).sum();
    });
  return o;
}

Var Tape::add_rowvec(Var m, Var v) {
  const Tensor& x = val(m);
  const Tensor& r = val(v);
  if (x.rank() != 2 || r.rank() != 1 || x.cols() != r.shape()[0])
    throw shape_error("add_rowvec", x, r);
  Tensor out = x;
  mat(out).rowwise() += vec(r).transpose();
  bool ng = requires_grad(m) || requires_grad(v);
  Var o = push(std::move(out), ng, "add_rowvec");
  if (ng)
    records_.push_back([this, m, v, o] {
      const Tensor& g = grad_buf(o);
      accum(m, g);
      if (requires_grad(v)) vec(grad_buf(v)) += mat(g).colwise().sum().transpose();
    });
  return o;
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& x = val(a);
  const Tensor& y = val(b);
  if (x.rank() != 2) throw shape_error("matmul", x, y);
  Tensor out;
  if (y.rank() == 2) {
    if (x.cols() != y.rows()) throw shape_error("matmul", x, y);
    out = Tensor::zeros({x.rows(), y.cols()});
    mat(out).noalias() = mat(x) * mat(y);
  } else if (y.rank() == 1) {
    if (x.cols() != y.rows()) throw shape_error("matmul", x, y);
    out = Tensor::zeros({x.rows()});
    vec(out).noalias() = mat(x) * vec(y);
  } else {
    throw shape_error("matmul", x, y);
  }
  bool ng = requires_grad(a) || requires_grad(b);
  Var o = push(std::move(out), ng, "matmul");
  if (ng)
    records_.push_back([this, a, b, o] {
      const Tensor& g = grad_buf(o);
      const Tensor& x = val(a);
      const Tensor& y = val(b);
      if (y.rank() == 2) {
        if (requires_grad(a)) mat(grad_buf(a)).noalias() += mat(g) * mat(y).transpose();
        if (requires_grad(b)) mat(grad_buf(b)).noalias() += mat(x).transpose() * mat(g);
      } else {
        if (requires_grad(a)) mat(grad_buf(a)).noalias() += vec(g) * vec(y).transpose();
        if (requires_grad(b)) vec(grad_buf(b)).noalias() += mat(x).transpose() * vec(g);
      }
    });
  return o;
}

Var Tape::matmul_nt(Var a, Var b) {
  const Tensor& x = val(a);
  const Tensor& y = val(b);
  if (x.rank() != 2 || y.rank() != 2 || x.cols() != y.cols()) throw shape_error("matmul_nt", x, y);
  Tensor out = Tensor::zeros({x.rows(), y.rows()});
  mat(out).noalias() = mat(x) * mat(y).transpose();
  bool ng = requires_grad(a) || requires_grad(b);
  Var o = push(std::move(out), ng, "matmul_nt");
  if (ng)
    records_.push_back([this, a, b, o] {
      const Tensor& g = grad_buf(o);
      if (requires_grad(a)) mat(grad_buf(a)).noalias() += mat(g) * mat(val(b));
      if (requires_grad(b)) mat(grad_buf(b)).noalias() += mat(g).transpose() * mat(val(a));
    });
  return o;
}

Var Tape::vecmat(Var w, Var m) {
  const Tensor& x = val(w);
  const Tensor& y = val(m);
  if (x.rank() != 1 || y.rank() != 2 || x.shape()[0] != y.rows()) throw shape_error("vecmat", x, y);
  Tensor out = Tensor::zeros({y.cols()});
  vec(out).noalias() = mat(y).transpose() * vec(x);
  bool ng = requires_grad(w) || requires_grad(m);
  Var o = push(std::move(out), ng, "vecmat");
  if (ng)
    records_.push_back([this, w, m, o] {
      const Tensor& g = grad_buf(o);
      if (requires_grad(w)) vec(grad_buf(w)).noalias() += mat(val(m)) * vec(g);
      if (requires_grad(m)) mat(grad_buf(m)).noalias() += vec(val(w)) * vec(g).transpose();
    });
  return o;
}

Var Tape::dot(Var a, Var b) {
  const Tensor& x = val(a);
  const Tensor& y = val(b);
  if (x.rank() != 1 || !x.same_shape(y)) throw shape_error("dot", x, y);
  Tensor out = Tensor::scalar(vec(x).dot(vec(y)));
  bool ng = requires_grad(a) || requires_grad(b);
  Var o = push(std::move(out), ng, "dot");
  if (ng)
    records_.push_back([this, a, b, o] {
      double g = grad_buf(o)[0];
      if (requires_grad(a)) vec(grad_buf(a)) += g * vec(val(b));
      if (requires_grad(b)) vec(grad_buf(b)) += g * vec(val(a));
    });
  return o;
}

Var Tape::row_dot(Var a, Var b) {
  const Tensor& x = val(a);
  const Tensor& y = val(b);
  if (x.rank() != 2 || !x.same_shape(y)) throw shape_error("row_dot", x, y);
  Tensor out = Tensor::zeros({x.rows()});
  for (int i = 0; i < x.rows(); ++i)
    out[i] = mat(x).row(i).dot(mat(y).row(i));
  bool ng = requires_grad(a) || requires_grad(b);
  Var o = push(std::move(out), ng, "row_dot");
  if (ng)
    records_.push_back([this, a, b, o] {
      const Tensor& g = grad_buf(o);
      if (requires_grad(a)) {
        Tensor& ga = grad_buf(a);
        for (int i = 0; i < ga.rows(); ++i) mat(ga).row(i) += g[i] * mat(val(b)).row(i);
      }
      if (requires_grad(b)) {
        Tensor& gb = grad_buf(b);
        for (int i = 0; i < gb.rows(); ++i) mat(gb).row(i) += g[i] * mat(val(a)).row(i);
      }
    });
  return o;
}

Var Tape::concat(Var a, Var b) {
  const Tensor& x = val(a);
  const Tensor& y = val(b);
  if (x.rank() != 1 || y.rank() != 1) throw shape_error("concat", x, y);
  Tensor out = Tensor::zeros({static_cast<int>(x.size() + y.size())});
  std::copy(x.data(), x.data() + x.size(), out.data());
  std::copy(y.data(), y.data() + y.size(), out.data() + x.size());
  bool ng = requires_grad(a) || requires_grad(b);
  Var o = push(std::move(out), ng, "concat");
  if (ng)
    records_.push_back([this, a, b, o] {
      const Tensor& g = grad_buf(o);
      std::int64_t na = val(a).size();
      if (requires_grad(a)) {
        Tensor& ga = grad_buf(a);
        for (std::int64_t i = 0; i < na; ++i) ga[i] += g[i];
      }
      if (requires_grad(b)) {
        Tensor& gb = grad_buf(b);
        for (std::int64_t i = 0; i < val(b).size(); ++i) gb[i] += g[na + i];
      }
    });
  return o;
}

Var Tape::concat_cols(Var a, Var b) {
  const Tensor& x = val(a);
  const Tensor& y = val(b);
  if (x.rank() != 2 || y.rank() != 2 || x.rows() != y.rows())
    throw shape_error("concat_cols", x, y);
  int n = x.rows(), ca = x.cols(), cb = y.cols();
  Tensor out = Tensor::zeros({n, ca + cb});
  mat(out).leftCols(ca) = mat(x);
  mat(out).rightCols(cb) = mat(y);
  bool ng = requires_grad(a) || requires_grad(b);
  Var o = push(std::move(out), ng, "concat_cols");
  if (ng)
    records_.push_back([this, a, b, o, ca, cb] {
      const Tensor& g = grad_buf(o);
      if (requires_grad(a)) mat(grad_buf(a)) += mat(g).leftCols(ca);
      if (requires_grad(b)) mat(grad_buf(b)) += mat(g).rightCols(cb);
    });
  return o;
}

Var Tape::gather_rows(Var a, std::vector<int> rows) {
  const Tensor& x = val(a);
  if (x.rank() != 2) throw DimensionError("gather_rows: need rank-2, got " + shape_str(x.shape()));
  int d = x.cols();
  Tensor out = Tensor::zeros({static_cast<int>(rows.size()), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= x.rows())
      throw ReferenceError("gather_rows: row index out of range");
    mat(out).row(static_cast<int>(i)) = mat(x).row(rows[i]);
  }
  bool ng = requires_grad(a);
  Var o = push(std::move(out), ng, "gather_rows");
  if (ng)
    records_.push_back([this, a, o, rows = std::move(rows)] {
      const Tensor& g = grad_buf(o);
      Tensor& ga = grad_buf(a);
      for (std::size_t i = 0; i < rows.size(); ++i)
        mat(ga).row(rows[i]) += mat(g).row(static_cast<int>(i));
    });
  return o;
}

Var Tape::slice_vec(Var a, int start, int len) {
  const Tensor& x = val(a);
  if (x.rank() != 1 || start < 0 || start + len > x.shape()[0])
    throw DimensionError("slice_vec: [" + std::to_string(start) + "," +
                         std::to_string(start + len) + ") out of " + shape_str(x.shape()));
  Tensor out = Tensor::zeros({len});
  std::copy(x.data() + start, x.data() + start + len, out.data());
  bool ng = requires_grad(a);
  Var o = push(std::move(out), ng, "slice_vec");
  if (ng)
    records_.push_back([this, a, o, start, len] {
      const Tensor& g = grad_buf(o);
      Tensor& ga = grad_buf(a);
      for (int i = 0; i < len; ++i) ga[start + i] += g[i];
    });
  return o;
}

Var Tape::sum(Var a) {
  Tensor out = Tensor::scalar(vec(val(a)).sum());
  bool ng = requires_grad(a);
  Var o = push(std::move(out), ng, "sum");
  if (ng)
    records_.push_back([this, a, o] {
      double g = grad_buf(o)[0];
      vec(grad_buf(a)).array() += g;
    });
  return o;
}

Var Tape::mean(Var a) {
  std::int64_t n = val(a).size();
  if (n == 0) throw ContractError("mean of empty tensor");
  Tensor out = Tensor::scalar(vec(val(a)).sum() / static_cast<double>(n));
  bool ng = requires_grad(a);
  Var o = push(std::move(out), ng, "mean");
  if (ng)
    records_.push_back([this, a, o, n] {
      double g = grad_buf(o)[0] / static_cast<double>(n);
      vec(grad_buf(a)).array() += g;
    });
  return o;
}

Var Tape::average(const std::vector<Var>& xs) {
  if (xs.empty()) throw ContractError("average of no tensors");
  Tensor out = val(xs[0]);
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (!out.same_shape(val(xs[i]))) throw shape_error("average", out, val(xs[i]));
    vec(out) += vec(val(xs[i]));
  }
  double inv = 1.0 / static_cast<double>(xs.size());
  vec(out) *= inv;
  bool ng = false;
  for (Var v : xs) ng = ng || requires_grad(v);
  Var o = push(std::move(out), ng, "average");
  if (ng)
    records_.push_back([this, xs, o, inv] {
      Tensor g = grad_buf(o);
      vec(g) *= inv;
      for (Var v : xs) accum(v, g);
    });
  return o;
}

Var Tape::softmax(Var a) {
  const Tensor& x = val(a);
  Tensor out;
  if (x.rank() == 1) {
    out = Tensor::zeros(x.shape());
    softmax_row(x.data(), out.data(), static_cast<int>(x.size()));
  } else if (x.rank() == 2) {
    out = Tensor::zeros(x.shape());
    for (int i = 0; i < x.rows(); ++i)
      softmax_row(x.data() + static_cast<std::int64_t>(i) * x.cols(),
                  out.data() + static_cast<std::int64_t>(i) * x.cols(), x.cols());
  } else {
    throw DimensionError("softmax: need rank 1 or 2, got " + shape_str(x.shape()));
  }
  bool ng = requires_grad(a);
  Var o = push(std::move(out), ng, "softmax");
  if (ng)
    records_.push_back([this, a, o] {
      const Tensor& y = val(o);
      const Tensor& g = grad_buf(o);
      Tensor& ga = grad_buf(a);
      int rows = y.rank() == 1 ? 1 : y.rows();
      int n = y.rank() == 1 ? static_cast<int>(y.size()) : y.cols();
      for (int r = 0; r < rows; ++r) {
        const double* yr = y.data() + static_cast<std::int64_t>(r) * n;
        const double* gr = g.data() + static_cast<std::int64_t>(r) * n;
        double dotv = 0.0;
        for (int i = 0; i < n; ++i) dotv += yr[i] * gr[i];
        double* gar = ga.data() + static_cast<std::int64_t>(r) * n;
        for (int i = 0; i < n; ++i) gar[i] += yr[i] * (gr[i] - dotv);
      }
    });
  return o;
}

Var Tape::log(Var a, double floor) {
  Tensor out = val(a);
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::log(std::max(out[i], floor));
  bool ng = requires_grad(a);
  Var o = push(std::move(out), ng, "log");
  if (ng)
    records_.push_back([this, a, o, floor] {
      const Tensor& x = val(a);
      const Tensor& g = grad_buf(o);
      Tensor& ga = grad_buf(a);
      for (std::int64_t i = 0; i < x.size(); ++i)
        if (x[i] > floor) ga[i] += g[i] / x[i];
    });
  return o;
}

Var Tape::leaky_relu(Var a, double slope) {
  Tensor out = val(a);
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = lrelu_fwd(out[i], slope);
  bool ng = requires_grad(a);
  Var o = push(std::move(out), ng, "leaky_relu");
  if (ng)
    records_.push_back([this, a, o, slope] {
      const Tensor& x = val(a);
      const Tensor& g = grad_buf(o);
      Tensor& ga = grad_buf(a);
      for (std::int64_t i = 0; i < x.size(); ++i) ga[i] += g[i] * lrelu_bwd(x[i], slope);
    });
  return o;
}

Var Tape::elu(Var a) {
  Tensor out = val(a);
  for (std::int64_t i = 0; i < out.size(); ++i)
    out[i] = out[i] > 0.0 ? out[i] : std::expm1(out[i]);
  bool ng = requires_grad(a);
  Var o = push(std::move(out), ng, "elu");
  if (ng)
    records_.push_back([this, a, o] {
      const Tensor& x = val(a);
      const Tensor& y = val(o);
      const Tensor& g = grad_buf(o);
      Tensor& ga = grad_buf(a);
      for (std::int64_t i = 0; i < x.size(); ++i)
        ga[i] += g[i] * (x[i] > 0.0 ? 1.0 : y[i] + 1.0);
    });
  return o;
}

Var Tape::sigmoid(Var a) {
  Tensor out = val(a);
  for (std::int64_t i = 0; i < out.size(); ++i) {
    double x = out[i];
    out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  bool ng = requires_grad(a);
  Var o = push(std::move(out), ng, "sigmoid");
  if (ng)
    records_.push_back([this, a, o] {
      const Tensor& y = val(o);
      const Tensor& g = grad_buf(o);
      Tensor& ga = grad_buf(a);
      for (std::int64_t i = 0; i < y.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
    });
  return o;
}

Var Tape::softplus(Var a) {
  Tensor out = val(a);
  for (std::int64_t i = 0; i < out.size(); ++i) {
    double x = out[i];
    if (x > 30.0)
      out[i] = x;
    else if (x < -30.0)
      out[i] = std::exp(x);
    else
      out[i] = std::log1p(std::exp(x));
  }
  bool ng = requires_grad(a);
  Var o = push(std::move(out), ng, "softplus");
  if (ng)
    records_.push_back([this, a, o] {
      const Tensor& x = val(a);
      const Tensor& g = grad_buf(o);
      Tensor& ga = grad_buf(a);
      for (std::int64_t i = 0; i < x.size(); ++i) {
        double v = x[i];
        double s = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
        ga[i] += g[i] * s;
      }
    });
  return o;
}

Var Tape::clamp(Var a, double lo, double hi) {
  Tensor out = val(a);
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::min(hi, std::max(lo, out[i]));
  bool ng = requires_grad(a);
  Var o = push(std::move(out), ng, "clamp");
  if (ng)
    records_.push_back([this, a, o, lo, hi] {
      const Tensor& x = val(a);
      const Tensor& g = grad_buf(o);
      Tensor& ga = grad_buf(a);
      for (std::int64_t i = 0; i < x.size(); ++i)
        if (x[i] > lo && x[i] < hi) ga[i] += g[i];
    });
  return o;
}

Var Tape::cross_entropy(Var logits, std::vector<int> labels) {
  const Tensor& x = val(logits);
  if (x.rank() != 2 || static_cast<std::size_t>(x.rows()) != labels.size())
    throw DimensionError("cross_entropy: logits " + shape_str(x.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
  int classes = x.cols();
  int count = 0;
  double total = 0.0;
  for (int i = 0; i < x.rows(); ++i) {
    int y = labels[i];
    if (y < 0) continue;
    if (y >= classes) throw ValidationError("cross_entropy: label out of range");
    const double* xr = x.data() + static_cast<std::int64_t>(i) * classes;
    double m = xr[0];
    for (int c = 1; c < classes; ++c) m = std::max(m, xr[c]);
    double z = 0.0;
    for (int c = 0; c < classes; ++c) z += std::exp(xr[c] - m);
    total += std::log(z) + m - xr[y];
    ++count;
  }
  Tensor out = Tensor::scalar(count > 0 ? total / count : 0.0);
  bool ng = requires_grad(logits) && count > 0;
  Var o = push(std::move(out), ng, "cross_entropy");
  if (ng)
    records_.push_back([this, logits, o, labels = std::move(labels), count] {
      const Tensor& x = val(logits);
      double g = grad_buf(o)[0] / count;
      Tensor& ga = grad_buf(logits);
      int classes = x.cols();
      std::vector<double> sm(classes);
      for (int i = 0; i < x.rows(); ++i) {
        if (labels[i] < 0) continue;
        const double* xr = x.data() + static_cast<std::int64_t>(i) * classes;
        softmax_row(xr, sm.data(), classes);
        double* gr = ga.data() + static_cast<std::int64_t>(i) * classes;
        for (int c = 0; c < classes; ++c) gr[c] += g * sm[c];
        gr[labels[i]] -= g;
      }
    });
  return o;
}

Var Tape::feature_matmul(Var w, const SparseRows* x) {
  const Tensor& wt = val(w);
  if (wt.rank() != 2 || wt.cols() != x->col_count)
    throw DimensionError("feature_matmul: weights " + shape_str(wt.shape()) + " vs " +
                         std::to_string(x->col_count) + " feature columns");
  int n = x->row_count();
  int out_dim = wt.rows();
  // transpose once so per-nonzero access is contiguous
  RowMat wtr = mat(wt).transpose();
  Tensor out = Tensor::zeros({n, out_dim});
  for (int r = 0; r < n; ++r) {
    double* orow = out.data() + static_cast<std::int64_t>(r) * out_dim;
    for (std::int64_t e = x->offsets[r]; e < x->offsets[r + 1]; ++e) {
      const double v = x->value[e];
      const double* wcol = wtr.data() + static_cast<std::int64_t>(x->index[e]) * out_dim;
      for (int o = 0; o < out_dim; ++o) orow[o] += v * wcol[o];
    }
  }
  bool ng = requires_grad(w);
  Var o = push(std::move(out), ng, "feature_matmul");
  if (ng)
    records_.push_back([this, w, o, x] {
      const Tensor& g = grad_buf(o);
      int out_dim = g.cols();
      RowMat acc = RowMat::Zero(val(w).cols(), out_dim);  // transposed accumulator
      for (int r = 0; r < x->row_count(); ++r) {
        const double* grow = g.data() + static_cast<std::int64_t>(r) * out_dim;
        for (std::int64_t e = x->offsets[r]; e < x->offsets[r + 1]; ++e) {
          const double v = x->value[e];
          double* arow = acc.data() + static_cast<std::int64_t>(x->index[e]) * out_dim;
          for (int c = 0; c < out_dim; ++c) arow[c] += v * grow[c];
        }
      }
      mat(grad_buf(w)) += acc.transpose();
    });
  return o;
}

Var Tape::attentive_pool(Var p, Var au, Var av, Var lu, Var lv, const FanoutIndex* idx,
                         double slope, bool uniform_lambda,
                         std::shared_ptr<AttentionStash>* stash_out) {
  const Tensor& pm = val(p);
  if (pm.rank() != 2) throw DimensionError("attentive_pool: states must be rank-2");
  if (idx->fanout < 1) throw ContractError("attentive_pool: empty neighbor sample");
  const int t_count = idx->target_count;
  const int fan = idx->fanout;
  const int d = pm.cols();
  const Tensor& auv = val(au);
  const Tensor& avv = val(av);
  if (auv.size() != pm.rows() || avv.size() != pm.rows())
    throw DimensionError("attentive_pool: logit halves must match state rows");

  auto stash = std::make_shared<AttentionStash>();
  stash->alpha = Tensor::zeros({t_count, fan});
  stash->lambda = uniform_lambda ? Tensor::full({t_count, fan}, 1.0 / fan)
                                 : Tensor::zeros({t_count, fan});
  Tensor out = Tensor::zeros({t_count, d});
  std::vector<double> raw(fan);
  for (int t = 0; t < t_count; ++t) {
    const int tp = idx->target_pos[t];
    for (int s = 0; s < fan; ++s) raw[s] = lrelu_fwd(auv[tp] + avv[idx->at(t, s)], slope);
    softmax_row(raw.data(), stash->alpha.data() + static_cast<std::int64_t>(t) * fan, fan);
    if (!uniform_lambda) {
      const Tensor& luv = val(lu);
      const Tensor& lvv = val(lv);
      for (int s = 0; s < fan; ++s) raw[s] = lrelu_fwd(luv[tp] + lvv[idx->at(t, s)], slope);
      softmax_row(raw.data(), stash->lambda.data() + static_cast<std::int64_t>(t) * fan, fan);
    }
    double* orow = out.data() + static_cast<std::int64_t>(t) * d;
    for (int s = 0; s < fan; ++s) {
      const double w = stash->alpha.at(t, s) * stash->lambda.at(t, s);
      const double* prow = pm.data() + static_cast<std::int64_t>(idx->at(t, s)) * d;
      for (int k = 0; k < d; ++k) orow[k] += w * prow[k];
    }
  }
  if (stash_out) *stash_out = stash;

  bool ng = requires_grad(p) || requires_grad(au) || requires_grad(av) ||
            (!uniform_lambda && (requires_grad(lu) || requires_grad(lv)));
  Var o = push(std::move(out), ng, "attentive_pool");
  if (ng)
    records_.push_back([this, p, au, av, lu, lv, o, idx, slope, uniform_lambda, stash] {
      const Tensor& pm = val(p);
      const Tensor& g = grad_buf(o);
      const int fan = idx->fanout;
      const int d = pm.cols();
      Tensor& gp = grad_buf(p);
      Tensor& gau = grad_buf(au);
      Tensor& gav = grad_buf(av);
      const bool with_lambda = !uniform_lambda;
      std::vector<double> dalpha(fan), dlambda(fan), de(fan);
      for (int t = 0; t < idx->target_count; ++t) {
        const int tp = idx->target_pos[t];
        const double* grow = g.data() + static_cast<std::int64_t>(t) * d;
        const double* arow = stash->alpha.data() + static_cast<std::int64_t>(t) * fan;
        const double* lrow = stash->lambda.data() + static_cast<std::int64_t>(t) * fan;
        for (int s = 0; s < fan; ++s) {
          const int np = idx->at(t, s);
          const double* prow = pm.data() + static_cast<std::int64_t>(np) * d;
          double v = 0.0;
          for (int k = 0; k < d; ++k) v += grow[k] * prow[k];
          const double w = arow[s] * lrow[s];
          if (requires_grad(p)) {
            double* gprow = gp.data() + static_cast<std::int64_t>(np) * d;
            for (int k = 0; k < d; ++k) gprow[k] += w * grow[k];
          }
          dalpha[s] = lrow[s] * v;
          dlambda[s] = arow[s] * v;
        }
        // softmax and LeakyReLU adjoints for the alpha path
        double adot = 0.0;
        for (int s = 0; s < fan; ++s) adot += arow[s] * dalpha[s];
        const Tensor& auv = val(au);
        const Tensor& avv = val(av);
        for (int s = 0; s < fan; ++s) {
          double draw = arow[s] * (dalpha[s] - adot);
          de[s] = draw * lrelu_bwd(auv[tp] + avv[idx->at(t, s)], slope);
        }
        if (requires_grad(au))
          for (int s = 0; s < fan; ++s) gau[tp] += de[s];
        if (requires_grad(av))
          for (int s = 0; s < fan; ++s) gav[idx->at(t, s)] += de[s];
        if (with_lambda) {
          double ldot = 0.0;
          for (int s = 0; s < fan; ++s) ldot += lrow[s] * dlambda[s];
          const Tensor& luv = val(lu);
          const Tensor& lvv = val(lv);
          for (int s = 0; s < fan; ++s) {
            double draw = lrow[s] * (dlambda[s] - ldot);
            de[s] = draw * lrelu_bwd(luv[tp] + lvv[idx->at(t, s)], slope);
          }
          if (requires_grad(lu)) {
            Tensor& glu = grad_buf(lu);
            for (int s = 0; s < fan; ++s) glu[tp] += de[s];
          }
          if (requires_grad(lv)) {
            Tensor& glv = grad_buf(lv);
            for (int s = 0; s < fan; ++s) glv[idx->at(t, s)] += de[s];
          }
        }
      }
    });
  return o;
}

void Tape::backward(Var loss) {
  if (val(loss).size() != 1) throw ContractError("backward: loss must be a scalar");
  for (Slot& s : slots_)
    if (!s.grad.empty()) vec(s.grad).setZero();
  grad_buf(loss)[0] = 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
}

}  // namespace hge
