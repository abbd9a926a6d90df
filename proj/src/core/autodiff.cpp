#include "core/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace stochflow {

namespace {

void require(bool ok, ErrorCode code, const std::string& msg) {
  if (!ok) throw Error(code, msg);
}

Tape& tape_of(const Var& a) {
  require(a.tape != nullptr, ErrorCode::invalid_argument, "Var: unbound handle");
  return *a.tape;
}

Tape& common_tape(const Var& a, const Var& b) {
  require(a.tape == b.tape, ErrorCode::invalid_argument, "Var: operands from different tapes");
  return tape_of(a);
}

}  // namespace

int Var::rows() const { return tape->value(*this).rows(); }
int Var::cols() const { return tape->value(*this).cols(); }

Var Tape::leaf(Matrix value) { return make(std::move(value), true, nullptr); }
Var Tape::constant(Matrix value) { return make(std::move(value), false, nullptr); }

Var Tape::make(Matrix value, bool needs_grad, BackFn back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.back = needs_grad ? std::move(back) : nullptr;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

const Matrix& Tape::value(const Var& v) const { return nodes_[v.id].value; }

const Matrix& Tape::grad(const Var& v) const {
  const Node& n = nodes_[v.id];
  require(n.grad_set, ErrorCode::invalid_argument, "Tape::grad: node has no accumulated gradient");
  return n.grad;
}

Matrix Tape::grad_or_zero(const Var& v) const {
  const Node& n = nodes_[v.id];
  if (n.grad_set) return n.grad;
  return Matrix::zeros(n.value.rows(), n.value.cols());
}

bool Tape::requires_grad(const Var& v) const { return nodes_[v.id].needs_grad; }

void Tape::accumulate(int id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (!n.grad_set) {
    n.grad = g;
    n.grad_set = true;
  } else {
    n.grad = add(n.grad, g);
  }
}

void Tape::backward(const Var& loss) {
  require(loss.tape == this, ErrorCode::invalid_argument, "backward: loss from another tape");
  const Matrix& lv = nodes_[loss.id].value;
  require(lv.rows() == 1 && lv.cols() == 1, ErrorCode::invalid_argument, "backward: loss must be 1x1");
  for (Node& n : nodes_) {
    n.grad = Matrix();
    n.grad_set = false;
  }
  accumulate(loss.id, Matrix(1, 1, {1.0}));
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.needs_grad || !n.grad_set || !n.back) continue;
    n.back(*this, n.grad);
  }
}

void Tape::reset() { nodes_.clear(); }

// ---- op helpers ----

namespace {

bool req(Tape& t, const Var& a) { return t.requires_grad(a); }

Var unary(const Var& a, Matrix value, std::function<void(Tape&, const Matrix&, int)> back) {
  Tape& t = tape_of(a);
  int aid = a.id;
  return t.make(std::move(value), req(t, a),
                [aid, back](Tape& tt, const Matrix& g) { back(tt, g, aid); });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  int ai = a.id, bi = b.id;
  return t.make(add(t.value(a), t.value(b)), req(t, a) || req(t, b), [ai, bi](Tape& tt, const Matrix& g) {
    tt.accumulate(ai, g);
    tt.accumulate(bi, g);
  });
}

Var sub(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  int ai = a.id, bi = b.id;
  return t.make(sub(t.value(a), t.value(b)), req(t, a) || req(t, b), [ai, bi](Tape& tt, const Matrix& g) {
    tt.accumulate(ai, g);
    tt.accumulate(bi, neg(g));
  });
}

Var mul(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  int ai = a.id, bi = b.id;
  return t.make(mul(t.value(a), t.value(b)), req(t, a) || req(t, b), [ai, bi](Tape& tt, const Matrix& g) {
    tt.accumulate(ai, mul(g, tt.value(Var{&tt, bi})));
    tt.accumulate(bi, mul(g, tt.value(Var{&tt, ai})));
  });
}

Var div(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  int ai = a.id, bi = b.id;
  return t.make(div(t.value(a), t.value(b)), req(t, a) || req(t, b), [ai, bi](Tape& tt, const Matrix& g) {
    const Matrix& bv = tt.value(Var{&tt, bi});
    const Matrix& av = tt.value(Var{&tt, ai});
    tt.accumulate(ai, div(g, bv));
    tt.accumulate(bi, neg(div(mul(g, av), mul(bv, bv))));
  });
}

Var neg(const Var& a) {
  return unary(a, neg(value_of(a)), [](Tape& tt, const Matrix& g, int ai) { tt.accumulate(ai, neg(g)); });
}

Var scale(const Var& a, double s) {
  return unary(a, scale(value_of(a), s),
               [s](Tape& tt, const Matrix& g, int ai) { tt.accumulate(ai, scale(g, s)); });
}

Var add_scalar(const Var& a, double s) {
  return unary(a, add_scalar(value_of(a), s),
               [](Tape& tt, const Matrix& g, int ai) { tt.accumulate(ai, g); });
}

Var transpose(const Var& a) {
  return unary(a, transpose(value_of(a)),
               [](Tape& tt, const Matrix& g, int ai) { tt.accumulate(ai, transpose(g)); });
}

Var tanh(const Var& a) {
  Tape& t = tape_of(a);
  int ai = a.id;
  int oi = t.next_id();
  return t.make(tanh(t.value(a)), req(t, a), [ai, oi](Tape& tt, const Matrix& g) {
    const Matrix& th = tt.value(Var{&tt, oi});
    tt.accumulate(ai, mul(g, sub(Matrix::filled(th.rows(), th.cols(), 1.0), mul(th, th))));
  });
}

Var exp(const Var& a) {
  Tape& t = tape_of(a);
  int ai = a.id;
  int oi = t.next_id();
  return t.make(exp(t.value(a)), req(t, a), [ai, oi](Tape& tt, const Matrix& g) {
    tt.accumulate(ai, mul(g, tt.value(Var{&tt, oi})));
  });
}

Var log(const Var& a) {
  return unary(a, log(value_of(a)), [](Tape& tt, const Matrix& g, int ai) {
    tt.accumulate(ai, div(g, tt.value(Var{&tt, ai})));
  });
}

Var sqrt(const Var& a) {
  Tape& t = tape_of(a);
  int ai = a.id;
  int oi = t.next_id();
  return t.make(sqrt(t.value(a)), req(t, a), [ai, oi](Tape& tt, const Matrix& g) {
    tt.accumulate(ai, div(scale(g, 0.5), tt.value(Var{&tt, oi})));
  });
}

Var softplus(const Var& a) {
  return unary(a, softplus(value_of(a)), [](Tape& tt, const Matrix& g, int ai) {
    const Matrix& av = tt.value(Var{&tt, ai});
    Matrix sig(av.rows(), av.cols());
    for (int i = 0; i < av.rows(); ++i)
      for (int j = 0; j < av.cols(); ++j) sig(i, j) = 1.0 / (1.0 + std::exp(-av(i, j)));
    tt.accumulate(ai, mul(g, sig));
  });
}

Var atan2(const Var& y, const Var& x) {
  Tape& t = common_tape(y, x);
  int yi = y.id, xi = x.id;
  return t.make(atan2(t.value(y), t.value(x)), req(t, y) || req(t, x), [yi, xi](Tape& tt, const Matrix& g) {
    const Matrix& yv = tt.value(Var{&tt, yi});
    const Matrix& xv = tt.value(Var{&tt, xi});
    Matrix r2 = add(mul(xv, xv), mul(yv, yv));
    tt.accumulate(yi, div(mul(g, xv), r2));
    tt.accumulate(xi, neg(div(mul(g, yv), r2)));
  });
}

Var log_add_exp(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  int ai = a.id, bi = b.id;
  return t.make(log_add_exp(t.value(a), t.value(b)), req(t, a) || req(t, b),
                [ai, bi](Tape& tt, const Matrix& g) {
                  const Matrix& av = tt.value(Var{&tt, ai});
                  const Matrix& bv = tt.value(Var{&tt, bi});
                  Matrix wa(av.rows(), av.cols()), wb(av.rows(), av.cols());
                  for (int i = 0; i < av.rows(); ++i)
                    for (int j = 0; j < av.cols(); ++j) {
                      double sa = 1.0 / (1.0 + std::exp(bv(i, j) - av(i, j)));
                      wa(i, j) = sa;
                      wb(i, j) = 1.0 - sa;
                    }
                  tt.accumulate(ai, mul(g, wa));
                  tt.accumulate(bi, mul(g, wb));
                });
}

Var wrap_angle(const Var& a) {
  return unary(a, wrap_angle(value_of(a)),
               [](Tape& tt, const Matrix& g, int ai) { tt.accumulate(ai, g); });
}

Var matmul(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  int ai = a.id, bi = b.id;
  return t.make(matmul(t.value(a), t.value(b)), req(t, a) || req(t, b), [ai, bi](Tape& tt, const Matrix& g) {
    const Matrix& av = tt.value(Var{&tt, ai});
    const Matrix& bv = tt.value(Var{&tt, bi});
    tt.accumulate(ai, matmul(g, transpose(bv)));
    tt.accumulate(bi, matmul(transpose(av), g));
  });
}

Var add_bias(const Var& a, const Var& bias) {
  Tape& t = common_tape(a, bias);
  int ai = a.id, bi = bias.id;
  return t.make(add_bias(t.value(a), t.value(bias)), req(t, a) || req(t, bias),
                [ai, bi](Tape& tt, const Matrix& g) {
                  tt.accumulate(ai, g);
                  tt.accumulate(bi, row_sum(g));
                });
}

Var broadcast(const Var& s, int rows, int cols) {
  return unary(s, broadcast(value_of(s), rows, cols),
               [](Tape& tt, const Matrix& g, int ai) { tt.accumulate(ai, sum_all(g)); });
}

Var gather_rows(const Var& a, const std::vector<int>& idx) {
  Tape& t = tape_of(a);
  int ai = a.id;
  int total = t.value(a).rows();
  return t.make(gather_rows(t.value(a), idx), req(t, a), [ai, idx, total](Tape& tt, const Matrix& g) {
    tt.accumulate(ai, scatter_rows(idx, g, total));
  });
}

Var scatter_rows(const std::vector<int>& idx, const Var& a, int total_rows) {
  Tape& t = tape_of(a);
  int ai = a.id;
  return t.make(scatter_rows(idx, t.value(a), total_rows), req(t, a),
                [ai, idx](Tape& tt, const Matrix& g) { tt.accumulate(ai, gather_rows(g, idx)); });
}

Var slice_rows(const Var& a, int r0, int r1) {
  Tape& t = tape_of(a);
  int ai = a.id;
  int rows = t.value(a).rows();
  return t.make(slice_rows(t.value(a), r0, r1), req(t, a), [ai, r0, r1, rows](Tape& tt, const Matrix& g) {
    Matrix full(rows, g.cols());
    for (int i = r0; i < r1; ++i)
      for (int j = 0; j < g.cols(); ++j) full(i, j) = g(i - r0, j);
    tt.accumulate(ai, full);
  });
}

Var slice_cols(const Var& a, int c0, int c1) {
  Tape& t = tape_of(a);
  int ai = a.id;
  int cols = t.value(a).cols();
  return t.make(slice_cols(t.value(a), c0, c1), req(t, a), [ai, c0, c1, cols](Tape& tt, const Matrix& g) {
    Matrix full(g.rows(), cols);
    for (int i = 0; i < g.rows(); ++i)
      for (int j = c0; j < c1; ++j) full(i, j) = g(i, j - c0);
    tt.accumulate(ai, full);
  });
}

Var col_sum(const Var& a) {
  Tape& t = tape_of(a);
  int ai = a.id;
  int rows = t.value(a).rows();
  return t.make(col_sum(t.value(a)), req(t, a), [ai, rows](Tape& tt, const Matrix& g) {
    Matrix full(rows, g.cols());
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < g.cols(); ++j) full(i, j) = g(0, j);
    tt.accumulate(ai, full);
  });
}

Var row_sum(const Var& a) {
  Tape& t = tape_of(a);
  int ai = a.id;
  int cols = t.value(a).cols();
  return t.make(row_sum(t.value(a)), req(t, a), [ai, cols](Tape& tt, const Matrix& g) {
    Matrix full(g.rows(), cols);
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < cols; ++j) full(i, j) = g(i, 0);
    tt.accumulate(ai, full);
  });
}

Var sum_all(const Var& a) {
  Tape& t = tape_of(a);
  int ai = a.id;
  int rows = t.value(a).rows(), cols = t.value(a).cols();
  return t.make(sum_all(t.value(a)), req(t, a), [ai, rows, cols](Tape& tt, const Matrix& g) {
    tt.accumulate(ai, Matrix::filled(rows, cols, g(0, 0)));
  });
}

Var reshape(const Var& a, int rows, int cols) {
  Tape& t = tape_of(a);
  int ai = a.id;
  int ar = t.value(a).rows(), ac = t.value(a).cols();
  return t.make(reshape(t.value(a), rows, cols), req(t, a), [ai, ar, ac](Tape& tt, const Matrix& g) {
    tt.accumulate(ai, reshape(g, ar, ac));
  });
}

Var kron(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  int ai = a.id, bi = b.id;
  return t.make(kron(t.value(a), t.value(b)), req(t, a) || req(t, b), [ai, bi](Tape& tt, const Matrix& g) {
    const Matrix& av = tt.value(Var{&tt, ai});
    const Matrix& bv = tt.value(Var{&tt, bi});
    Matrix ga(av.rows(), av.cols());
    Matrix gb(bv.rows(), bv.cols());
    for (int i = 0; i < av.rows(); ++i)
      for (int j = 0; j < av.cols(); ++j) {
        double s = 0.0;
        for (int k = 0; k < bv.rows(); ++k)
          for (int l = 0; l < bv.cols(); ++l) s += g(i * bv.rows() + k, j * bv.cols() + l) * bv(k, l);
        ga(i, j) = s;
      }
    for (int k = 0; k < bv.rows(); ++k)
      for (int l = 0; l < bv.cols(); ++l) {
        double s = 0.0;
        for (int i = 0; i < av.rows(); ++i)
          for (int j = 0; j < av.cols(); ++j) s += g(i * bv.rows() + k, j * bv.cols() + l) * av(i, j);
        gb(k, l) = s;
      }
    tt.accumulate(ai, ga);
    tt.accumulate(bi, gb);
  });
}

Var solve(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  int ai = a.id, bi = b.id;
  int oi = t.next_id();
  Matrix x = solve(t.value(a), t.value(b));
  return t.make(std::move(x), req(t, a) || req(t, b), [ai, bi, oi](Tape& tt, const Matrix& g) {
    const Matrix& av = tt.value(Var{&tt, ai});
    const Matrix& xv = tt.value(Var{&tt, oi});
    Matrix gb = solve(transpose(av), g);
    tt.accumulate(bi, gb);
    tt.accumulate(ai, neg(matmul(gb, transpose(xv))));
  });
}

Var logdet_spd(const Var& a) {
  Tape& t = tape_of(a);
  int ai = a.id;
  Matrix l = cholesky(t.value(a));
  Matrix v(1, 1, {logdet_from_cholesky(l)});
  return t.make(std::move(v), req(t, a), [ai](Tape& tt, const Matrix& g) {
    const Matrix& av = tt.value(Var{&tt, ai});
    Matrix inv = cholesky_solve(cholesky(av), Matrix::identity(av.rows()));
    tt.accumulate(ai, scale(inv, g(0, 0)));
  });
}

Var detach(const Var& a) { return tape_of(a).constant(value_of(a)); }

// ---- ParamLayout / providers ----

std::size_t ParamLayout::add(const std::string& name, std::size_t size) {
  std::size_t offset = total;
  slices.push_back({name, offset, size});
  total += size;
  return offset;
}

const ParamLayout::Slice* ParamLayout::find(const std::string& name) const {
  for (const auto& s : slices)
    if (s.name == name) return &s;
  return nullptr;
}

std::string ParamLayout::group_of(std::size_t i) const {
  for (const auto& s : slices)
    if (i >= s.offset && i < s.offset + s.size) return s.name;
  return "?";
}

void ParamLayout::validate() const {
  std::vector<char> seen(total, 0);
  for (const auto& s : slices)
    for (std::size_t i = s.offset; i < s.offset + s.size; ++i) {
      require(i < total && !seen[i], ErrorCode::invalid_argument,
              "ParamLayout: overlapping or out-of-range slice " + s.name);
      seen[i] = 1;
    }
  for (std::size_t i = 0; i < total; ++i)
    require(seen[i], ErrorCode::invalid_argument, "ParamLayout: gap at index " + std::to_string(i));
}

Matrix PlainParams::get(std::size_t offset, int rows, int cols) const {
  std::size_t n = static_cast<std::size_t>(rows) * cols;
  require(offset + n <= values_->size(), ErrorCode::invalid_argument, "PlainParams::get: slice out of range");
  return Matrix(rows, cols, std::vector<double>(values_->begin() + offset, values_->begin() + offset + n));
}

Var TapeParams::get(std::size_t offset, int rows, int cols) const {
  int n = rows * cols;
  Var s = slice_rows(flat_, static_cast<int>(offset), static_cast<int>(offset) + n);
  return reshape(s, rows, cols);
}

// ---- gradient entry points ----

std::vector<double> gradient(const LossGraphFn& loss, const ParamVector& at) {
  Tape tape;
  Var flat = tape.leaf(Matrix::column(at.values));
  Var out = loss(tape, flat);
  double lv = scalar(value_of(out));
  require(std::isfinite(lv), ErrorCode::numeric, "gradient: loss is not finite");
  tape.backward(out);
  Matrix g = tape.grad_or_zero(flat);
  std::vector<double> result(g.values());
  for (std::size_t i = 0; i < result.size(); ++i) {
    if (!std::isfinite(result[i]))
      throw Error(ErrorCode::numeric,
                  "gradient: non-finite gradient in parameter group " + at.layout.group_of(i));
  }
  return result;
}

std::vector<double> finite_difference_gradient(const LossValueFn& loss, const std::vector<double>& at,
                                               double step) {
  require(step > 0, ErrorCode::invalid_argument, "finite_difference_gradient: step must be positive");
  std::vector<double> g(at.size());
  std::vector<double> p = at;
  for (std::size_t i = 0; i < at.size(); ++i) {
    p[i] = at[i] + step;
    double up = loss(p);
    p[i] = at[i] - step;
    double dn = loss(p);
    p[i] = at[i];
    g[i] = (up - dn) / (2.0 * step);
  }
  return g;
}

GradientReport check_gradient(const LossGraphFn& graph, const LossValueFn& value, const ParamVector& at,
                              double step) {
  GradientReport r;
  r.analytic = gradient(graph, at);
  r.numeric = finite_difference_gradient(value, at.values, step);
  double denom_floor = 1e-6;
  for (std::size_t i = 0; i < r.analytic.size(); ++i) {
    double denom = std::max({std::fabs(r.analytic[i]), std::fabs(r.numeric[i]), denom_floor});
    r.max_rel_err = std::max(r.max_rel_err, std::fabs(r.analytic[i] - r.numeric[i]) / denom);
  }
  return r;
}

}  // namespace stochflow
