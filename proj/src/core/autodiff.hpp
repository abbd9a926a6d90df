#pragma once

#include <functional>
#include <string>
#include <vector>

#include "core/matrix.hpp"

namespace stochflow {

class Tape;

// Handle to a matrix-valued node on a Tape. Copy-cheap; lifetime bound to the
// tape that created it.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  int rows() const;
  int cols() const;
};

// Reverse-mode tape over matrix-valued operations. Build a graph with the op
// functions below, call backward() once on a 1x1 result, then read gradients
// of leaves. Values are stored per node; nodes reachable only from constants
// skip gradient work entirely.
class Tape {
 public:
  Var leaf(Matrix value);      // differentiable input
  Var constant(Matrix value);  // no gradient tracked

  const Matrix& value(const Var& v) const;
  const Matrix& grad(const Var& v) const;  // valid after backward()
  Matrix grad_or_zero(const Var& v) const;  // zeros when the loss does not reach v
  bool requires_grad(const Var& v) const;

  void backward(const Var& loss);  // loss must be 1x1 and finite

  std::size_t node_count() const { return nodes_.size(); }
  void reset();

  // internal (used by op implementations)
  using BackFn = std::function<void(Tape&, const Matrix& out_grad)>;
  Var make(Matrix value, bool needs_grad, BackFn back);
  void accumulate(int id, const Matrix& g);
  int next_id() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    bool grad_set = false;
    BackFn back;
  };
  std::vector<Node> nodes_;
};

inline const Matrix& value_of(const Var& v) { return v.tape->value(v); }

// ---- ops, mirroring the plain-Matrix vocabulary ----

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var transpose(const Var& a);

Var tanh(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
Var softplus(const Var& a);
Var atan2(const Var& y, const Var& x);
Var log_add_exp(const Var& a, const Var& b);
Var wrap_angle(const Var& a);

Var matmul(const Var& a, const Var& b);
Var add_bias(const Var& a, const Var& bias);
Var broadcast(const Var& s, int rows, int cols);
Var gather_rows(const Var& a, const std::vector<int>& idx);
Var scatter_rows(const std::vector<int>& idx, const Var& a, int total_rows);
Var slice_rows(const Var& a, int r0, int r1);
Var slice_cols(const Var& a, int c0, int c1);
Var col_sum(const Var& a);
Var row_sum(const Var& a);
Var sum_all(const Var& a);
Var reshape(const Var& a, int rows, int cols);
Var kron(const Var& a, const Var& b);
Var solve(const Var& a, const Var& b);
Var logdet_spd(const Var& a);
Var detach(const Var& a);

// ---- flat parameter vectors with named slices ----

struct ParamLayout {
  struct Slice {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
  };
  std::vector<Slice> slices;
  std::size_t total = 0;

  std::size_t add(const std::string& name, std::size_t size);
  const Slice* find(const std::string& name) const;
  // Name of the group containing flat index i ("?" if outside every slice).
  std::string group_of(std::size_t i) const;
  void validate() const;  // slices disjoint and covering [0, total)
};

struct ParamVector {
  ParamLayout layout;
  std::vector<double> values;
};

// Parameter providers: hand the same templated kernels either raw values or
// tape slices. `get` reads `rows*cols` doubles at `offset` in row-major order.
class PlainParams {
 public:
  using value_type = Matrix;
  explicit PlainParams(const std::vector<double>& values) : values_(&values) {}
  Matrix get(std::size_t offset, int rows, int cols) const;
  Matrix constant(Matrix m) const { return m; }

 private:
  const std::vector<double>* values_;
};

class TapeParams {
 public:
  using value_type = Var;
  TapeParams(Tape& tape, const Var& flat) : tape_(&tape), flat_(flat) {}
  Var get(std::size_t offset, int rows, int cols) const;
  Var constant(Matrix m) const { return tape_->constant(std::move(m)); }
  const Var& flat() const { return flat_; }

 private:
  Tape* tape_;
  Var flat_;
};

// ---- gradient entry points ----

// Scalar loss expressed as a tape graph over the flat parameter vector.
using LossGraphFn = std::function<Var(Tape&, const Var& flat_params)>;
// Same loss as a plain evaluation (used by the finite-difference oracle).
using LossValueFn = std::function<double(const std::vector<double>&)>;

// Reverse-mode gradient; throws ErrorCode::numeric naming the offending
// parameter group if any gradient entry is non-finite.
std::vector<double> gradient(const LossGraphFn& loss, const ParamVector& at);

// Central differences, step > 0.
std::vector<double> finite_difference_gradient(const LossValueFn& loss, const std::vector<double>& at,
                                               double step);

struct GradientReport {
  std::vector<double> analytic;
  std::vector<double> numeric;
  double max_rel_err = 0.0;
};

GradientReport check_gradient(const LossGraphFn& graph, const LossValueFn& value, const ParamVector& at,
                              double step = 1e-5);

}  // namespace stochflow
