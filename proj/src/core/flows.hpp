#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "core/autodiff.hpp"
#include "core/error.hpp"
#include "core/matrix.hpp"
#include "core/rng.hpp"

namespace stochflow {

// The emission map h: a stack of affine coupling layers and Householder
// orthogonal layers. Parameters live in a flat vector; the specs below only
// carry shapes and offsets, so the same evaluation code runs on raw values
// (PlainParams) and on tape nodes (TapeParams).

inline constexpr double kScaleCap = 5.0;  // coupling log-scales squashed to [-cap, cap]

struct MlpSpec {
  std::vector<int> widths;  // [in, hidden..., out], tanh between, final linear
  std::vector<std::size_t> w_offsets;
  std::vector<std::size_t> b_offsets;
};

struct CouplingSpec {
  std::vector<int> active;   // transformed coordinates
  std::vector<int> passive;  // conditioning coordinates
  MlpSpec scale_net;
  MlpSpec translate_net;
  int hidden = 0;
};

struct OrthoSpec {
  int count = 0;  // Householder vectors, each dim-long
  std::size_t offset = 0;
};

enum class LayerKind : std::uint8_t { coupling = 0, orthogonal = 1 };

struct LayerSpec {
  LayerKind kind = LayerKind::coupling;
  CouplingSpec coupling;
  OrthoSpec orthogonal;
};

struct LayerDesc {
  LayerKind kind = LayerKind::coupling;
  int hidden = 0;       // coupling only
  int householder = 0;  // orthogonal only
};

struct FlowStack {
  int dim = 0;
  std::vector<LayerSpec> layers;
  std::size_t param_offset = 0;
  std::size_t param_count = 0;
};

struct FlowConfig {
  int dim = 2;
  int pairs = 10;       // (coupling, orthogonal) pairs
  int hidden = 64;      // hidden width of the two coupling-net layers
  int householder = 0;  // 0: smallest even count >= dim (identity-at-init needs pairs)
};

FlowStack make_flow(const FlowConfig& cfg, ParamLayout& layout);
FlowStack make_flow_from_descs(int dim, const std::vector<LayerDesc>& descs, ParamLayout& layout);
std::vector<LayerDesc> layer_descs(const FlowStack& stack);

// Identity map at start: zeroed final coupling layers, Householder vectors in
// equal pairs so each orthogonal layer realizes I.
void init_flow_params(const FlowStack& stack, std::vector<double>& values, Rng& rng);

// Exact d x d Jacobian of the forward map at a single point (plain values).
Matrix flow_jacobian(const FlowStack& stack, const std::vector<double>& params, const Matrix& z_point);

// ---- evaluation kernels ----

template <class P, class M = typename P::value_type>
M mlp_apply(const MlpSpec& spec, const P& p, const M& x) {
  M h = x;
  const int n_lin = static_cast<int>(spec.widths.size()) - 1;
  for (int l = 0; l < n_lin; ++l) {
    M w = p.get(spec.w_offsets[l], spec.widths[l + 1], spec.widths[l]);
    M b = p.get(spec.b_offsets[l], spec.widths[l + 1], 1);
    h = add_bias(matmul(w, h), b);
    if (l + 1 < n_lin) h = tanh(h);
  }
  return h;
}

template <class M>
M squash_scale(const M& s) {
  return scale(tanh(scale(s, 1.0 / kScaleCap)), kScaleCap);
}

// returns (output, per-column logdet contribution)
template <class P, class M = typename P::value_type>
std::pair<M, M> coupling_forward(const CouplingSpec& c, const P& p, const M& z, int dim) {
  M zp = gather_rows(z, c.passive);
  M za = gather_rows(z, c.active);
  M s = squash_scale(mlp_apply(c.scale_net, p, zp));
  M t = mlp_apply(c.translate_net, p, zp);
  M ya = add(mul(za, exp(s)), t);
  M y = add(scatter_rows(c.active, ya, dim), scatter_rows(c.passive, zp, dim));
  return {y, col_sum(s)};
}

template <class P, class M = typename P::value_type>
std::pair<M, M> coupling_inverse(const CouplingSpec& c, const P& p, const M& y, int dim) {
  M yp = gather_rows(y, c.passive);
  M ya = gather_rows(y, c.active);
  M s = squash_scale(mlp_apply(c.scale_net, p, yp));
  M t = mlp_apply(c.translate_net, p, yp);
  M za = mul(sub(ya, t), exp(neg(s)));
  M z = add(scatter_rows(c.active, za, dim), scatter_rows(c.passive, yp, dim));
  return {z, neg(col_sum(s))};
}

template <class P, class M = typename P::value_type>
M householder_product(const OrthoSpec& o, const P& p, int dim) {
  M q = p.constant(Matrix::identity(dim));
  for (int k = 0; k < o.count; ++k) {
    M v = p.get(o.offset + static_cast<std::size_t>(k) * dim, dim, 1);
    M vvt = matmul(v, transpose(v));
    M vtv = sum_all(mul(v, v));
    M h = sub(p.constant(Matrix::identity(dim)), scale(div(vvt, broadcast(vtv, dim, dim)), 2.0));
    q = matmul(q, h);
  }
  return q;
}

// first non-finite column, or -1
inline int first_bad_column(const Matrix& m) {
  for (int j = 0; j < m.cols(); ++j)
    for (int i = 0; i < m.rows(); ++i)
      if (!std::isfinite(m(i, j))) return j;
  return -1;
}

inline void check_columns_finite(const Matrix& m, const char* op) {
  int bad = first_bad_column(m);
  if (bad >= 0)
    throw Error(ErrorCode::numeric, std::string(op) + ": non-finite output at point " + std::to_string(bad));
}

// z -> y over the whole stack; logdet is 1 x N (orthogonal layers add zero).
template <class P, class M = typename P::value_type>
std::pair<M, M> flow_forward(const FlowStack& f, const P& p, const M& z) {
  const int n = value_of(z).cols();
  M y = z;
  M logdet = p.constant(Matrix::zeros(1, n));
  for (const LayerSpec& layer : f.layers) {
    if (layer.kind == LayerKind::coupling) {
      auto [out, ld] = coupling_forward(layer.coupling, p, y, f.dim);
      y = out;
      logdet = add(logdet, ld);
    } else {
      y = matmul(householder_product(layer.orthogonal, p, f.dim), y);
    }
  }
  check_columns_finite(value_of(y), "flow_forward");
  return {y, logdet};
}

// y -> z; returns log|det dz/dy| per column (= -logdet of forward at z).
template <class P, class M = typename P::value_type>
std::pair<M, M> flow_inverse(const FlowStack& f, const P& p, const M& y) {
  const int n = value_of(y).cols();
  M z = y;
  M inv_logdet = p.constant(Matrix::zeros(1, n));
  for (auto it = f.layers.rbegin(); it != f.layers.rend(); ++it) {
    if (it->kind == LayerKind::coupling) {
      auto [out, ld] = coupling_inverse(it->coupling, p, z, f.dim);
      z = out;
      inv_logdet = add(inv_logdet, ld);
    } else {
      z = matmul(transpose(householder_product(it->orthogonal, p, f.dim)), z);
    }
  }
  check_columns_finite(value_of(z), "flow_inverse");
  return {z, inv_logdet};
}

}  // namespace stochflow
