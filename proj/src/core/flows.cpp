#include "core/flows.hpp"

#include <cmath>
#include <string>

namespace stochflow {

namespace {

MlpSpec make_mlp(const std::vector<int>& widths, ParamLayout& layout, const std::string& prefix) {
  MlpSpec spec;
  spec.widths = widths;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    std::string tag = prefix + ".W" + std::to_string(l);
    spec.w_offsets.push_back(layout.add(tag, static_cast<std::size_t>(widths[l + 1]) * widths[l]));
    spec.b_offsets.push_back(layout.add(prefix + ".b" + std::to_string(l), widths[l + 1]));
  }
  return spec;
}

std::string layer_tag(std::size_t i) {
  std::string n = std::to_string(i);
  return "flow.L" + std::string(n.size() < 2 ? 2 - n.size() : 0, '0') + n;
}

}  // namespace

FlowStack make_flow_from_descs(int dim, const std::vector<LayerDesc>& descs, ParamLayout& layout) {
  if (dim < 1) throw Error(ErrorCode::invalid_argument, "make_flow: dim must be >= 1");
  FlowStack stack;
  stack.dim = dim;
  stack.param_offset = layout.total;
  int coupling_ordinal = 0;
  for (std::size_t i = 0; i < descs.size(); ++i) {
    const LayerDesc& d = descs[i];
    LayerSpec layer;
    layer.kind = d.kind;
    if (d.kind == LayerKind::coupling) {
      if (dim < 2) throw Error(ErrorCode::invalid_argument, "make_flow: coupling layers need dim >= 2");
      CouplingSpec c;
      c.hidden = d.hidden;
      // alternate masks so every coordinate gets transformed
      bool even_active = (coupling_ordinal % 2 == 0);
      for (int k = 0; k < dim; ++k) {
        bool is_even = (k % 2 == 0);
        (is_even == even_active ? c.active : c.passive).push_back(k);
      }
      std::vector<int> widths = {static_cast<int>(c.passive.size()), d.hidden, d.hidden,
                                 static_cast<int>(c.active.size())};
      c.scale_net = make_mlp(widths, layout, layer_tag(i) + ".scale");
      c.translate_net = make_mlp(widths, layout, layer_tag(i) + ".translate");
      layer.coupling = std::move(c);
      ++coupling_ordinal;
    } else {
      OrthoSpec o;
      o.count = d.householder;
      if (o.count < 1) throw Error(ErrorCode::invalid_argument, "make_flow: orthogonal layer needs vectors");
      o.offset = layout.add(layer_tag(i) + ".householder", static_cast<std::size_t>(o.count) * dim);
      layer.orthogonal = o;
    }
    stack.layers.push_back(std::move(layer));
  }
  stack.param_count = layout.total - stack.param_offset;
  return stack;
}

FlowStack make_flow(const FlowConfig& cfg, ParamLayout& layout) {
  int hh = cfg.householder;
  if (hh <= 0) hh = cfg.dim + (cfg.dim % 2);  // even count so paired vectors realize I at init
  std::vector<LayerDesc> descs;
  for (int p = 0; p < cfg.pairs; ++p) {
    descs.push_back({LayerKind::coupling, cfg.hidden, 0});
    descs.push_back({LayerKind::orthogonal, 0, hh});
  }
  return make_flow_from_descs(cfg.dim, descs, layout);
}

std::vector<LayerDesc> layer_descs(const FlowStack& stack) {
  std::vector<LayerDesc> out;
  for (const auto& l : stack.layers) {
    if (l.kind == LayerKind::coupling)
      out.push_back({LayerKind::coupling, l.coupling.hidden, 0});
    else
      out.push_back({LayerKind::orthogonal, 0, l.orthogonal.count});
  }
  return out;
}

void init_flow_params(const FlowStack& stack, std::vector<double>& values, Rng& rng) {
  for (const LayerSpec& layer : stack.layers) {
    if (layer.kind == LayerKind::coupling) {
      for (const MlpSpec* net : {&layer.coupling.scale_net, &layer.coupling.translate_net}) {
        const int n_lin = static_cast<int>(net->widths.size()) - 1;
        for (int l = 0; l < n_lin; ++l) {
          std::size_t count = static_cast<std::size_t>(net->widths[l + 1]) * net->widths[l];
          bool last = (l + 1 == n_lin);
          double bound = last ? 0.0 : 1.0 / std::sqrt(static_cast<double>(net->widths[l]));
          for (std::size_t k = 0; k < count; ++k)
            values[net->w_offsets[l] + k] = last ? 0.0 : rng.uniform(-bound, bound);
          for (int k = 0; k < net->widths[l + 1]; ++k) values[net->b_offsets[l] + k] = 0.0;
        }
      }
    } else {
      const OrthoSpec& o = layer.orthogonal;
      // equal consecutive pairs: H(v) H(v) = I, so the layer starts as identity
      for (int k = 0; k + 1 < o.count; k += 2) {
        double norm2 = 0.0;
        std::vector<double> v(stack.dim);
        do {
          norm2 = 0.0;
          for (int i = 0; i < stack.dim; ++i) {
            v[i] = rng.normal();
            norm2 += v[i] * v[i];
          }
        } while (norm2 < 1e-12);
        for (int i = 0; i < stack.dim; ++i) {
          values[o.offset + static_cast<std::size_t>(k) * stack.dim + i] = v[i];
          values[o.offset + static_cast<std::size_t>(k + 1) * stack.dim + i] = v[i];
        }
      }
      if (o.count % 2 == 1) {
        // odd leftover cannot cancel; leave it as e0 (a fixed reflection)
        std::size_t base = o.offset + static_cast<std::size_t>(o.count - 1) * stack.dim;
        values[base] = 1.0;
        for (int i = 1; i < stack.dim; ++i) values[base + i] = 0.0;
      }
    }
  }
}

namespace {

// Jacobian of an MLP w.r.t. its input at x, by the layer chain.
Matrix mlp_input_jacobian(const MlpSpec& spec, const PlainParams& p, const Matrix& x) {
  const int n_lin = static_cast<int>(spec.widths.size()) - 1;
  Matrix h = x;
  Matrix j = Matrix::identity(spec.widths[0]);
  for (int l = 0; l < n_lin; ++l) {
    Matrix w = p.get(spec.w_offsets[l], spec.widths[l + 1], spec.widths[l]);
    Matrix b = p.get(spec.b_offsets[l], spec.widths[l + 1], 1);
    h = add_bias(matmul(w, h), b);
    j = matmul(w, j);
    if (l + 1 < n_lin) {
      Matrix th = tanh(h);
      for (int r = 0; r < j.rows(); ++r) {
        double dr = 1.0 - th(r, 0) * th(r, 0);
        for (int c = 0; c < j.cols(); ++c) j(r, c) *= dr;
      }
      h = th;
    }
  }
  return j;
}

}  // namespace

Matrix flow_jacobian(const FlowStack& stack, const std::vector<double>& params, const Matrix& z_point) {
  if (z_point.rows() != stack.dim || z_point.cols() != 1)
    throw Error(ErrorCode::dimension_mismatch, "flow_jacobian: expected a single d-column");
  PlainParams p(params);
  Matrix z = z_point;
  Matrix j = Matrix::identity(stack.dim);
  for (const LayerSpec& layer : stack.layers) {
    if (layer.kind == LayerKind::coupling) {
      const CouplingSpec& c = layer.coupling;
      Matrix zp = gather_rows(z, c.passive);
      Matrix za = gather_rows(z, c.active);
      Matrix s_raw = mlp_apply(c.scale_net, p, zp);
      Matrix s = squash_scale(s_raw);
      Matrix t = mlp_apply(c.translate_net, p, zp);
      Matrix js = mlp_input_jacobian(c.scale_net, p, zp);
      Matrix jt = mlp_input_jacobian(c.translate_net, p, zp);
      // d(squash)/ds = 1 - tanh^2(s/cap)
      for (int r = 0; r < js.rows(); ++r) {
        double th = std::tanh(s_raw(r, 0) / kScaleCap);
        double dr = 1.0 - th * th;
        for (int col = 0; col < js.cols(); ++col) js(r, col) *= dr;
      }
      Matrix jl = Matrix::zeros(stack.dim, stack.dim);
      for (std::size_t k = 0; k < c.passive.size(); ++k) jl(c.passive[k], c.passive[k]) = 1.0;
      for (std::size_t i = 0; i < c.active.size(); ++i) {
        double e = std::exp(s(static_cast<int>(i), 0));
        jl(c.active[i], c.active[i]) = e;
        for (std::size_t k = 0; k < c.passive.size(); ++k) {
          jl(c.active[i], c.passive[k]) =
              za(static_cast<int>(i), 0) * e * js(static_cast<int>(i), static_cast<int>(k)) +
              jt(static_cast<int>(i), static_cast<int>(k));
        }
      }
      Matrix ya = add(mul(za, exp(s)), t);
      z = add(scatter_rows(c.active, ya, stack.dim), scatter_rows(c.passive, zp, stack.dim));
      j = matmul(jl, j);
    } else {
      Matrix q = householder_product(layer.orthogonal, p, stack.dim);
      z = matmul(q, z);
      j = matmul(q, j);
    }
  }
  return j;
}

}  // namespace stochflow
