// SPDX-License-Identifier: Apache-2.0
#include "optm/learning.hpp"

#include <cmath>

#include "optm/error.hpp"

namespace optm {

namespace {

void check_sizes(std::span<const std::size_t> sizes) {
  if (sizes.empty() || sizes.back() != 1) {
    throw ConfigError("head: layer sizes must be non-empty and end in a single output");
  }
  for (auto s : sizes)
    if (s == 0) throw ConfigError("head: zero-width dense layer");
}

}  // namespace

HeadWeights HeadWeights::zeros(std::size_t inputs, std::span<const std::size_t> sizes) {
  check_sizes(sizes);
  HeadWeights h;
  std::size_t in = inputs;
  for (auto out : sizes) {
    h.layers.push_back({Mat(out, in), Mat(out, 1)});
    in = out;
  }
  return h;
}

HeadWeights HeadWeights::glorot(std::size_t inputs, std::span<const std::size_t> sizes, Rng& rng) {
  HeadWeights h = zeros(inputs, sizes);
  for (auto& l : h.layers) l.w = glorot_init(l.w.rows(), l.w.cols(), rng);
  return h;
}

std::vector<Vec> HeadWeights::activations(std::span<const double> h) const {
  std::vector<Vec> z;
  z.reserve(layers.size() + 1);
  z.emplace_back(h.begin(), h.end());
  for (const auto& l : layers) {
    Vec next = matvec(l.w, z.back());
    add_inplace(next, l.b.flat());
    z.push_back(std::move(next));
  }
  return z;
}

double HeadWeights::forward(std::span<const double> h) const { return activations(h).back()[0]; }

std::vector<std::pair<std::string, Mat*>> HeadWeights::tensors() {
  std::vector<std::pair<std::string, Mat*>> out;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    out.emplace_back("dense" + std::to_string(k) + ".W", &layers[k].w);
    out.emplace_back("dense" + std::to_string(k) + ".b", &layers[k].b);
  }
  return out;
}

std::vector<std::pair<std::string, const Mat*>> HeadWeights::tensors() const {
  std::vector<std::pair<std::string, const Mat*>> out;
  for (auto& [name, m] : const_cast<HeadWeights*>(this)->tensors()) out.emplace_back(name, m);
  return out;
}

namespace {

HeadWeights zeros_like(const HeadWeights& h) {
  HeadWeights z;
  for (const auto& l : h.layers) z.layers.push_back({Mat(l.w.rows(), l.w.cols()), Mat(l.b.rows(), 1)});
  return z;
}

}  // namespace

LstmNet zeros_like(const LstmNet& p) {
  return {LstmWeights::zeros(p.cell.units(), p.cell.inputs()), zeros_like(p.head)};
}

GruNet zeros_like(const GruNet& p) {
  return {GruWeights::zeros(p.cell.units(), p.cell.inputs()), zeros_like(p.head)};
}

double mse(std::span<const double> y, std::span<const double> y_hat) {
  if (y.empty() || y.size() != y_hat.size()) {
    throw ShapeError("mse: need equal non-empty inputs, got " + std::to_string(y.size()) + " and " +
                     std::to_string(y_hat.size()));
  }
  double s = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) s += (y[k] - y_hat[k]) * (y[k] - y_hat[k]);
  return s / static_cast<double>(y.size());
}

double mse_temporal(std::span<const double> y, std::span<const double> y_hat) {
  if (y.empty() || y.size() != y_hat.size()) {
    throw ShapeError("mse_temporal: need equal non-empty inputs, got " + std::to_string(y.size()) +
                     " and " + std::to_string(y_hat.size()));
  }
  double s = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) s += 0.5 * (y[k] - y_hat[k]) * (y[k] - y_hat[k]);
  return s;
}

Vec head_backward(const HeadWeights& head, std::span<const double> h, double dl_dy, HeadWeights& grads) {
  const auto z = head.activations(h);
  Vec dz{dl_dy};
  for (std::size_t k = head.layers.size(); k-- > 0;) {
    outer_acc(grads.layers[k].w, dz, z[k]);
    add_inplace(grads.layers[k].b.flat(), dz);
    dz = matvec_t(head.layers[k].w, dz);
  }
  return dz;
}

std::vector<CellState> lstm_unroll(const LstmWeights& w, std::span<const Vec> xs,
                                   std::span<const double> h0, std::span<const double> c0) {
  std::vector<CellState> out;
  out.reserve(xs.size());
  for (const auto& x : xs) {
    if (out.empty()) {
      out.push_back(lstm_forward(w, x, h0, c0));
    } else {
      const CellState& prev = out.back();
      out.push_back(lstm_forward(w, x, prev.h, prev.c));
    }
  }
  return out;
}

std::vector<GruState> gru_unroll(const GruWeights& w, std::span<const Vec> xs, std::span<const double> h0) {
  std::vector<GruState> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(gru_forward(w, x, out.empty() ? h0 : std::span<const double>(out.back().h)));
  return out;
}

namespace {

Vec sigmoid_backward(std::span<const double> d, std::span<const double> s) {
  Vec out(d.size());
  for (std::size_t k = 0; k < d.size(); ++k) out[k] = d[k] * s[k] * (1.0 - s[k]);
  return out;
}

Vec tanh_backward(std::span<const double> d, std::span<const double> t) {
  Vec out(d.size());
  for (std::size_t k = 0; k < d.size(); ++k) out[k] = d[k] * (1.0 - t[k] * t[k]);
  return out;
}

/// Accumulates gradients of one gate's affine map a = W x + U h_prev + b and
/// returns the contribution Uᵀ da to dL/dh_prev.
Vec accumulate_gate(Mat& gw, Mat& gu, Mat& gb, const Mat& u, std::span<const double> da,
                    std::span<const double> x, std::span<const double> h_prev) {
  outer_acc(gw, da, x);
  outer_acc(gu, da, h_prev);
  add_inplace(gb.flat(), da);
  return matvec_t(u, da);
}

struct LstmStepGrads {
  Vec dh_prev;
  Vec dc_prev;
};

/// Pushes dL/dh and dL/dc of one step back into the gate parameters.
/// Either input may be empty (treated as zero). Gates flagged off receive
/// no gradient.
struct GateMask {
  bool f = true, i = true, c = true, o = true;
};

LstmStepGrads lstm_step_backward(const LstmWeights& w, const CellState& s, std::span<const double> dh,
                                 std::span<const double> dc_in, LstmWeights& g, GateMask mask = {}) {
  const std::size_t units = s.h.size();
  const Vec tc = tanh(s.c);
  Vec dc(units, 0.0);
  Vec d_o(units, 0.0);
  if (!dh.empty()) {
    for (std::size_t k = 0; k < units; ++k) {
      d_o[k] = dh[k] * tc[k];
      dc[k] = dh[k] * s.o[k] * (1.0 - tc[k] * tc[k]);
    }
  }
  if (!dc_in.empty()) add_inplace(dc, dc_in);

  const Vec df = hadamard(dc, s.c_prev);
  const Vec di = hadamard(dc, s.c_tilde);
  const Vec dct = hadamard(dc, s.i);

  Vec dh_prev(units, 0.0);
  if (mask.f) add_inplace(dh_prev, accumulate_gate(g.w_f, g.u_f, g.b_f, w.u_f, sigmoid_backward(df, s.f), s.x, s.h_prev));
  if (mask.i) add_inplace(dh_prev, accumulate_gate(g.w_i, g.u_i, g.b_i, w.u_i, sigmoid_backward(di, s.i), s.x, s.h_prev));
  if (mask.c) add_inplace(dh_prev, accumulate_gate(g.w_c, g.u_c, g.b_c, w.u_c, tanh_backward(dct, s.c_tilde), s.x, s.h_prev));
  if (mask.o) add_inplace(dh_prev, accumulate_gate(g.w_o, g.u_o, g.b_o, w.u_o, sigmoid_backward(d_o, s.o), s.x, s.h_prev));
  return {std::move(dh_prev), hadamard(dc, s.f)};
}

void check_labels(std::size_t steps, const StepLabels& labels) {
  if (steps == 0) throw ShapeError("bptt_grads: empty trajectory");
  if (labels.size() != steps) {
    throw ShapeError("bptt_grads: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(steps) + " steps");
  }
}

}  // namespace

LstmNet bptt_grads(const LstmNet& params, std::span<const CellState> trajectory, const StepLabels& labels) {
  check_labels(trajectory.size(), labels);
  LstmNet g = zeros_like(params);
  const std::size_t units = params.cell.units();
  Vec dh_next(units, 0.0);
  Vec dc_next(units, 0.0);
  for (std::size_t t = trajectory.size(); t-- > 0;) {
    const CellState& s = trajectory[t];
    Vec dh = dh_next;
    if (labels[t]) {
      const double y_hat = params.head.forward(s.h);
      add_inplace(dh, head_backward(params.head, s.h, y_hat - *labels[t], g.head));
    }
    auto back = lstm_step_backward(params.cell, s, dh, dc_next, g.cell);
    dh_next = std::move(back.dh_prev);
    dc_next = std::move(back.dc_prev);
  }
  check_finite(g, "bptt_grads");
  return g;
}

LstmNet optm_local_grads(Component selected, const CellState& s, const LstmNet& params, double label) {
  LstmNet g = zeros_like(params);
  const Vec& out = component_vector(s, selected);
  const double y_hat = params.head.forward(out);
  const Vec d = head_backward(params.head, out, y_hat - label, g.head);
  LstmWeights& gc = g.cell;
  const LstmWeights& w = params.cell;

  switch (selected) {
    case Component::forget:
      accumulate_gate(gc.w_f, gc.u_f, gc.b_f, w.u_f, sigmoid_backward(d, s.f), s.x, s.h_prev);
      break;
    case Component::input:
      accumulate_gate(gc.w_i, gc.u_i, gc.b_i, w.u_i, sigmoid_backward(d, s.i), s.x, s.h_prev);
      break;
    case Component::candidate:
      accumulate_gate(gc.w_c, gc.u_c, gc.b_c, w.u_c, tanh_backward(d, s.c_tilde), s.x, s.h_prev);
      break;
    case Component::output:
      accumulate_gate(gc.w_o, gc.u_o, gc.b_o, w.u_o, sigmoid_backward(d, s.o), s.x, s.h_prev);
      break;
    case Component::cell:
      // c = f ⊙ c_prev + i ⊙ c~ does not involve the output gate.
      lstm_step_backward(w, s, {}, d, gc, GateMask{true, true, true, false});
      break;
    case Component::hidden:
      lstm_step_backward(w, s, d, {}, gc);
      break;
  }
  check_finite(g, "optm_local_grads");
  return g;
}

GruNet bptt_grads(const GruNet& params, std::span<const GruState> trajectory, const StepLabels& labels) {
  check_labels(trajectory.size(), labels);
  GruNet g = zeros_like(params);
  const GruWeights& w = params.cell;
  GruWeights& gc = g.cell;
  const std::size_t units = w.units();
  Vec dh_next(units, 0.0);
  for (std::size_t t = trajectory.size(); t-- > 0;) {
    const GruState& s = trajectory[t];
    Vec dh = dh_next;
    if (labels[t]) {
      const double y_hat = params.head.forward(s.h);
      add_inplace(dh, head_backward(params.head, s.h, y_hat - *labels[t], g.head));
    }
    Vec dz(units), dn(units), dh_prev(units);
    for (std::size_t k = 0; k < units; ++k) {
      dz[k] = dh[k] * (s.h_prev[k] - s.n[k]);
      dn[k] = dh[k] * (1.0 - s.z[k]);
      dh_prev[k] = dh[k] * s.z[k];
    }
    const Vec dan = tanh_backward(dn, s.n);
    const Vec rh = hadamard(s.r, s.h_prev);
    const Vec drh = accumulate_gate(gc.w_n, gc.u_n, gc.b_n, w.u_n, dan, s.x, rh);
    const Vec dr = hadamard(drh, s.h_prev);
    add_inplace(dh_prev, hadamard(drh, s.r));
    add_inplace(dh_prev, accumulate_gate(gc.w_z, gc.u_z, gc.b_z, w.u_z, sigmoid_backward(dz, s.z), s.x, s.h_prev));
    add_inplace(dh_prev, accumulate_gate(gc.w_r, gc.u_r, gc.b_r, w.u_r, sigmoid_backward(dr, s.r), s.x, s.h_prev));
    dh_next = std::move(dh_prev);
  }
  check_finite(g, "bptt_grads");
  return g;
}

// ---------------------------------------------------------------------------

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(std::string_view s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + std::string(s) + "' (expected sgd or adam)");
}

void apply_step(OptimizerState& opt, std::span<Mat* const> params, std::span<const Mat* const> grads) {
  if (params.size() != grads.size()) throw ShapeError("optimizer: parameter/gradient count mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k]->rows() != grads[k]->rows() || params[k]->cols() != grads[k]->cols()) {
      throw ShapeError("optimizer: tensor " + std::to_string(k) + " is " + params[k]->shape_str() +
                       " but its gradient is " + grads[k]->shape_str());
    }
  }

  double scale = 1.0;
  if (opt.clip_norm > 0.0) {
    double sq = 0.0;
    for (const Mat* g : grads) sq += squared_norm(g->flat());
    const double norm = std::sqrt(sq);
    if (norm > opt.clip_norm) scale = opt.clip_norm / norm;
  }

  ++opt.steps;
  if (opt.kind == OptimizerKind::sgd) {
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto p = params[k]->flat();
      auto g = grads[k]->flat();
      for (std::size_t j = 0; j < p.size(); ++j) p[j] -= opt.lr * scale * g[j];
    }
    return;
  }

  if (opt.m.empty()) {
    for (const Mat* p : params) {
      opt.m.emplace_back(p->rows(), p->cols());
      opt.v.emplace_back(p->rows(), p->cols());
    }
  } else if (opt.m.size() != params.size()) {
    throw ShapeError("optimizer: moment count does not match parameters");
  }
  const double t = static_cast<double>(opt.steps);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k]->flat();
    auto g = grads[k]->flat();
    auto m = opt.m[k].flat();
    auto v = opt.v[k].flat();
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g[j] * scale;
      m[j] = opt.beta1 * m[j] + (1.0 - opt.beta1) * gj;
      v[j] = opt.beta2 * v[j] + (1.0 - opt.beta2) * gj * gj;
      p[j] -= opt.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + opt.eps);
    }
  }
}

long long param_count(long long units, long long inputs, long long outputs) {
  if (units <= 0 || inputs <= 0 || outputs <= 0) throw ConfigError("param_count: sizes must be positive");
  return 4 * units * units + 4 * units * inputs + units * outputs + 3 * units;
}

}  // namespace optm
