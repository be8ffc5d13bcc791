// SPDX-License-Identifier: Apache-2.0
#include "optm/cells.hpp"

#include <cmath>

#include "optm/error.hpp"

namespace optm {

namespace {

Vec affine(const Mat& w, std::span<const double> x, const Mat& u, std::span<const double> h,
           const Mat& b) {
  Vec a = matvec(w, x);
  add_inplace(a, matvec(u, h));
  add_inplace(a, b.flat());
  return a;
}

void check_state(std::size_t units, std::size_t inputs, std::span<const double> x,
                 std::span<const double> h_prev, std::span<const double> c_prev, const char* who) {
  if (x.size() != inputs || h_prev.size() != units || c_prev.size() != units) {
    throw ShapeError(std::string(who) + ": expected x[" + std::to_string(inputs) + "], state[" +
                     std::to_string(units) + "], got x[" + std::to_string(x.size()) + "], h[" +
                     std::to_string(h_prev.size()) + "], c[" + std::to_string(c_prev.size()) + "]");
  }
}

}  // namespace

LstmWeights LstmWeights::zeros(std::size_t units, std::size_t inputs) {
  if (units == 0 || inputs == 0) throw ShapeError("LstmWeights: empty shape");
  LstmWeights w;
  for (Mat* m : {&w.w_f, &w.w_i, &w.w_c, &w.w_o}) *m = Mat(units, inputs);
  for (Mat* m : {&w.u_f, &w.u_i, &w.u_c, &w.u_o}) *m = Mat(units, units);
  for (Mat* m : {&w.b_f, &w.b_i, &w.b_c, &w.b_o}) *m = Mat(units, 1);
  return w;
}

LstmWeights LstmWeights::glorot(std::size_t units, std::size_t inputs, Rng& rng) {
  LstmWeights w = zeros(units, inputs);
  for (Mat* m : {&w.w_f, &w.w_i, &w.w_c, &w.w_o}) *m = glorot_init(units, inputs, rng);
  for (Mat* m : {&w.u_f, &w.u_i, &w.u_c, &w.u_o}) *m = glorot_init(units, units, rng);
  return w;
}

std::vector<std::pair<std::string_view, Mat*>> LstmWeights::tensors() {
  return {{"W_f", &w_f}, {"W_i", &w_i}, {"W_c", &w_c}, {"W_o", &w_o},
          {"U_f", &u_f}, {"U_i", &u_i}, {"U_c", &u_c}, {"U_o", &u_o},
          {"b_f", &b_f}, {"b_i", &b_i}, {"b_c", &b_c}, {"b_o", &b_o}};
}

std::vector<std::pair<std::string_view, const Mat*>> LstmWeights::tensors() const {
  std::vector<std::pair<std::string_view, const Mat*>> out;
  for (auto [name, m] : const_cast<LstmWeights*>(this)->tensors()) out.emplace_back(name, m);
  return out;
}

CellState lstm_forward(const LstmWeights& w, std::span<const double> x,
                       std::span<const double> h_prev, std::span<const double> c_prev) {
  check_state(w.units(), w.inputs(), x, h_prev, c_prev, "lstm_forward");
  CellState s;
  s.f = sigmoid(affine(w.w_f, x, w.u_f, h_prev, w.b_f));
  s.i = sigmoid(affine(w.w_i, x, w.u_i, h_prev, w.b_i));
  s.c_tilde = tanh(affine(w.w_c, x, w.u_c, h_prev, w.b_c));
  s.o = sigmoid(affine(w.w_o, x, w.u_o, h_prev, w.b_o));
  s.c = add(hadamard(s.f, c_prev), hadamard(s.i, s.c_tilde));
  s.h = hadamard(s.o, tanh(s.c));
  s.h_prev.assign(h_prev.begin(), h_prev.end());
  s.c_prev.assign(c_prev.begin(), c_prev.end());
  s.x.assign(x.begin(), x.end());
  return s;
}

GruWeights GruWeights::zeros(std::size_t units, std::size_t inputs) {
  if (units == 0 || inputs == 0) throw ShapeError("GruWeights: empty shape");
  GruWeights w;
  for (Mat* m : {&w.w_z, &w.w_r, &w.w_n}) *m = Mat(units, inputs);
  for (Mat* m : {&w.u_z, &w.u_r, &w.u_n}) *m = Mat(units, units);
  for (Mat* m : {&w.b_z, &w.b_r, &w.b_n}) *m = Mat(units, 1);
  return w;
}

GruWeights GruWeights::glorot(std::size_t units, std::size_t inputs, Rng& rng) {
  GruWeights w = zeros(units, inputs);
  for (Mat* m : {&w.w_z, &w.w_r, &w.w_n}) *m = glorot_init(units, inputs, rng);
  for (Mat* m : {&w.u_z, &w.u_r, &w.u_n}) *m = glorot_init(units, units, rng);
  return w;
}

std::vector<std::pair<std::string_view, Mat*>> GruWeights::tensors() {
  return {{"W_z", &w_z}, {"W_r", &w_r}, {"W_n", &w_n}, {"U_z", &u_z}, {"U_r", &u_r},
          {"U_n", &u_n}, {"b_z", &b_z}, {"b_r", &b_r}, {"b_n", &b_n}};
}

std::vector<std::pair<std::string_view, const Mat*>> GruWeights::tensors() const {
  std::vector<std::pair<std::string_view, const Mat*>> out;
  for (auto [name, m] : const_cast<GruWeights*>(this)->tensors()) out.emplace_back(name, m);
  return out;
}

GruState gru_forward(const GruWeights& w, std::span<const double> x, std::span<const double> h_prev) {
  check_state(w.units(), w.inputs(), x, h_prev, h_prev, "gru_forward");
  GruState s;
  s.z = sigmoid(affine(w.w_z, x, w.u_z, h_prev, w.b_z));
  s.r = sigmoid(affine(w.w_r, x, w.u_r, h_prev, w.b_r));
  s.n = tanh(affine(w.w_n, x, w.u_n, hadamard(s.r, h_prev), w.b_n));
  s.h.resize(s.z.size());
  for (std::size_t k = 0; k < s.h.size(); ++k) {
    s.h[k] = s.z[k] * h_prev[k] + (1.0 - s.z[k]) * s.n[k];
  }
  s.h_prev.assign(h_prev.begin(), h_prev.end());
  s.x.assign(x.begin(), x.end());
  return s;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Component c) {
  switch (c) {
    case Component::forget: return "forget";
    case Component::input: return "input";
    case Component::candidate: return "candidate";
    case Component::output: return "output";
    case Component::cell: return "cell";
    case Component::hidden: return "hidden";
  }
  return "?";
}

void RepoConfig::validate() const {
  // alpha == 0 is allowed: it freezes the importance weights.
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw ConfigError("repo alpha must be a finite non-negative number");
  }
  if (iters < 1) throw ConfigError("repo iterations must be at least 1");
}

Vec concat_repo(const CellState& s) {
  Vec r;
  r.reserve(6 * s.h.size());
  for (const Vec* v : {&s.f, &s.i, &s.c_tilde, &s.o, &s.c, &s.h}) r.insert(r.end(), v->begin(), v->end());
  return r;
}

const Vec& component_vector(const CellState& s, Component c) {
  switch (c) {
    case Component::forget: return s.f;
    case Component::input: return s.i;
    case Component::candidate: return s.c_tilde;
    case Component::output: return s.o;
    case Component::cell: return s.c;
    case Component::hidden: return s.h;
  }
  throw StateError("component_vector: invalid component");
}

Vec online_gd(std::span<const double> r, double y, std::span<const double> theta0, double alpha,
              int iters) {
  if (r.size() != theta0.size()) {
    throw ShapeError("online_gd: r has length " + std::to_string(r.size()) + ", theta " +
                     std::to_string(theta0.size()));
  }
  if (iters < 1) throw ConfigError("online_gd: iterations must be at least 1");
  Vec theta(theta0.begin(), theta0.end());
  for (int it = 1; it <= iters; ++it) {
    const double error = dot(r, theta) - y;
    const double scale = alpha * 2.0 * error;
    for (std::size_t j = 0; j < theta.size(); ++j) theta[j] -= scale * r[j];
    if (!std::isfinite(error) || !all_finite(theta)) {
      throw NumericError("online_gd: non-finite value at iteration " + std::to_string(it));
    }
  }
  return theta;
}

std::array<double, kComponents> average_importance(std::span<const double> theta, std::size_t units,
                                                   ImportanceMode mode) {
  if (units == 0 || theta.size() != kComponents * units) {
    throw ShapeError("average_importance: theta of length " + std::to_string(theta.size()) +
                     " is not 6 blocks of " + std::to_string(units));
  }
  std::array<double, kComponents> ai{};
  for (int c = 0; c < kComponents; ++c) {
    double s = 0.0;
    for (std::size_t j = 0; j < units; ++j) {
      const double w = theta[c * units + j];
      s += mode == ImportanceMode::absolute_mean ? std::abs(w) : w;
    }
    ai[c] = s / static_cast<double>(units);
  }
  return ai;
}

Component select_component(const std::array<double, kComponents>& ai) {
  int best = 0;
  for (int c = 1; c < kComponents; ++c)
    if (ai[c] > ai[best]) best = c;
  return static_cast<Component>(best + 1);
}

OptmStep optm_forward(const LstmWeights& w, std::span<const double> x, std::span<const double> h_prev,
                      std::span<const double> c_prev, double y_current, const RepoConfig& cfg,
                      std::span<const double> theta_carry) {
  cfg.validate();
  OptmStep step;
  step.cell = lstm_forward(w, x, h_prev, c_prev);

  const std::size_t units = w.units();
  RepoResult& repo = step.repo;
  repo.r = concat_repo(step.cell);
  Vec theta0(repo.r.size(), 0.0);
  if (cfg.theta_init == ThetaInit::warm) {
    if (theta_carry.size() != theta0.size()) {
      throw ShapeError("optm_forward: carried theta has length " + std::to_string(theta_carry.size()) +
                       ", expected " + std::to_string(theta0.size()));
    }
    theta0.assign(theta_carry.begin(), theta_carry.end());
  }
  repo.theta = online_gd(repo.r, y_current, theta0, cfg.alpha, cfg.iters);
  repo.ai = average_importance(repo.theta, units, cfg.importance);
  repo.selected = select_component(repo.ai);
  repo.h_new = component_vector(step.cell, repo.selected);

  step.c_next = step.cell.c;
  step.theta_next = repo.theta;
  return step;
}

}  // namespace optm
