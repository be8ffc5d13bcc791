// SPDX-License-Identifier: Apache-2.0
#include "optm/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace optm {

double GradcheckCase::max_rel_error() const {
  double m = 0.0;
  for (const auto& t : tensors) m = std::max(m, t.max_rel_error);
  return m;
}

double relative_error(const Mat& analytic, const Mat& numeric) {
  double diff = 0.0, scale = 1e-8;
  auto a = analytic.flat();
  auto n = numeric.flat();
  for (std::size_t j = 0; j < a.size(); ++j) {
    diff = std::max(diff, std::abs(a[j] - n[j]));
    scale = std::max({scale, std::abs(a[j]), std::abs(n[j])});
  }
  return diff / scale;
}

double lstm_sequence_loss(const LstmNet& p, const std::vector<Vec>& xs, const Vec& h0, const Vec& c0,
                          const StepLabels& labels) {
  const auto traj = lstm_unroll(p.cell, xs, h0, c0);
  double loss = 0.0;
  for (std::size_t t = 0; t < traj.size(); ++t) {
    if (!labels[t]) continue;
    const double e = p.head.forward(traj[t].h) - *labels[t];
    loss += 0.5 * e * e;
  }
  return loss;
}

double gru_sequence_loss(const GruNet& p, const std::vector<Vec>& xs, const Vec& h0, const StepLabels& labels) {
  const auto traj = gru_unroll(p.cell, xs, h0);
  double loss = 0.0;
  for (std::size_t t = 0; t < traj.size(); ++t) {
    if (!labels[t]) continue;
    const double e = p.head.forward(traj[t].h) - *labels[t];
    loss += 0.5 * e * e;
  }
  return loss;
}

double optm_local_loss(const LstmNet& p, Component selected, const Vec& x, const Vec& h0, const Vec& c0,
                       double label) {
  const CellState s = lstm_forward(p.cell, x, h0, c0);
  const double e = p.head.forward(component_vector(s, selected)) - label;
  return 0.5 * e * e;
}

namespace {

Vec random_vec(std::size_t n, Rng& rng) {
  Vec v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

template <class P>
void randomize(P& p, Rng& rng) {
  for (auto& [name, m] : p.tensors())
    for (double& x : m->flat()) x = rng.uniform(-1.0, 1.0);
}

template <class P>
void perturb(P& g, double amount) {
  if (amount == 0.0) return;
  for (auto& [name, m] : g.tensors())
    for (double& x : m->flat()) x *= 1.0 + amount;
}

const std::size_t kHead[] = {4, 1};

}  // namespace

std::vector<GradcheckCase> run_gradcheck_suite(const GradcheckOptions& opts) {
  Rng rng(opts.seed);
  const std::size_t U = opts.units, D = opts.inputs;
  std::vector<GradcheckCase> out;

  for (std::size_t steps = 1; steps <= 3; ++steps) {
    LstmNet p{LstmWeights::zeros(U, D), HeadWeights::zeros(U, kHead)};
    randomize(p, rng);
    std::vector<Vec> xs;
    StepLabels labels;
    for (std::size_t t = 0; t < steps; ++t) {
      xs.push_back(random_vec(D, rng));
      labels.emplace_back(rng.uniform(-1.0, 1.0));
    }
    const Vec h0 = random_vec(U, rng), c0 = random_vec(U, rng);
    const auto traj = lstm_unroll(p.cell, xs, h0, c0);
    LstmNet analytic = bptt_grads(p, traj, labels);
    perturb(analytic, opts.perturb);
    const LstmNet numeric = finite_difference<LstmNet>(
        p, [&](const LstmNet& q) { return lstm_sequence_loss(q, xs, h0, c0, labels); }, opts.step);
    out.push_back(compare("lstm_bptt_T" + std::to_string(steps), analytic, numeric));
  }

  for (int c = 1; c <= kComponents; ++c) {
    const auto sel = static_cast<Component>(c);
    LstmNet p{LstmWeights::zeros(U, D), HeadWeights::zeros(U, kHead)};
    randomize(p, rng);
    const Vec x = random_vec(D, rng), h0 = random_vec(U, rng), c0 = random_vec(U, rng);
    const double y = rng.uniform(-1.0, 1.0);
    LstmNet analytic = optm_local_grads(sel, lstm_forward(p.cell, x, h0, c0), p, y);
    perturb(analytic, opts.perturb);
    const LstmNet numeric = finite_difference<LstmNet>(
        p, [&](const LstmNet& q) { return optm_local_loss(q, sel, x, h0, c0, y); }, opts.step);
    out.push_back(compare("optm_local_" + std::string(to_string(sel)), analytic, numeric));
  }

  {
    GruNet p{GruWeights::zeros(U, D), HeadWeights::zeros(U, kHead)};
    randomize(p, rng);
    std::vector<Vec> xs;
    StepLabels labels;
    for (int t = 0; t < 3; ++t) {
      xs.push_back(random_vec(D, rng));
      labels.emplace_back(rng.uniform(-1.0, 1.0));
    }
    const Vec h0 = random_vec(U, rng);
    GruNet analytic = bptt_grads(p, gru_unroll(p.cell, xs, h0), labels);
    perturb(analytic, opts.perturb);
    const GruNet numeric = finite_difference<GruNet>(
        p, [&](const GruNet& q) { return gru_sequence_loss(q, xs, h0, labels); }, opts.step);
    out.push_back(compare("gru_bptt_T3", analytic, numeric));
  }
  return out;
}

}  // namespace optm
