// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference checks of the analytic gradients. The numeric
// side only ever calls forward passes.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "optm/learning.hpp"

namespace optm {

struct TensorCheck {
  std::string name;
  double max_rel_error = 0.0;
};

struct GradcheckCase {
  std::string name;
  std::vector<TensorCheck> tensors;

  double max_rel_error() const;
};

/// max_j |a_j - n_j| / max(max_j |a_j|, max_j |n_j|, 1e-8)
double relative_error(const Mat& analytic, const Mat& numeric);

/// Central differences of `loss` with respect to every entry of `params`.
template <class P>
P finite_difference(P params, const std::function<double(const P&)>& loss, double step) {
  P grads = zeros_like(params);
  auto p = params.tensors();
  auto g = grads.tensors();
  for (std::size_t k = 0; k < p.size(); ++k) {
    auto pf = p[k].second->flat();
    auto gf = g[k].second->flat();
    for (std::size_t j = 0; j < pf.size(); ++j) {
      const double saved = pf[j];
      pf[j] = saved + step;
      const double up = loss(params);
      pf[j] = saved - step;
      const double down = loss(params);
      pf[j] = saved;
      gf[j] = (up - down) / (2.0 * step);
    }
  }
  return grads;
}

template <class P>
GradcheckCase compare(std::string name, const P& analytic, const P& numeric) {
  GradcheckCase c{std::move(name), {}};
  auto a = analytic.tensors();
  auto n = numeric.tensors();
  for (std::size_t k = 0; k < a.size(); ++k) {
    c.tensors.push_back({a[k].first, relative_error(*a[k].second, *n[k].second)});
  }
  return c;
}

/// Σ_t ½(head(h_t) - y_t)² over an LSTM unrolled from (h0, c0).
double lstm_sequence_loss(const LstmNet& p, const std::vector<Vec>& xs, const Vec& h0, const Vec& c0,
                          const StepLabels& labels);
double gru_sequence_loss(const GruNet& p, const std::vector<Vec>& xs, const Vec& h0, const StepLabels& labels);
/// ½(head(component) - y)² for one step with the selection held fixed.
double optm_local_loss(const LstmNet& p, Component selected, const Vec& x, const Vec& h0, const Vec& c0,
                       double label);

struct GradcheckOptions {
  std::uint64_t seed = 0;
  double step = 1e-6;
  /// Scales analytic gradients by (1 + perturb); a non-zero value is a
  /// deliberately broken gradient for testing the checker itself.
  double perturb = 0.0;
  std::size_t units = 2;
  std::size_t inputs = 3;
};

/// LSTM BPTT at T = 1, 2, 3; optimum-output local gradients for each of the
/// six components; GRU BPTT at T = 3.
std::vector<GradcheckCase> run_gradcheck_suite(const GradcheckOptions& opts);

}  // namespace optm
