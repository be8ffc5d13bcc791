// SPDX-License-Identifier: Apache-2.0
//
// Losses, hand-written backpropagation through time, optimizers and the
// LSTM parameter-count formula.
//
// Gradient containers reuse the parameter structs: a gradient of an
// LstmNet is another LstmNet whose tensors hold dL/dθ.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "optm/cells.hpp"
#include "optm/error.hpp"
#include "optm/numerics.hpp"

namespace optm {

/// Linear layer z' = W z + b with W of shape (out x in) and b (out x 1).
struct Dense {
  Mat w;
  Mat b;
};

/// Stack of linear dense layers ending in a single output.
struct HeadWeights {
  std::vector<Dense> layers;

  /// `sizes` lists layer widths after the recurrent layer; the last must be 1.
  static HeadWeights zeros(std::size_t inputs, std::span<const std::size_t> sizes);
  static HeadWeights glorot(std::size_t inputs, std::span<const std::size_t> sizes, Rng& rng);

  std::size_t inputs() const { return layers.front().w.cols(); }

  /// Activations z_0 = h, ..., z_L (z_L has length 1).
  std::vector<Vec> activations(std::span<const double> h) const;
  double forward(std::span<const double> h) const;

  std::vector<std::pair<std::string, Mat*>> tensors();
  std::vector<std::pair<std::string, const Mat*>> tensors() const;
};

/// Recurrent layer plus head. Doubles as its own gradient container.
template <class CellWeights>
struct Network {
  CellWeights cell;
  HeadWeights head;

  std::vector<std::pair<std::string, Mat*>> tensors() {
    std::vector<std::pair<std::string, Mat*>> out;
    for (auto [name, m] : cell.tensors()) out.emplace_back(std::string(name), m);
    for (auto& t : head.tensors()) out.push_back(std::move(t));
    return out;
  }
  std::vector<std::pair<std::string, const Mat*>> tensors() const {
    std::vector<std::pair<std::string, const Mat*>> out;
    for (auto& [name, m] : const_cast<Network*>(this)->tensors()) out.emplace_back(name, m);
    return out;
  }
};

using LstmNet = Network<LstmWeights>;
using GruNet = Network<GruWeights>;

/// Same shapes, all zeros.
LstmNet zeros_like(const LstmNet& p);
GruNet zeros_like(const GruNet& p);

/// Mean of squared errors (reporting form).
double mse(std::span<const double> y, std::span<const double> y_hat);
/// Sum over steps of ½(y - ŷ)² (training form).
double mse_temporal(std::span<const double> y, std::span<const double> y_hat);

/// Backpropagates dL/dŷ through the head: accumulates head gradients and
/// returns dL/dh.
Vec head_backward(const HeadWeights& head, std::span<const double> h, double dl_dy, HeadWeights& grads);

/// Runs lstm_forward over `xs` starting from (h0, c0).
std::vector<CellState> lstm_unroll(const LstmWeights& w, std::span<const Vec> xs,
                                   std::span<const double> h0, std::span<const double> c0);
std::vector<GruState> gru_unroll(const GruWeights& w, std::span<const Vec> xs, std::span<const double> h0);

/// Per-step labels; steps without a label contribute no loss (many-to-one
/// training leaves only the last one set).
using StepLabels = std::vector<std::optional<double>>;

/// Gradients of Σ_t ½(ŷ_t - y_t)² over a trajectory. The initial state of
/// the trajectory is treated as a constant.
LstmNet bptt_grads(const LstmNet& params, std::span<const CellState> trajectory, const StepLabels& labels);
GruNet bptt_grads(const GruNet& params, std::span<const GruState> trajectory, const StepLabels& labels);

/// Gradients for one optimum-output step. The loss flows through the head
/// into the selected component and only into the expression that produced
/// it; the repository weights and the choice itself are constants, and the
/// previous state is not revisited.
LstmNet optm_local_grads(Component selected, const CellState& state, const LstmNet& params, double label);

/// Throws NumericError naming the first tensor holding a non-finite value.
template <class P>
void check_finite(const P& grads, std::string_view what) {
  for (const auto& [name, m] : grads.tensors()) {
    if (!all_finite(m->flat())) {
      throw NumericError(std::string(what) + ": non-finite gradient in " + name);
    }
  }
}

// ---------------------------------------------------------------------------

enum class OptimizerKind { sgd, adam };

std::string_view to_string(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view s);

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.0;  // 0 disables max-norm clipping
  long long steps = 0;
  std::vector<Mat> m;
  std::vector<Mat> v;
};

/// Applies one update to `params` in place. Tensors are matched by position.
void apply_step(OptimizerState& opt, std::span<Mat* const> params, std::span<const Mat* const> grads);

template <class P>
void step(OptimizerState& opt, P& params, const P& grads) {
  std::vector<Mat*> p;
  std::vector<const Mat*> g;
  for (auto& t : params.tensors()) p.push_back(t.second);
  for (const auto& t : grads.tensors()) g.push_back(t.second);
  apply_step(opt, p, g);
}

/// Parameter count of an LSTM cell as W = 4U² + 4UI + UO + 3U.
long long param_count(long long units, long long inputs, long long outputs);

}  // namespace optm
