// SPDX-License-Identifier: Apache-2.0
//
// Recurrent cells: the standard LSTM, a GRU, and the optimum-output LSTM,
// which ranks its own gates and states against the current mid-price and
// emits the most important one as its hidden output.
#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "optm/numerics.hpp"

namespace optm {

/// Parameters of one LSTM layer. W_* map the input (U x D), U_* the previous
/// hidden state (U x U); biases are stored as U x 1 matrices.
struct LstmWeights {
  Mat w_f, w_i, w_c, w_o;
  Mat u_f, u_i, u_c, u_o;
  Mat b_f, b_i, b_c, b_o;

  static LstmWeights zeros(std::size_t units, std::size_t inputs);
  /// Glorot-uniform weights, zero biases.
  static LstmWeights glorot(std::size_t units, std::size_t inputs, Rng& rng);

  std::size_t units() const { return w_f.rows(); }
  std::size_t inputs() const { return w_f.cols(); }

  /// Every tensor with a stable name, in a fixed order.
  std::vector<std::pair<std::string_view, Mat*>> tensors();
  std::vector<std::pair<std::string_view, const Mat*>> tensors() const;
};

/// Everything one LSTM step computes, plus the inputs it consumed.
struct CellState {
  Vec f, i, c_tilde, o, c, h;
  Vec h_prev, c_prev, x;
};

CellState lstm_forward(const LstmWeights& w, std::span<const double> x,
                       std::span<const double> h_prev, std::span<const double> c_prev);

/// Update gate z, reset gate r, candidate n:
///   h = z ⊙ h_prev + (1 - z) ⊙ n,  n = tanh(W_n x + U_n (r ⊙ h_prev) + b_n)
struct GruWeights {
  Mat w_z, w_r, w_n;
  Mat u_z, u_r, u_n;
  Mat b_z, b_r, b_n;

  static GruWeights zeros(std::size_t units, std::size_t inputs);
  static GruWeights glorot(std::size_t units, std::size_t inputs, Rng& rng);

  std::size_t units() const { return w_z.rows(); }
  std::size_t inputs() const { return w_z.cols(); }

  std::vector<std::pair<std::string_view, Mat*>> tensors();
  std::vector<std::pair<std::string_view, const Mat*>> tensors() const;
};

struct GruState {
  Vec z, r, n, h;
  Vec h_prev, x;
};

GruState gru_forward(const GruWeights& w, std::span<const double> x, std::span<const double> h_prev);

// ---------------------------------------------------------------------------
// Feature repository

/// Repository components in concatenation order. Values are 1-based to
/// match the usual numbering (1 = forget gate ... 6 = hidden state).
enum class Component : int { forget = 1, input = 2, candidate = 3, output = 4, cell = 5, hidden = 6 };

inline constexpr int kComponents = 6;
std::string_view to_string(Component c);

enum class ThetaInit { warm, zero };
enum class ImportanceMode { signed_mean, absolute_mean };

struct RepoConfig {
  double alpha = 1e-4;
  int iters = 10;
  ThetaInit theta_init = ThetaInit::warm;
  ImportanceMode importance = ImportanceMode::signed_mean;

  void validate() const;
};

struct RepoResult {
  Vec r;      // [f | i | c~ | o | c | h], length 6U
  Vec theta;  // importance weights vector
  std::array<double, kComponents> ai{};
  Component selected = Component::hidden;
  Vec h_new;
};

/// r = [f | i | c~ | o | c | h]
Vec concat_repo(const CellState& s);

/// The U-wide block of `s` named by `c`.
const Vec& component_vector(const CellState& s, Component c);

/// Gradient descent on the squared error of the scalar fit y ≈ r·θ, run for
/// exactly `iters` steps from theta0. Throws NumericError on divergence.
Vec online_gd(std::span<const double> r, double y, std::span<const double> theta0, double alpha,
              int iters);

/// Per-component average of θ over each contiguous U-block.
std::array<double, kComponents> average_importance(std::span<const double> theta, std::size_t units,
                                                   ImportanceMode mode = ImportanceMode::signed_mean);

/// argmax over the averages; ties go to the lowest component index.
Component select_component(const std::array<double, kComponents>& ai);

struct OptmStep {
  CellState cell;
  RepoResult repo;
  Vec c_next;      // the cell state, unchanged by selection
  Vec theta_next;  // carried to the next event
};

/// One optimum-output LSTM step. `y_current` is the already-known label of
/// the current event; `theta_carry` seeds the regression when warm-starting.
OptmStep optm_forward(const LstmWeights& w, std::span<const double> x, std::span<const double> h_prev,
                      std::span<const double> c_prev, double y_current, const RepoConfig& cfg,
                      std::span<const double> theta_carry);

}  // namespace optm
