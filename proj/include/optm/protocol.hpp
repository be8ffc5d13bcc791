// SPDX-License-Identifier: Apache-2.0
//
// Online evaluation protocol: fit on an initial window, then walk forward
// through a test window predicting each next mid-price, scoring it, and only
// then absorbing the event into training.
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "optm/lob.hpp"
#include "optm/models.hpp"

namespace optm {

enum class Regime { short_training, long_training };

std::string_view to_string(Regime r);
Regime parse_training_regime(std::string_view s);

struct EarlyStopConfig {
  int patience = 5;
  double min_delta = 0.0;
};

/// 1-based epoch at which training stops: the first epoch after which the
/// best loss has gone `patience` consecutive epochs without improving by
/// more than `min_delta`. nullopt if that never happens within `history`.
std::optional<std::size_t> early_stop_epoch(std::span<const double> history, int patience, double min_delta);

/// True when the history as a whole triggers a stop.
bool early_stop(std::span<const double> history, int patience, double min_delta);

/// Settings for a single run.
struct ScenarioConfig {
  std::size_t train_size = 1000;
  std::size_t test_len = 1000;
  Regime regime = Regime::short_training;
  int short_epochs = 5;
  int long_epochs = 60;
  EarlyStopConfig early_stop;
  NormMode norm = NormMode::zscore;
  int absorb_epochs = 1;

  void validate() const;
  int max_epochs() const { return regime == Regime::short_training ? short_epochs : long_epochs; }
};

struct EvalReport {
  ModelKind model = ModelKind::persistence;
  std::size_t units = 0;
  std::size_t train_size = 0;
  std::size_t test_len = 0;
  Regime regime = Regime::short_training;
  NormMode norm = NormMode::raw;
  int early_stop_patience = 0;
  double early_stop_min_delta = 0.0;
  double train_mse = 0.0;
  double test_mse = 0.0;
  int epochs_run = 0;
  bool stopped_early = false;
  double wall_clock_ms = 0.0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;
  std::vector<double> test_sq_errors;
  std::optional<std::array<long long, kComponents>> selections;
};

using ModelFactory = std::function<std::unique_ptr<Model>(const Normalizer&)>;

/// Throws ConfigError if the stream cannot hold the run; failures during the
/// run itself come back as a report with failed = true.
EvalReport run_scenario(const ScenarioConfig& cfg, const ModelSpec& spec, const LobStream& stream);
EvalReport run_scenario(const ScenarioConfig& cfg, const ModelSpec& spec, const LobStream& stream,
                        const ModelFactory& factory);

/// Grid over sizes, regimes and normalizations.
struct ProtocolConfig {
  std::vector<std::size_t> train_sizes = {1000, 2000, 5000, 10000, 15000};
  std::vector<Regime> regimes = {Regime::short_training};
  std::vector<NormMode> norms = {NormMode::zscore};
  ScenarioConfig base;  // test_len, epoch budgets, early stopping
  std::uint64_t seed = 0;
  int jobs = 0;  // worker threads; 0 = all cores

  void validate() const;
};

struct MatrixResult {
  std::vector<EvalReport> reports;
  bool any_failed() const;
};

/// One run per (spec, size, regime, normalization). Cells run concurrently
/// on up to cfg.jobs threads; report order is fixed by the grid order.
MatrixResult benchmark_matrix(const ProtocolConfig& cfg, std::span<const ModelSpec> specs, const LobStream& stream);

struct ResultFileOptions {
  bool include_timings = false;
};

/// One JSON record per line.
std::string results_jsonl(std::span<const EvalReport> reports, const ResultFileOptions& opts = {});
/// Per (size, regime, normalization) group, rows sorted by test MSE.
std::string ranked_table(std::span<const EvalReport> reports);

/// "%.5E", e.g. 2.05396E+12.
std::string format_mse(double v);

}  // namespace optm
