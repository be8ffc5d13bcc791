// SPDX-License-Identifier: Apache-2.0
#include "optm/protocol.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <tuple>

#include <json.hpp>

#include "optm/error.hpp"

namespace optm {

std::string_view to_string(Regime r) { return r == Regime::short_training ? "short" : "long"; }

Regime parse_training_regime(std::string_view s) {
  if (s == "short") return Regime::short_training;
  if (s == "long") return Regime::long_training;
  throw ConfigError("unknown training regime '" + std::string(s) + "' (expected short or long)");
}

std::optional<std::size_t> early_stop_epoch(std::span<const double> history, int patience, double min_delta) {
  if (history.empty() || patience < 1) return std::nullopt;
  double best = history[0];
  int waited = 0;
  for (std::size_t e = 1; e < history.size(); ++e) {
    if (history[e] < best - min_delta) {
      best = history[e];
      waited = 0;
    } else if (++waited >= patience) {
      return e + 1;
    }
  }
  return std::nullopt;
}

bool early_stop(std::span<const double> history, int patience, double min_delta) {
  return early_stop_epoch(history, patience, min_delta).has_value();
}

void ScenarioConfig::validate() const {
  if (train_size < 1) throw ConfigError("train_size must be at least 1");
  if (test_len < 1) throw ConfigError("test_len must be at least 1");
  if (short_epochs < 1 || short_epochs > 5) throw ConfigError("short regime allows 1 to 5 epochs");
  if (long_epochs < 1 || long_epochs > 60) throw ConfigError("long regime allows 1 to 60 epochs");
  if (early_stop.patience < 1) throw ConfigError("early-stop patience must be at least 1");
  if (!(early_stop.min_delta >= 0.0)) throw ConfigError("early-stop min_delta must be >= 0");
  if (absorb_epochs < 0) throw ConfigError("absorb epochs must be >= 0");
}

EvalReport run_scenario(const ScenarioConfig& cfg, const ModelSpec& spec, const LobStream& stream) {
  return run_scenario(cfg, spec, stream, [&spec](const Normalizer& n) { return make_model(spec, n); });
}

EvalReport run_scenario(const ScenarioConfig& cfg, const ModelSpec& spec, const LobStream& stream,
                        const ModelFactory& factory) {
  cfg.validate();
  spec.validate();
  // Test predictions start at the last training event, so the final test
  // target is event train_size + test_len - 1.
  if (stream.size() < cfg.train_size + cfg.test_len) {
    throw ConfigError("stream of " + std::to_string(stream.size()) + " events is too short for train_size " +
                      std::to_string(cfg.train_size) + " + test_len " + std::to_string(cfg.test_len));
  }

  EvalReport r;
  r.model = spec.kind;
  r.units = spec.kind == ModelKind::persistence || spec.kind == ModelKind::naive ? 0 : spec.units;
  r.train_size = cfg.train_size;
  r.test_len = cfg.test_len;
  r.regime = cfg.regime;
  r.norm = cfg.norm;
  r.early_stop_patience = cfg.early_stop.patience;
  r.early_stop_min_delta = cfg.early_stop.min_delta;
  r.seed = spec.seed;

  const auto t0 = std::chrono::steady_clock::now();
  try {
    const std::span<const LobEvent> events(stream.events);
    const auto train = events.first(cfg.train_size);
    const Normalizer norm = Normalizer::fit(cfg.norm, train);
    auto model = factory(norm);

    std::vector<double> history;
    const int budget = cfg.max_epochs();
    for (int epoch = 0; epoch < budget; ++epoch) {
      const double loss = model->train_epoch(train, epoch);
      if (!std::isfinite(loss)) throw NumericError("training loss diverged at epoch " + std::to_string(epoch + 1));
      history.push_back(loss);
      if (cfg.regime == Regime::long_training &&
          early_stop(history, cfg.early_stop.patience, cfg.early_stop.min_delta)) {
        r.stopped_early = epoch + 1 < budget;
        break;
      }
    }
    r.epochs_run = static_cast<int>(history.size());
    r.train_mse = history.empty() ? 0.0 : history.back();

    r.test_sq_errors.reserve(cfg.test_len);
    for (std::size_t j = 0; j < cfg.test_len; ++j) {
      const std::size_t k = cfg.train_size - 1 + j;
      const double realized = mid_price(events[k + 1]);
      const double predicted = model->predict_next(events[k]);
      const double sq = reporting_sq_error(norm, predicted, realized);
      if (!std::isfinite(sq)) throw NumericError("non-finite test error at event " + std::to_string(k));
      r.test_sq_errors.push_back(sq);
      model->absorb(events[k], realized, cfg.absorb_epochs);
    }
    r.test_mse = std::accumulate(r.test_sq_errors.begin(), r.test_sq_errors.end(), 0.0) /
                 static_cast<double>(r.test_sq_errors.size());

    if (const auto* optm = dynamic_cast<const OptmModel*>(model.get())) r.selections = optm->selection_counts();
  } catch (const Error& e) {
    r.failed = true;
    r.failure = e.what();
    r.train_mse = std::numeric_limits<double>::quiet_NaN();
    r.test_mse = std::numeric_limits<double>::quiet_NaN();
  }
  r.wall_clock_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

void ProtocolConfig::validate() const {
  if (train_sizes.empty()) throw ConfigError("at least one train size is required");
  if (regimes.empty()) throw ConfigError("at least one training regime is required");
  if (norms.empty()) throw ConfigError("at least one normalization mode is required");
  if (jobs < 0) throw ConfigError("jobs must be >= 0");
  base.validate();
}

bool MatrixResult::any_failed() const {
  return std::any_of(reports.begin(), reports.end(), [](const EvalReport& r) { return r.failed; });
}

MatrixResult benchmark_matrix(const ProtocolConfig& cfg, std::span<const ModelSpec> specs, const LobStream& stream) {
  cfg.validate();
  if (specs.empty()) throw ConfigError("at least one model is required");

  struct Cell {
    ScenarioConfig scenario;
    ModelSpec spec;
  };
  std::vector<Cell> cells;
  for (auto size : cfg.train_sizes) {
    for (auto regime : cfg.regimes) {
      for (auto norm : cfg.norms) {
        for (const auto& s : specs) {
          Cell c{cfg.base, s};
          c.scenario.train_size = size;
          c.scenario.regime = regime;
          c.scenario.norm = norm;
          c.spec.seed = cfg.seed;
          c.spec.validate();
          if (stream.size() < size + cfg.base.test_len) {
            throw ConfigError("stream of " + std::to_string(stream.size()) + " events is too short for train_size " +
                              std::to_string(size) + " + test_len " + std::to_string(cfg.base.test_len));
          }
          cells.push_back(std::move(c));
        }
      }
    }
  }

  MatrixResult out;
  out.reports.resize(cells.size());
  const int threads = cfg.jobs > 0 ? cfg.jobs : omp_get_max_threads();
  const auto n = static_cast<std::ptrdiff_t>(cells.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    out.reports[k] = run_scenario(cells[k].scenario, cells[k].spec, stream);
  }
  return out;
}

namespace {

nlohmann::ordered_json mse_json(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

}  // namespace

std::string format_mse(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.5E", v);
  return buf;
}

std::string results_jsonl(std::span<const EvalReport> reports, const ResultFileOptions& opts) {
  std::string out;
  for (const auto& r : reports) {
    nlohmann::ordered_json j;
    j["model"] = to_string(r.model);
    j["units"] = r.units;
    j["train_size"] = r.train_size;
    j["test_len"] = r.test_len;
    j["regime"] = to_string(r.regime);
    j["normalization"] = to_string(r.norm);
    j["epochs_run"] = r.epochs_run;
    j["train_mse"] = mse_json(r.train_mse);
    j["test_mse"] = mse_json(r.test_mse);
    j["seed"] = r.seed;
    j["status"] = r.failed ? "failed" : "ok";
    if (r.failed) j["error"] = r.failure;
    if (r.regime == Regime::long_training) {
      j["early_stop_patience"] = r.early_stop_patience;
      j["early_stop_min_delta"] = r.early_stop_min_delta;
      j["stopped_early"] = r.stopped_early;
    }
    if (r.selections) j["selection_counts"] = *r.selections;
    if (opts.include_timings) j["wall_clock_ms"] = r.wall_clock_ms;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string ranked_table(std::span<const EvalReport> reports) {
  using Key = std::tuple<std::size_t, int, int>;
  std::map<Key, std::vector<const EvalReport*>> groups;
  std::vector<Key> order;
  for (const auto& r : reports) {
    Key key{r.train_size, static_cast<int>(r.regime), static_cast<int>(r.norm)};
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&r);
  }

  std::string out;
  char line[160];
  for (const auto& key : order) {
    auto rows = groups[key];
    std::stable_sort(rows.begin(), rows.end(), [](const EvalReport* a, const EvalReport* b) {
      if (a->failed != b->failed) return !a->failed;
      return !a->failed && a->test_mse < b->test_mse;
    });
    const EvalReport& first = *rows.front();
    std::snprintf(line, sizeof line, "# train_size=%zu regime=%s normalization=%s\n", first.train_size,
                  std::string(to_string(first.regime)).c_str(), std::string(to_string(first.norm)).c_str());
    out += line;
    std::snprintf(line, sizeof line, "%-4s %-12s %-6s %-13s %-13s %s\n", "rank", "model", "units", "mse_train",
                  "mse_test", "epochs");
    out += line;
    int rank = 1;
    for (const auto* r : rows) {
      const std::string units = r->units ? std::to_string(r->units) : "-";
      if (r->failed) {
        std::snprintf(line, sizeof line, "%-4s %-12s %-6s ", "-", std::string(to_string(r->model)).c_str(),
                      units.c_str());
        out += line;
        out += "FAILED: " + r->failure + "\n";
        continue;
      } else {
        std::snprintf(line, sizeof line, "%-4d %-12s %-6s %-13s %-13s %d\n", rank++,
                      std::string(to_string(r->model)).c_str(), units.c_str(), format_mse(r->train_mse).c_str(),
                      format_mse(r->test_mse).c_str(), r->epochs_run);
      }
      out += line;
    }
    out += '\n';
  }
  return out;
}

}  // namespace optm
