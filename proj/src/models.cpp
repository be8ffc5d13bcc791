// SPDX-License-Identifier: Apache-2.0
#include "optm/models.hpp"

#include <cmath>
#include <optional>

#include "optm/error.hpp"

namespace optm {

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::optm_lstm: return "optm_lstm";
    case ModelKind::lstm: return "lstm";
    case ModelKind::gru: return "gru";
    case ModelKind::persistence: return "persistence";
    case ModelKind::naive: return "naive";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "optm" || s == "optm_lstm" || s == "optm-lstm") return ModelKind::optm_lstm;
  if (s == "lstm") return ModelKind::lstm;
  if (s == "gru") return ModelKind::gru;
  if (s == "persistence") return ModelKind::persistence;
  if (s == "naive") return ModelKind::naive;
  throw ConfigError("unknown model '" + std::string(s) +
                    "' (expected optm, lstm, gru, persistence or naive)");
}

void ModelSpec::validate() const {
  const bool recurrent = kind == ModelKind::optm_lstm || kind == ModelKind::lstm || kind == ModelKind::gru;
  if (!recurrent) return;
  if (units == 0) throw ConfigError("model: units must be positive");
  if (head.empty() || head.back() != 1) throw ConfigError("model: dense head must end in one unit");
  if (look_back == 0) throw ConfigError("model: look_back must be at least 1");
  if (batch_size == 0) throw ConfigError("model: batch_size must be at least 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("model: learning rate must be finite and >= 0");
  if (kind == ModelKind::optm_lstm) {
    if (look_back != 1) throw ConfigError("model: optm_lstm requires look_back = 1");
    if (batch_size != 1) throw ConfigError("model: optm_lstm requires batch_size = 1");
    repo.validate();
  }
}

double reporting_sq_error(const Normalizer& n, double predicted, double realized) {
  double d = predicted - realized;
  if (n.mode() != NormMode::raw) d /= n.label().scale;
  return d * d;
}

Model::Model(ModelSpec spec, Normalizer norm) : spec_(std::move(spec)), norm_(std::move(norm)) {
  spec_.validate();
}

void Model::absorb(const LobEvent& e, double y_next, int epochs) {
  if (epochs < 0) throw ConfigError("absorb: epochs must be >= 0");
  do_absorb(e, y_next, epochs);
  ++absorbed_;
}

double Model::train_epoch(std::span<const LobEvent> window, int /*epoch*/) {
  reset_carry();
  if (window.size() < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < window.size(); ++k) {
    const double y = mid_price(window[k + 1]);
    sum += reporting_sq_error(norm_, predict_next(window[k]), y);
    absorb(window[k], y, 1);
  }
  return sum / static_cast<double>(window.size() - 1);
}

std::unique_ptr<Model> make_model(const ModelSpec& spec, const Normalizer& norm) {
  switch (spec.kind) {
    case ModelKind::optm_lstm: return std::make_unique<OptmModel>(spec, norm);
    case ModelKind::lstm: return std::make_unique<LstmModel>(spec, norm);
    case ModelKind::gru: return std::make_unique<GruModel>(spec, norm);
    case ModelKind::persistence: return std::make_unique<PersistenceModel>(spec, norm);
    case ModelKind::naive: return std::make_unique<NaiveModel>(spec, norm);
  }
  throw ConfigError("make_model: invalid kind");
}

// ---------------------------------------------------------------------------

double PersistenceModel::predict_next(const LobEvent& e) const { return mid_price(e); }

double NaiveModel::predict_next(const LobEvent&) const {
  if (count_ == 0) throw StateError("naive regressor has no fitted constant (no training targets)");
  return sum_ / static_cast<double>(count_);
}

void NaiveModel::do_absorb(const LobEvent&, double y_next, int epochs) {
  // The constant is a plain mean of distinct targets; repeated epochs on
  // one pair do not reweight it.
  if (epochs == 0) return;
  sum_ += y_next;
  ++count_;
}

double NaiveModel::train_epoch(std::span<const LobEvent> window, int epoch) {
  if (window.size() < 2) return 0.0;
  if (epoch == 0) {
    for (std::size_t k = 0; k + 1 < window.size(); ++k) absorb(window[k], mid_price(window[k + 1]), 1);
  }
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < window.size(); ++k) {
    sum += reporting_sq_error(norm_, predict_next(window[k]), mid_price(window[k + 1]));
  }
  return sum / static_cast<double>(window.size() - 1);
}

// ---------------------------------------------------------------------------

namespace {

OptimizerState make_optimizer(const ModelSpec& spec) {
  OptimizerState o;
  o.kind = spec.optimizer;
  o.lr = spec.lr;
  o.clip_norm = spec.clip_norm;
  return o;
}

void check_prediction(double y, std::string_view who) {
  if (!std::isfinite(y)) throw NumericError(std::string(who) + ": non-finite prediction");
}

template <class P>
void add_scaled(P& acc, const P& g) {
  auto a = acc.tensors();
  auto b = g.tensors();
  for (std::size_t k = 0; k < a.size(); ++k) add_inplace(a[k].second->flat(), b[k].second->flat());
}

template <class P>
void scale(P& acc, double s) {
  for (auto& [name, m] : acc.tensors())
    for (double& x : m->flat()) x *= s;
}

/// Minibatch bookkeeping shared by the LSTM and GRU training loops.
template <class P>
struct GradientBatch {
  std::optional<P> sum;
  std::size_t count = 0;

  void add(P g) {
    if (!sum) {
      sum = std::move(g);
    } else {
      add_scaled(*sum, g);
    }
    ++count;
  }

  void flush(OptimizerState& opt, P& params) {
    if (count == 0) return;
    scale(*sum, 1.0 / static_cast<double>(count));
    step(opt, params, *sum);
    sum.reset();
    count = 0;
  }
};

}  // namespace

LstmModel::LstmModel(ModelSpec spec, Normalizer norm) : Model(std::move(spec), std::move(norm)) {
  Rng rng(spec_.seed);
  params_.cell = LstmWeights::glorot(spec_.units, kFeatures, rng);
  params_.head = HeadWeights::glorot(spec_.units, spec_.head, rng);
  opt_ = make_optimizer(spec_);
  reset_carry();
}

void LstmModel::reset_carry() {
  history_.clear();
  h_.assign(spec_.units, 0.0);
  c_.assign(spec_.units, 0.0);
}

std::vector<CellState> LstmModel::forward_window(const Vec& x) const {
  std::vector<Vec> xs;
  for (const auto& w : history_) xs.push_back(w.x);
  xs.push_back(x);
  if (history_.empty()) return lstm_unroll(params_.cell, xs, h_, c_);
  return lstm_unroll(params_.cell, xs, history_.front().h_prev, history_.front().c_prev);
}

void LstmModel::advance(const Vec& x, const CellState& last) {
  if (spec_.look_back > 1) {
    history_.push_back({x, last.h_prev, last.c_prev});
    if (history_.size() > spec_.look_back - 1) history_.erase(history_.begin());
  }
  h_ = last.h;
  c_ = last.c;
}

double LstmModel::predict_next(const LobEvent& e) const {
  const auto traj = forward_window(norm_.apply(e));
  const double y = norm_.denormalize_label(params_.head.forward(traj.back().h));
  check_prediction(y, "lstm");
  return y;
}

void LstmModel::do_absorb(const LobEvent& e, double y_next, int epochs) {
  const Vec x = norm_.apply(e);
  StepLabels labels(std::min(history_.size() + 1, spec_.look_back));
  labels.back() = norm_.normalize_label(y_next);
  const auto first = forward_window(x);
  for (int k = 0; k < epochs; ++k) {
    const LstmNet g = bptt_grads(params_, k == 0 ? first : forward_window(x), labels);
    step(opt_, params_, g);
  }
  advance(x, first.back());
}

double LstmModel::train_epoch(std::span<const LobEvent> window, int epoch) {
  if (spec_.batch_size == 1) return Model::train_epoch(window, epoch);
  reset_carry();
  if (window.size() < 2) return 0.0;
  GradientBatch<LstmNet> batch;
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < window.size(); ++k) {
    const double y = mid_price(window[k + 1]);
    const Vec x = norm_.apply(window[k]);
    const auto traj = forward_window(x);
    const double pred = norm_.denormalize_label(params_.head.forward(traj.back().h));
    check_prediction(pred, "lstm");
    sum += reporting_sq_error(norm_, pred, y);
    StepLabels labels(traj.size());
    labels.back() = norm_.normalize_label(y);
    batch.add(bptt_grads(params_, traj, labels));
    if (batch.count == spec_.batch_size) batch.flush(opt_, params_);
    advance(x, traj.back());
    ++absorbed_;
  }
  batch.flush(opt_, params_);
  return sum / static_cast<double>(window.size() - 1);
}

// ---------------------------------------------------------------------------

GruModel::GruModel(ModelSpec spec, Normalizer norm) : Model(std::move(spec), std::move(norm)) {
  Rng rng(spec_.seed);
  params_.cell = GruWeights::glorot(spec_.units, kFeatures, rng);
  params_.head = HeadWeights::glorot(spec_.units, spec_.head, rng);
  opt_ = make_optimizer(spec_);
  reset_carry();
}

void GruModel::reset_carry() {
  history_.clear();
  h_.assign(spec_.units, 0.0);
}

std::vector<GruState> GruModel::forward_window(const Vec& x) const {
  std::vector<Vec> xs;
  for (const auto& w : history_) xs.push_back(w.x);
  xs.push_back(x);
  return gru_unroll(params_.cell, xs, history_.empty() ? h_ : history_.front().h_prev);
}

void GruModel::advance(const Vec& x, const GruState& last) {
  if (spec_.look_back > 1) {
    history_.push_back({x, last.h_prev, {}});
    if (history_.size() > spec_.look_back - 1) history_.erase(history_.begin());
  }
  h_ = last.h;
}

double GruModel::predict_next(const LobEvent& e) const {
  const auto traj = forward_window(norm_.apply(e));
  const double y = norm_.denormalize_label(params_.head.forward(traj.back().h));
  check_prediction(y, "gru");
  return y;
}

void GruModel::do_absorb(const LobEvent& e, double y_next, int epochs) {
  const Vec x = norm_.apply(e);
  StepLabels labels(std::min(history_.size() + 1, spec_.look_back));
  labels.back() = norm_.normalize_label(y_next);
  const auto first = forward_window(x);
  for (int k = 0; k < epochs; ++k) {
    const GruNet g = bptt_grads(params_, k == 0 ? first : forward_window(x), labels);
    step(opt_, params_, g);
  }
  advance(x, first.back());
}

double GruModel::train_epoch(std::span<const LobEvent> window, int epoch) {
  if (spec_.batch_size == 1) return Model::train_epoch(window, epoch);
  reset_carry();
  if (window.size() < 2) return 0.0;
  GradientBatch<GruNet> batch;
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < window.size(); ++k) {
    const double y = mid_price(window[k + 1]);
    const Vec x = norm_.apply(window[k]);
    const auto traj = forward_window(x);
    const double pred = norm_.denormalize_label(params_.head.forward(traj.back().h));
    check_prediction(pred, "gru");
    sum += reporting_sq_error(norm_, pred, y);
    StepLabels labels(traj.size());
    labels.back() = norm_.normalize_label(y);
    batch.add(bptt_grads(params_, traj, labels));
    if (batch.count == spec_.batch_size) batch.flush(opt_, params_);
    advance(x, traj.back());
    ++absorbed_;
  }
  batch.flush(opt_, params_);
  return sum / static_cast<double>(window.size() - 1);
}

// ---------------------------------------------------------------------------

OptmModel::OptmModel(ModelSpec spec, Normalizer norm) : Model(std::move(spec), std::move(norm)) {
  Rng rng(spec_.seed);
  params_.cell = LstmWeights::glorot(spec_.units, kFeatures, rng);
  params_.head = HeadWeights::glorot(spec_.units, spec_.head, rng);
  opt_ = make_optimizer(spec_);
  reset_carry();
}

void OptmModel::reset_carry() {
  h_.assign(spec_.units, 0.0);
  c_.assign(spec_.units, 0.0);
  theta_.assign(kComponents * spec_.units, 0.0);
}

OptmStep OptmModel::step(const LobEvent& e) const {
  // The repository regresses on the current, already known mid-price.
  return optm_forward(params_.cell, norm_.apply(e), h_, c_, norm_.normalize_label(mid_price(e)), spec_.repo,
                      theta_);
}

double OptmModel::predict_next(const LobEvent& e) const {
  const OptmStep s = step(e);
  const double y = norm_.denormalize_label(params_.head.forward(s.repo.h_new));
  check_prediction(y, "optm_lstm");
  return y;
}

void OptmModel::do_absorb(const LobEvent& e, double y_next, int epochs) {
  const OptmStep first = step(e);
  const double label = norm_.normalize_label(y_next);
  for (int k = 0; k < epochs; ++k) {
    const OptmStep s = k == 0 ? first : step(e);
    const LstmNet g = optm_local_grads(s.repo.selected, s.cell, params_, label);
    optm::step(opt_, params_, g);
  }
  h_ = first.repo.h_new;
  c_ = first.c_next;
  theta_ = first.theta_next;
  ++selections_[static_cast<int>(first.repo.selected) - 1];
}

}  // namespace optm
