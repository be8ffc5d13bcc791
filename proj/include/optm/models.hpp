// SPDX-License-Identifier: Apache-2.0
//
// Forecasting models behind one streaming interface: predict the next
// mid-price from the current event, then absorb the realized label.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "optm/cells.hpp"
#include "optm/learning.hpp"
#include "optm/lob.hpp"

namespace optm {

enum class ModelKind { optm_lstm, lstm, gru, persistence, naive };

std::string_view to_string(ModelKind k);
/// Accepts the canonical names plus "optm" as shorthand for optm_lstm.
ModelKind parse_model_kind(std::string_view s);

struct ModelSpec {
  ModelKind kind = ModelKind::optm_lstm;
  std::size_t units = 4;
  std::vector<std::size_t> head = {4, 1};
  std::size_t look_back = 1;
  std::size_t batch_size = 1;  // training-phase minibatch for lstm/gru
  OptimizerKind optimizer = OptimizerKind::adam;
  double lr = 1e-3;
  double clip_norm = 0.0;
  RepoConfig repo;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Squared error in the units MSE is reported in: scaled price for raw
/// normalization, normalized label units otherwise.
double reporting_sq_error(const Normalizer& n, double predicted, double realized);

/// A checkpoint is a versioned flat map of named tensors plus metadata.
struct Checkpoint {
  static constexpr int kVersion = 1;
  int version = kVersion;
  std::map<std::string, std::string> meta;
  std::map<std::string, Mat> tensors;

  std::string to_json() const;
  static Checkpoint from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

class Model {
 public:
  Model(ModelSpec spec, Normalizer norm);
  virtual ~Model() = default;

  const ModelSpec& spec() const { return spec_; }
  const Normalizer& normalizer() const { return norm_; }
  long long events_absorbed() const { return absorbed_; }

  /// Next mid-price in scaled price units. Never mutates the model.
  virtual double predict_next(const LobEvent& e) const = 0;

  /// Runs `epochs` updates on the single pair (e, y_next), then advances the
  /// recurrent carry past e.
  void absorb(const LobEvent& e, double y_next, int epochs);

  /// Clears recurrent state (run or epoch start). Learned parameters stay.
  virtual void reset_carry() {}

  /// One pass over consecutive (event, next mid) pairs of `window`,
  /// predicting each before learning from it. Returns the mean reporting
  /// squared error, or 0 if the window holds fewer than two events.
  virtual double train_epoch(std::span<const LobEvent> window, int epoch);

  Checkpoint to_checkpoint() const;

 protected:
  virtual void do_absorb(const LobEvent& e, double y_next, int epochs) = 0;
  virtual void save_state(Checkpoint& ck) const = 0;
  virtual void load_state(const Checkpoint& ck) = 0;

  ModelSpec spec_;
  Normalizer norm_;
  long long absorbed_ = 0;

  friend std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& ck);
};

/// Fresh model with parameters initialized from spec.seed.
std::unique_ptr<Model> make_model(const ModelSpec& spec, const Normalizer& norm);
std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& ck);

/// Flat prediction: the next mid equals the current one.
class PersistenceModel final : public Model {
 public:
  using Model::Model;
  double predict_next(const LobEvent& e) const override;

 protected:
  void do_absorb(const LobEvent&, double, int) override {}
  void save_state(Checkpoint&) const override {}
  void load_state(const Checkpoint&) override {}
};

/// Constant prediction: the running mean of every target seen so far.
class NaiveModel final : public Model {
 public:
  using Model::Model;
  double predict_next(const LobEvent& e) const override;
  double train_epoch(std::span<const LobEvent> window, int epoch) override;
  bool fitted() const { return count_ > 0; }

 protected:
  void do_absorb(const LobEvent& e, double y_next, int epochs) override;
  void save_state(Checkpoint& ck) const override;
  void load_state(const Checkpoint& ck) override;

 private:
  double sum_ = 0.0;
  long long count_ = 0;
};

/// One past event inside the look-back window: its features and the
/// recurrent state it started from.
struct WindowEntry {
  Vec x;
  Vec h_prev;
  Vec c_prev;
};

class LstmModel final : public Model {
 public:
  LstmModel(ModelSpec spec, Normalizer norm);
  double predict_next(const LobEvent& e) const override;
  void reset_carry() override;
  double train_epoch(std::span<const LobEvent> window, int epoch) override;

  const LstmNet& params() const { return params_; }
  LstmNet& params() { return params_; }

 protected:
  void do_absorb(const LobEvent& e, double y_next, int epochs) override;
  void save_state(Checkpoint& ck) const override;
  void load_state(const Checkpoint& ck) override;

 private:
  std::vector<CellState> forward_window(const Vec& x) const;
  void advance(const Vec& x, const CellState& last);

  LstmNet params_;
  OptimizerState opt_;
  std::vector<WindowEntry> history_;
  Vec h_, c_;
};

class GruModel final : public Model {
 public:
  GruModel(ModelSpec spec, Normalizer norm);
  double predict_next(const LobEvent& e) const override;
  void reset_carry() override;
  double train_epoch(std::span<const LobEvent> window, int epoch) override;

  const GruNet& params() const { return params_; }

 protected:
  void do_absorb(const LobEvent& e, double y_next, int epochs) override;
  void save_state(Checkpoint& ck) const override;
  void load_state(const Checkpoint& ck) override;

 private:
  std::vector<GruState> forward_window(const Vec& x) const;
  void advance(const Vec& x, const GruState& last);

  GruNet params_;
  OptimizerState opt_;
  std::vector<WindowEntry> history_;
  Vec h_;
};

/// Optimum-output LSTM: look-back 1, batch 1. The hidden carry is the
/// selected component; the cell state and importance weights carry as-is.
class OptmModel final : public Model {
 public:
  OptmModel(ModelSpec spec, Normalizer norm);
  double predict_next(const LobEvent& e) const override;
  void reset_carry() override;

  /// Forward pass for `e` from the current carry.
  OptmStep step(const LobEvent& e) const;

  const LstmNet& params() const { return params_; }
  LstmNet& params() { return params_; }
  const Vec& theta() const { return theta_; }
  /// How often each component has been selected on absorbed events.
  const std::array<long long, kComponents>& selection_counts() const { return selections_; }

 protected:
  void do_absorb(const LobEvent& e, double y_next, int epochs) override;
  void save_state(Checkpoint& ck) const override;
  void load_state(const Checkpoint& ck) override;

 private:
  LstmNet params_;
  OptimizerState opt_;
  Vec h_, c_, theta_;
  std::array<long long, kComponents> selections_{};
};

}  // namespace optm
