// SPDX-License-Identifier: Apache-2.0
//
// Limit-order-book events, normalization and the CSV/synthetic sources.
// Prices are integers in units of 1e-4 currency (price x 10,000); they become
// doubles only at the model boundary.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "optm/numerics.hpp"

namespace optm {

inline constexpr std::size_t kLevels = 10;
inline constexpr std::size_t kFeatures = 4 * kLevels;

struct LobEvent {
  std::array<std::int64_t, kLevels> ask_prices{};
  std::array<std::int64_t, kLevels> ask_volumes{};
  std::array<std::int64_t, kLevels> bid_prices{};
  std::array<std::int64_t, kLevels> bid_volumes{};

  friend bool operator==(const LobEvent&, const LobEvent&) = default;
};

/// Name of the first invariant the event breaks, if any.
std::optional<std::string> violated_rule(const LobEvent& e);

/// (best ask + best bid) / 2 in scaled price units.
double mid_price(const LobEvent& e);

/// The 40 raw features in CSV column order: ask prices, ask volumes, bid
/// prices, bid volumes.
Vec raw_features(const LobEvent& e);

struct LobStream {
  std::vector<LobEvent> events;
  std::string source;

  std::size_t size() const { return events.size(); }
  Vec mid_prices() const;
};

enum class NormMode { raw, minmax, zscore };

std::string_view to_string(NormMode m);
NormMode parse_norm_mode(std::string_view s);

/// Affine scaling of one column: x -> (x - offset) / scale.
struct ColumnScaler {
  double offset = 0.0;
  double scale = 1.0;

  double apply(double x) const { return (x - offset) / scale; }
  double invert(double z) const { return z * scale + offset; }

  /// Fits min/max or mean/population-std statistics. Returns nullopt when the
  /// statistic is degenerate (max == min, std == 0).
  static std::optional<ColumnScaler> fit(NormMode mode, std::span<const double> values);
};

class Normalizer {
 public:
  /// Identity normalizer.
  Normalizer();

  /// Fits per-feature and label (mid-price) statistics on a window of events.
  static Normalizer fit(NormMode mode, std::span<const LobEvent> window);

  NormMode mode() const { return mode_; }
  Vec apply(const LobEvent& e) const;
  double normalize_label(double mid) const { return label_.apply(mid); }
  double denormalize_label(double z) const { return label_.invert(z); }

  const std::array<ColumnScaler, kFeatures>& features() const { return features_; }
  const ColumnScaler& label() const { return label_; }

  static Normalizer from_parts(NormMode mode, std::array<ColumnScaler, kFeatures> features,
                               ColumnScaler label);

 private:
  NormMode mode_ = NormMode::raw;
  std::array<ColumnScaler, kFeatures> features_{};
  ColumnScaler label_{};
};

/// Header line of the LOB CSV format (no trailing newline).
std::string csv_header();

LobStream load_csv(const std::filesystem::path& path);
LobStream parse_csv(std::string_view text, std::string source = "<memory>");
void write_csv(const LobStream& stream, const std::filesystem::path& path);
std::string to_csv(const LobStream& stream);

enum class SyntheticRegime { random_walk, mean_revert, trend };

std::string_view to_string(SyntheticRegime r);
SyntheticRegime parse_regime(std::string_view s);

struct SyntheticConfig {
  std::size_t events = 1000;
  SyntheticRegime regime = SyntheticRegime::random_walk;
  std::uint64_t seed = 0;
  std::int64_t start_mid = 1'000'000;  // 100.00 at x10^4 scaling
  std::int64_t tick = 100;             // one cent
  double drift = 1.0;                  // ticks per event (trend)
  double noise = 2.0;                  // ticks, std of per-event shock (trend, mean_revert)
  double reversion = 0.05;             // pull per event toward start_mid (mean_revert)
  std::int64_t max_volume = 1000;
};

/// Stream whose mid-price follows the configured regime. The book is built
/// outward from the mid with a two-tick spread and one tick between levels.
LobStream generate_synthetic(const SyntheticConfig& cfg);

}  // namespace optm
