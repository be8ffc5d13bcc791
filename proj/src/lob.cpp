// SPDX-License-Identifier: Apache-2.0
#include "optm/lob.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "optm/error.hpp"

namespace optm {

std::optional<std::string> violated_rule(const LobEvent& e) {
  if (e.ask_prices[0] <= e.bid_prices[0]) return "positive spread";
  for (std::size_t k = 1; k < kLevels; ++k) {
    if (e.ask_prices[k] < e.ask_prices[k - 1]) return "ask prices nondecreasing";
    if (e.bid_prices[k] > e.bid_prices[k - 1]) return "bid prices nonincreasing";
  }
  for (std::size_t k = 0; k < kLevels; ++k) {
    if (e.ask_volumes[k] < 0 || e.bid_volumes[k] < 0) return "volumes nonnegative";
  }
  return std::nullopt;
}

double mid_price(const LobEvent& e) {
  return (static_cast<double>(e.ask_prices[0]) + static_cast<double>(e.bid_prices[0])) / 2.0;
}

Vec raw_features(const LobEvent& e) {
  Vec f;
  f.reserve(kFeatures);
  for (auto x : e.ask_prices) f.push_back(static_cast<double>(x));
  for (auto x : e.ask_volumes) f.push_back(static_cast<double>(x));
  for (auto x : e.bid_prices) f.push_back(static_cast<double>(x));
  for (auto x : e.bid_volumes) f.push_back(static_cast<double>(x));
  return f;
}

Vec LobStream::mid_prices() const {
  Vec m;
  m.reserve(events.size());
  for (const auto& e : events) m.push_back(mid_price(e));
  return m;
}

std::string_view to_string(NormMode m) {
  switch (m) {
    case NormMode::raw: return "raw";
    case NormMode::minmax: return "minmax";
    case NormMode::zscore: return "zscore";
  }
  return "?";
}

NormMode parse_norm_mode(std::string_view s) {
  if (s == "raw") return NormMode::raw;
  if (s == "minmax") return NormMode::minmax;
  if (s == "zscore") return NormMode::zscore;
  throw ConfigError("unknown normalization mode '" + std::string(s) +
                    "' (expected raw, minmax or zscore)");
}

std::optional<ColumnScaler> ColumnScaler::fit(NormMode mode, std::span<const double> values) {
  if (values.empty()) return std::nullopt;
  switch (mode) {
    case NormMode::raw:
      return ColumnScaler{};
    case NormMode::minmax: {
      auto [lo, hi] = std::minmax_element(values.begin(), values.end());
      if (!(*hi > *lo)) return std::nullopt;
      return ColumnScaler{*lo, *hi - *lo};
    }
    case NormMode::zscore: {
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      double var = 0.0;
      for (double v : values) var += (v - mean) * (v - mean);
      var /= static_cast<double>(values.size());
      if (!(var > 0.0)) return std::nullopt;
      return ColumnScaler{mean, std::sqrt(var)};
    }
  }
  return std::nullopt;
}

Normalizer::Normalizer() = default;

Normalizer Normalizer::fit(NormMode mode, std::span<const LobEvent> window) {
  if (window.empty()) throw ConfigError("normalizer: empty fitting window");
  Normalizer n;
  n.mode_ = mode;
  if (mode == NormMode::raw) return n;

  const char* stat = mode == NormMode::minmax ? "max == min" : "std == 0";
  std::vector<double> column(window.size());
  for (std::size_t f = 0; f < kFeatures; ++f) {
    for (std::size_t t = 0; t < window.size(); ++t) {
      // raw_features allocates; index directly into the arrays instead.
      const auto& e = window[t];
      const std::size_t lvl = f % kLevels;
      switch (f / kLevels) {
        case 0: column[t] = static_cast<double>(e.ask_prices[lvl]); break;
        case 1: column[t] = static_cast<double>(e.ask_volumes[lvl]); break;
        case 2: column[t] = static_cast<double>(e.bid_prices[lvl]); break;
        default: column[t] = static_cast<double>(e.bid_volumes[lvl]); break;
      }
    }
    auto s = ColumnScaler::fit(mode, column);
    if (!s) {
      throw ConfigError("normalizer: degenerate statistic (" + std::string(stat) +
                        ") for feature " + std::to_string(f));
    }
    n.features_[f] = *s;
  }
  for (std::size_t t = 0; t < window.size(); ++t) column[t] = mid_price(window[t]);
  auto label = ColumnScaler::fit(mode, column);
  if (!label) {
    throw ConfigError("normalizer: degenerate statistic (" + std::string(stat) +
                      ") for the mid-price label");
  }
  n.label_ = *label;
  return n;
}

Normalizer Normalizer::from_parts(NormMode mode, std::array<ColumnScaler, kFeatures> features,
                                  ColumnScaler label) {
  Normalizer n;
  n.mode_ = mode;
  n.features_ = features;
  n.label_ = label;
  return n;
}

Vec Normalizer::apply(const LobEvent& e) const {
  Vec f = raw_features(e);
  if (mode_ == NormMode::raw) return f;
  for (std::size_t i = 0; i < kFeatures; ++i) f[i] = features_[i].apply(f[i]);
  return f;
}

std::string csv_header() {
  std::string h;
  const char* groups[] = {"ask_price_", "ask_vol_", "bid_price_", "bid_vol_"};
  for (const char* g : groups) {
    for (std::size_t k = 1; k <= kLevels; ++k) {
      if (!h.empty()) h += ',';
      h += g;
      h += std::to_string(k);
    }
  }
  return h;
}

namespace {

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

LobEvent parse_row(std::string_view line, std::size_t line_no) {
  std::array<std::int64_t, kFeatures> v{};
  std::size_t col = 0;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    std::string_view field = line.substr(pos, comma == std::string_view::npos ? line.npos : comma - pos);
    if (col >= kFeatures) {
      throw ParseError("line " + std::to_string(line_no) + ": more than " +
                       std::to_string(kFeatures) + " fields");
    }
    std::int64_t x = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), x);
    if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
      throw ParseError("line " + std::to_string(line_no) + ", column " + std::to_string(col + 1) +
                       ": '" + std::string(field) + "' is not an integer");
    }
    v[col++] = x;
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  if (col != kFeatures) {
    throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(kFeatures) +
                     " fields, found " + std::to_string(col));
  }
  LobEvent e;
  for (std::size_t k = 0; k < kLevels; ++k) {
    e.ask_prices[k] = v[k];
    e.ask_volumes[k] = v[kLevels + k];
    e.bid_prices[k] = v[2 * kLevels + k];
    e.bid_volumes[k] = v[3 * kLevels + k];
  }
  return e;
}

}  // namespace

LobStream parse_csv(std::string_view text, std::string source) {
  LobStream s;
  s.source = std::move(source);
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = strip_cr(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (!header_seen) {
      if (line != csv_header()) {
        throw ParseError("line 1: header does not match the 40-column LOB format");
      }
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    LobEvent e = parse_row(line, line_no);
    if (auto rule = violated_rule(e)) {
      throw ValidationError("line " + std::to_string(line_no) + ": violates " + *rule);
    }
    s.events.push_back(e);
  }
  if (!header_seen) throw ParseError("line 1: missing header");
  if (s.events.size() < 2) {
    throw ValidationError("stream needs at least 2 events, found " + std::to_string(s.events.size()));
  }
  return s;
}

LobStream load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), path.string());
}

std::string to_csv(const LobStream& stream) {
  std::string out = csv_header();
  out += '\n';
  for (const auto& e : stream.events) {
    bool first = true;
    auto put = [&](const auto& arr) {
      for (auto x : arr) {
        if (!first) out += ',';
        out += std::to_string(x);
        first = false;
      }
    };
    put(e.ask_prices);
    put(e.ask_volumes);
    put(e.bid_prices);
    put(e.bid_volumes);
    out += '\n';
  }
  return out;
}

void write_csv(const LobStream& stream, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_csv(stream);
  if (!out) throw IoError("write failed for " + path.string());
}

std::string_view to_string(SyntheticRegime r) {
  switch (r) {
    case SyntheticRegime::random_walk: return "random_walk";
    case SyntheticRegime::mean_revert: return "mean_revert";
    case SyntheticRegime::trend: return "trend";
  }
  return "?";
}

SyntheticRegime parse_regime(std::string_view s) {
  if (s == "random_walk") return SyntheticRegime::random_walk;
  if (s == "mean_revert") return SyntheticRegime::mean_revert;
  if (s == "trend") return SyntheticRegime::trend;
  throw ConfigError("unknown synthetic regime '" + std::string(s) +
                    "' (expected random_walk, mean_revert or trend)");
}

LobStream generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.events < 2) {
    throw ConfigError("synthetic stream needs at least 2 events, got " + std::to_string(cfg.events));
  }
  if (cfg.tick <= 0) throw ConfigError("synthetic tick must be positive");
  if (cfg.max_volume < 1) throw ConfigError("synthetic max_volume must be at least 1");

  Rng rng(cfg.seed);
  LobStream s;
  s.source = "synthetic:" + std::string(to_string(cfg.regime)) + ":seed=" + std::to_string(cfg.seed);
  s.events.reserve(cfg.events);

  // Offset of the mid from start_mid, in ticks. Emitted mids are rounded to
  // whole ticks so the book sits on the tick grid.
  double offset = 0.0;
  for (std::size_t t = 0; t < cfg.events; ++t) {
    if (t > 0) {
      switch (cfg.regime) {
        case SyntheticRegime::random_walk:
          offset += rng.coin() ? 1.0 : -1.0;
          break;
        case SyntheticRegime::mean_revert:
          offset += -cfg.reversion * offset + rng.normal(0.0, cfg.noise);
          break;
        case SyntheticRegime::trend:
          offset += cfg.drift + rng.normal(0.0, cfg.noise);
          break;
      }
    }
    const std::int64_t mid = cfg.start_mid + std::llround(offset) * cfg.tick;
    LobEvent e;
    for (std::size_t k = 0; k < kLevels; ++k) {
      const auto depth = static_cast<std::int64_t>(k + 1);
      e.ask_prices[k] = mid + depth * cfg.tick;
      e.bid_prices[k] = mid - depth * cfg.tick;
      e.ask_volumes[k] = rng.uniform_int(1, cfg.max_volume);
      e.bid_volumes[k] = rng.uniform_int(1, cfg.max_volume);
    }
    s.events.push_back(e);
  }
  return s;
}

}  // namespace optm
