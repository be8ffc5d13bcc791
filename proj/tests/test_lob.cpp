// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "optm/error.hpp"
#include "optm/lob.hpp"

using namespace optm;

namespace {

LobEvent book(std::int64_t ask, std::int64_t bid) {
  LobEvent e;
  for (std::size_t k = 0; k < kLevels; ++k) {
    e.ask_prices[k] = ask + static_cast<std::int64_t>(k);
    e.bid_prices[k] = bid - static_cast<std::int64_t>(k);
    e.ask_volumes[k] = 10;
    e.bid_volumes[k] = 20;
  }
  return e;
}

std::string row(const LobEvent& e) {
  std::string s;
  auto put = [&](const auto& a) {
    for (auto v : a) s += (s.empty() ? "" : ",") + std::to_string(v);
  };
  put(e.ask_prices);
  put(e.ask_volumes);
  put(e.bid_prices);
  put(e.bid_volumes);
  return s;
}

}  // namespace

TEST_CASE("mid_price examples") {
  CHECK(mid_price(book(10, 8)) == 9.0);
  CHECK(mid_price(book(234601, 234599)) == 234600.0);
  LobEvent flat = book(100, 100);
  CHECK(mid_price(flat) == 100.0);
  CHECK(violated_rule(flat) == std::optional<std::string>("positive spread"));
}

TEST_CASE("mid_price is translation equivariant") {
  Rng rng(2);
  for (int t = 0; t < 1000; ++t) {
    const auto bid = rng.uniform_int(1, 1'000'000);
    const auto ask = bid + rng.uniform_int(1, 500);
    const auto k = rng.uniform_int(-1000, 1000);
    CHECK(mid_price(book(ask + k, bid + k)) == mid_price(book(ask, bid)) + static_cast<double>(k));
  }
}

TEST_CASE("column scaler examples") {
  const auto mm = ColumnScaler::fit(NormMode::minmax, Vec{0, 5, 10});
  REQUIRE(mm);
  CHECK(mm->apply(5) == 0.5);
  const auto z = ColumnScaler::fit(NormMode::zscore, Vec{1, 2, 3});
  REQUIRE(z);
  CHECK(z->apply(3) == doctest::Approx(1.0 / std::sqrt(2.0 / 3.0)).epsilon(1e-14));
  CHECK(z->apply(3) == doctest::Approx(1.224744871391589));
  CHECK_FALSE(ColumnScaler::fit(NormMode::minmax, Vec{4, 4}));
  CHECK_FALSE(ColumnScaler::fit(NormMode::zscore, Vec{4, 4, 4}));
}

TEST_CASE("raw normalization is the identity") {
  SyntheticConfig cfg;
  cfg.events = 50;
  const auto s = generate_synthetic(cfg);
  const auto n = Normalizer::fit(NormMode::raw, s.events);
  for (const auto& e : s.events) {
    CHECK(n.apply(e) == raw_features(e));
    CHECK(n.normalize_label(mid_price(e)) == mid_price(e));
  }
}

TEST_CASE("degenerate feature is reported by index") {
  std::vector<LobEvent> w{book(10, 8), book(12, 9)};
  try {
    Normalizer::fit(NormMode::zscore, w);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    // ask volumes are constant; their first column is feature 10
    CHECK(std::string(e.what()).find("feature 10") != std::string::npos);
  }
}

TEST_CASE("apply after fit on the fitting window") {
  SyntheticConfig cfg;
  cfg.events = 500;
  cfg.regime = SyntheticRegime::mean_revert;
  cfg.seed = 4;
  const auto s = generate_synthetic(cfg);

  const auto mm = Normalizer::fit(NormMode::minmax, s.events);
  for (const auto& e : s.events) {
    for (double v : mm.apply(e)) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }

  const auto z = Normalizer::fit(NormMode::zscore, s.events);
  std::vector<Vec> cols(kFeatures);
  for (const auto& e : s.events) {
    const Vec f = z.apply(e);
    for (std::size_t k = 0; k < kFeatures; ++k) cols[k].push_back(f[k]);
  }
  for (const auto& c : cols) {
    const double n = static_cast<double>(c.size());
    const double mean = std::accumulate(c.begin(), c.end(), 0.0) / n;
    double var = 0.0;
    for (double v : c) var += (v - mean) * (v - mean);
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(var / n) - 1.0) < 1e-9);
  }
  const Vec mids = s.mid_prices();
  for (double m : mids) CHECK(z.denormalize_label(z.normalize_label(m)) == doctest::Approx(m).epsilon(1e-12));
}

TEST_CASE("csv: well-formed two-row file") {
  const std::string text = csv_header() + "\n" + row(book(10, 8)) + "\n" + row(book(12, 9)) + "\n";
  const auto s = parse_csv(text);
  REQUIRE(s.size() == 2);
  CHECK(mid_price(s.events[0]) == 9.0);
  CHECK(s.events[1].bid_volumes[3] == 20);
}

TEST_CASE("csv: crossed book fails validation citing the rule and line") {
  const std::string text = csv_header() + "\n" + row(book(10, 8)) + "\n" + row(book(9, 9)) + "\n";
  try {
    parse_csv(text);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("positive spread") != std::string::npos);
    CHECK(msg.find("line 3") != std::string::npos);
  }
}

TEST_CASE("csv: shuffled header is a parse error") {
  std::string header = csv_header();
  const auto a = header.find("ask_price_1,");
  const auto b = header.find("ask_price_2,");
  header.replace(b, 12, "ask_price_1,");
  header.replace(a, 12, "ask_price_2,");
  const std::string text = header + "\n" + row(book(10, 8)) + "\n" + row(book(12, 9)) + "\n";
  CHECK_THROWS_AS(parse_csv(text), ParseError);
}

TEST_CASE("csv: malformed field names line and column") {
  std::string r = row(book(10, 8));
  r.replace(0, 2, "1x");
  const std::string text = csv_header() + "\n" + row(book(10, 8)) + "\n" + r + "\n";
  try {
    parse_csv(text);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("column 1") != std::string::npos);
  }
}

TEST_CASE("csv round trip is exact") {
  for (auto regime : {SyntheticRegime::random_walk, SyntheticRegime::mean_revert, SyntheticRegime::trend}) {
    SyntheticConfig cfg;
    cfg.events = 300;
    cfg.regime = regime;
    cfg.seed = 17;
    const auto s = generate_synthetic(cfg);
    const auto path = std::filesystem::temp_directory_path() / "optm_lob_roundtrip.csv";
    write_csv(s, path);
    const auto back = load_csv(path);
    std::filesystem::remove(path);
    CHECK(back.events == s.events);
    CHECK(to_csv(back) == to_csv(s));
  }
}

TEST_CASE("missing file is an I/O error") {
  CHECK_THROWS_AS(load_csv("/nonexistent/optm.csv"), IoError);
}

TEST_CASE("generator determinism and size contract") {
  for (auto regime : {SyntheticRegime::random_walk, SyntheticRegime::mean_revert, SyntheticRegime::trend}) {
    SyntheticConfig cfg;
    cfg.events = 100;
    cfg.regime = regime;
    cfg.seed = 123;
    CHECK(generate_synthetic(cfg).events == generate_synthetic(cfg).events);
    cfg.seed = 124;
    SyntheticConfig other = cfg;
    other.seed = 123;
    CHECK(generate_synthetic(cfg).events != generate_synthetic(other).events);
  }
  SyntheticConfig tiny;
  tiny.events = 1;
  CHECK_THROWS_AS(generate_synthetic(tiny), ConfigError);
}

TEST_CASE("every generated event satisfies the book invariants") {
  for (auto regime : {SyntheticRegime::random_walk, SyntheticRegime::mean_revert, SyntheticRegime::trend}) {
    SyntheticConfig cfg;
    cfg.events = 10000;
    cfg.regime = regime;
    cfg.seed = 99;
    const auto s = generate_synthetic(cfg);
    REQUIRE(s.size() == 10000);
    std::size_t bad = 0;
    for (const auto& e : s.events) {
      if (violated_rule(e)) ++bad;
      if (e.ask_prices[0] - e.bid_prices[0] != 2 * cfg.tick) ++bad;
      for (std::size_t k = 0; k < kLevels; ++k) {
        if (e.ask_volumes[k] < 1 || e.bid_volumes[k] < 1) ++bad;
      }
    }
    CHECK(bad == 0);
  }
}

TEST_CASE("random walk moves by exactly one tick") {
  SyntheticConfig cfg;
  cfg.events = 2000;
  cfg.seed = 8;
  const Vec m = generate_synthetic(cfg).mid_prices();
  for (std::size_t t = 1; t < m.size(); ++t) CHECK(std::abs(m[t] - m[t - 1]) == 100.0);
}

TEST_CASE("trend drift stays within the concentration bound") {
  // Sum of 999 N(1, 2²) steps in ticks: 3σ bound 3·2·√1000, plus one tick of rounding.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SyntheticConfig cfg;
    cfg.events = 1000;
    cfg.regime = SyntheticRegime::trend;
    cfg.seed = seed;
    const Vec m = generate_synthetic(cfg).mid_prices();
    const double moved_ticks = (m.back() - m.front()) / 100.0;
    CHECK(std::abs(moved_ticks - 1000.0) <= 3.0 * 2.0 * std::sqrt(1000.0) + 1.0);
  }
}

TEST_CASE("mean reversion stays near the start level") {
  SyntheticConfig cfg;
  cfg.events = 5000;
  cfg.regime = SyntheticRegime::mean_revert;
  cfg.seed = 3;
  const Vec m = generate_synthetic(cfg).mid_prices();
  double mean = 0.0;
  for (double v : m) mean += v;
  mean /= static_cast<double>(m.size());
  // stationary std is noise/sqrt(1-(1-k)^2) ≈ 6.4 ticks
  CHECK(std::abs(mean - 1'000'000.0) < 5 * 100.0);
}
