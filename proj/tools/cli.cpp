// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "optm/error.hpp"
#include "optm/gradcheck.hpp"
#include "optm/protocol.hpp"

namespace optm::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::string> split(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::size_t parse_size(const std::string& s) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty() || s[0] == '-') throw ConfigError("'" + s + "' is not a non-negative integer");
  return static_cast<std::size_t>(v);
}

/// Where events come from: a CSV file or the synthetic generator.
struct DataSource {
  std::string path;
  std::optional<SyntheticConfig> synthetic;
  bool events_given = false;

  LobStream load() const {
    if (synthetic) return generate_synthetic(*synthetic);
    if (!fs::exists(path)) throw IoError("data file not found: " + path);
    return load_csv(path);
  }
};

/// Flags shared by every command that reads events.
struct DataFlags {
  std::string data;
  std::string synthetic;
  std::size_t events = 10000;
  std::uint64_t data_seed = 0;
  double drift = 1.0;
  double noise = 2.0;

  void attach(CLI::App* app) {
    app->add_option("--data", data, "LOB CSV file");
    app->add_option("--synthetic", synthetic, "Generate data instead: random_walk, mean_revert or trend");
    app->add_option("--events", events, "Synthetic event count");
    app->add_option("--data-seed", data_seed, "Synthetic generator seed");
    app->add_option("--drift", drift, "Synthetic trend drift in ticks per event");
    app->add_option("--noise", noise, "Synthetic noise std in ticks");
  }

  /// Merges flags over a config-file source (flags win).
  DataSource resolve(const json& cfg, const CLI::App* app) const {
    DataSource src;
    std::string path = cfg.value("data", std::string());
    std::optional<SyntheticConfig> syn;
    if (cfg.contains("synthetic")) {
      const json& s = cfg.at("synthetic");
      SyntheticConfig sc;
      sc.regime = parse_regime(s.value("regime", std::string("trend")));
      sc.events = s.value("events", sc.events);
      src.events_given = s.contains("events");
      sc.seed = s.value("seed", sc.seed);
      sc.drift = s.value("drift", sc.drift);
      sc.noise = s.value("noise", sc.noise);
      syn = sc;
    }
    if (app->count("--data")) {
      path = data;
      syn.reset();
    }
    if (app->count("--synthetic")) {
      SyntheticConfig sc = syn.value_or(SyntheticConfig{});
      sc.regime = parse_regime(synthetic);
      syn = sc;
      path.clear();
    }
    if (syn) {
      if (app->count("--events")) {
        syn->events = events;
        src.events_given = true;
      }
      if (app->count("--data-seed")) syn->seed = data_seed;
      if (app->count("--drift")) syn->drift = drift;
      if (app->count("--noise")) syn->noise = noise;
    }
    if (path.empty() == !syn.has_value()) {
      throw ConfigError("exactly one data source is required: --data FILE or --synthetic REGIME");
    }
    src.path = path;
    src.synthetic = syn;
    return src;
  }
};

/// Model hyper-parameter flags.
struct ModelFlags {
  std::size_t units = 4;
  std::string head = "4,1";
  std::size_t look_back = 1;
  std::size_t batch_size = 1;
  std::string optimizer = "adam";
  double lr = 1e-3;
  double clip_norm = 0.0;
  double repo_alpha = 1e-4;
  int repo_iters = 10;
  std::string theta_init = "warm";
  std::string importance = "signed";
  static constexpr std::pair<const char*, const char*> kFlags[] = {
      {"units", "--units"},         {"head", "--head"},           {"look_back", "--look-back"},
      {"batch_size", "--batch-size"}, {"optimizer", "--optimizer"}, {"lr", "--lr"},
      {"clip_norm", "--clip-norm"}, {"repo_alpha", "--repo-alpha"}, {"repo_iters", "--repo-iters"},
      {"theta_init", "--theta-init"}, {"importance", "--importance"},
  };

  void attach(CLI::App* app) {
    {
        app->add_option("--units", units, "Recurrent units");
        app->add_option("--head", head, "Dense head widths, comma separated, ending in 1");
        app->add_option("--look-back", look_back, "Look-back window (lstm/gru)");
        app->add_option("--batch-size", batch_size, "Training minibatch (lstm/gru)");
        app->add_option("--optimizer", optimizer, "sgd or adam");
        app->add_option("--lr", lr, "Learning rate");
        app->add_option("--clip-norm", clip_norm, "Max gradient norm, 0 disables");
        app->add_option("--repo-alpha", repo_alpha, "Feature repo GD learning rate");
        app->add_option("--repo-iters", repo_iters, "Feature repo GD iterations");
        app->add_option("--theta-init", theta_init, "warm or zero");
        app->add_option("--importance", importance, "signed or absolute");
    };
  }

  ModelSpec resolve(const json& cfg, const CLI::App* app) const {
    auto set = [&](const std::string& key) {
      for (const auto& [k, flag] : kFlags)
        if (key == k) return app->count(flag) > 0;
      return false;
    };
    ModelSpec s;
    auto pick = [&](const std::string& key, auto flag_value, auto& target) {
      using T = std::decay_t<decltype(target)>;
      if (set(key)) {
        target = static_cast<T>(flag_value);
      } else if (cfg.contains(key)) {
        target = cfg.at(key).get<T>();
      } else {
        target = static_cast<T>(flag_value);
      }
    };
    pick("units", units, s.units);
    pick("look_back", look_back, s.look_back);
    pick("batch_size", batch_size, s.batch_size);
    pick("lr", lr, s.lr);
    pick("clip_norm", clip_norm, s.clip_norm);
    pick("repo_alpha", repo_alpha, s.repo.alpha);
    pick("repo_iters", repo_iters, s.repo.iters);
    std::string head_s, opt_s, init_s, imp_s;
    pick("head", head, head_s);
    pick("optimizer", optimizer, opt_s);
    pick("theta_init", theta_init, init_s);
    pick("importance", importance, imp_s);
    s.head.clear();
    for (const auto& h : split(head_s)) s.head.push_back(parse_size(h));
    s.optimizer = parse_optimizer(opt_s);
    if (init_s == "warm") {
      s.repo.theta_init = ThetaInit::warm;
    } else if (init_s == "zero") {
      s.repo.theta_init = ThetaInit::zero;
    } else {
      throw ConfigError("--theta-init must be warm or zero");
    }
    if (imp_s == "signed") {
      s.repo.importance = ImportanceMode::signed_mean;
    } else if (imp_s == "absolute") {
      s.repo.importance = ImportanceMode::absolute_mean;
    } else {
      throw ConfigError("--importance must be signed or absolute");
    }
    return s;
  }
};

json read_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw IoError("config file not found: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("config " + path + ": " + e.what());
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void print_mid_summary(const LobStream& s, std::ostream& out) {
  const Vec mids = s.mid_prices();
  const auto [lo, hi] = std::minmax_element(mids.begin(), mids.end());
  double mean = 0.0;
  for (double m : mids) mean += m;
  mean /= static_cast<double>(mids.size());
  double var = 0.0;
  for (double m : mids) var += (m - mean) * (m - mean);
  var /= static_cast<double>(mids.size());
  char buf[256];
  std::snprintf(buf, sizeof buf, "events=%zu mid_first=%.1f mid_last=%.1f mid_min=%.1f mid_max=%.1f mid_mean=%.3f mid_std=%.3f\n",
                mids.size(), mids.front(), mids.back(), *lo, *hi, mean, std::sqrt(var));
  out << buf;
}


// ---------------------------------------------------------------------------

struct Commands {
  std::ostream& out;
  std::ostream& err;

  // generate
  SyntheticConfig gen;
  std::string gen_regime = "random_walk";
  std::string gen_out;

  // the parsed subcommand; flags given on it override the config file
  const CLI::App* active = nullptr;
  bool given(const char* flag) const { return active->count(flag) > 0; }

  ScenarioConfig scenario(const json& cfg) const {
    ScenarioConfig sc;
    sc.test_len = given("--test-len") ? test_len : cfg.value("test_len", test_len);
    sc.early_stop.patience = given("--patience") ? patience : cfg.value("patience", patience);
    sc.early_stop.min_delta = given("--min-delta") ? min_delta : cfg.value("min_delta", min_delta);
    return sc;
  }

  // shared
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir = "results";
  DataFlags data;
  ModelFlags model;
  std::size_t test_len = 1000;
  int patience = 5;
  double min_delta = 0.0;

  // benchmark
  std::string models = "optm,lstm,gru,persistence,naive";
  std::string sizes = "1000,2000,5000,10000,15000";
  std::string regimes = "short";
  std::string norms = "zscore";
  int jobs = 0;
  bool timings = false;

  // train / evaluate
  std::string model_kind = "optm";
  std::size_t train_size = 1000;
  std::string regime = "short";
  std::string norm = "zscore";
  std::string checkpoint;
  std::size_t start = 0;

  // gradcheck
  double perturb = 0.0;
  double tol = 1e-4;
  double step = 1e-6;

  int generate() {
    gen.regime = parse_regime(gen_regime);
    const LobStream s = generate_synthetic(gen);
    write_csv(s, gen_out);
    print_mid_summary(s, out);
    return kExitOk;
  }

  int benchmark() {
    const json cfg = read_config(config_path);
    DataSource src = data.resolve(cfg, active);

    ProtocolConfig pc;
    pc.base = scenario(cfg);
    pc.seed = given("--seed") ? seed : cfg.value("seed", seed);
    pc.jobs = given("--jobs") ? jobs : cfg.value("jobs", jobs);

    auto list = [&](const char* flag, const std::string& value, const char* key) {
      if (given(flag) || !cfg.contains(key)) return split(value);
      std::vector<std::string> v;
      for (const auto& item : cfg.at(key)) v.push_back(item.is_string() ? item.get<std::string>() : item.dump());
      return v;
    };
    pc.train_sizes.clear();
    for (const auto& s : list("--sizes", sizes, "sizes")) pc.train_sizes.push_back(parse_size(s));
    pc.regimes.clear();
    for (const auto& r : list("--regime", regimes, "regimes")) pc.regimes.push_back(parse_training_regime(r));
    pc.norms.clear();
    for (const auto& n : list("--norm", norms, "norms")) pc.norms.push_back(parse_norm_mode(n));

    const ModelSpec base = model.resolve(cfg, active);
    std::vector<ModelSpec> specs;
    for (const auto& m : list("--models", models, "models")) {
      ModelSpec s = base;
      s.kind = parse_model_kind(m);
      specs.push_back(s);
    }
    const fs::path dir = given("--out") ? out_dir : cfg.value("out", out_dir);
    pc.validate();
    for (const auto& s : specs) s.validate();
    if (src.synthetic && !src.events_given) {
      // just long enough for the largest training window plus the test walk
      src.synthetic->events = *std::max_element(pc.train_sizes.begin(), pc.train_sizes.end()) + pc.base.test_len;
    }

    // Everything that can fail on bad input happens before the output
    // directory is touched.
    const LobStream stream = src.load();
    for (auto size : pc.train_sizes) {
      if (stream.size() < size + pc.base.test_len) {
        throw ConfigError("stream of " + std::to_string(stream.size()) + " events is too short for train_size " +
                          std::to_string(size) + " + test_len " + std::to_string(pc.base.test_len));
      }
    }

    const MatrixResult res = benchmark_matrix(pc, specs, stream);

    json echo;
    echo["source"] = stream.source;
    echo["events"] = stream.size();
    if (src.synthetic) {
      echo["synthetic"] = {{"regime", to_string(src.synthetic->regime)}, {"events", src.synthetic->events},
                           {"seed", src.synthetic->seed}, {"drift", src.synthetic->drift},
                           {"noise", src.synthetic->noise}};
    }
    echo["models"] = json::array();
    for (const auto& s : specs) echo["models"].push_back(to_string(s.kind));
    echo["sizes"] = pc.train_sizes;
    echo["regimes"] = json::array();
    for (auto r : pc.regimes) echo["regimes"].push_back(to_string(r));
    echo["norms"] = json::array();
    for (auto n : pc.norms) echo["norms"].push_back(to_string(n));
    echo["test_len"] = pc.base.test_len;
    echo["patience"] = pc.base.early_stop.patience;
    echo["min_delta"] = pc.base.early_stop.min_delta;
    echo["seed"] = pc.seed;
    echo["units"] = base.units;
    echo["head"] = base.head;
    echo["look_back"] = base.look_back;
    echo["batch_size"] = base.batch_size;
    echo["optimizer"] = to_string(base.optimizer);
    echo["lr"] = base.lr;
    echo["clip_norm"] = base.clip_norm;
    echo["repo_alpha"] = base.repo.alpha;
    echo["repo_iters"] = base.repo.iters;
    echo["theta_init"] = base.repo.theta_init == ThetaInit::warm ? "warm" : "zero";
    echo["importance"] = base.repo.importance == ImportanceMode::signed_mean ? "signed" : "absolute";

    fs::create_directories(dir);
    write_file(dir / "results.jsonl", results_jsonl(res.reports, {timings}));
    const std::string table = ranked_table(res.reports);
    write_file(dir / "table.txt", table);
    write_file(dir / "run_config.json", echo.dump(2) + "\n");
    out << table;
    for (const auto& r : res.reports) {
      if (r.failed) err << "run failed: " << to_string(r.model) << " size " << r.train_size << ": " << r.failure << "\n";
    }
    return res.any_failed() ? kExitRunFailure : kExitOk;
  }

  int train() {
    const json cfg = read_config(config_path);
    const DataSource src = data.resolve(cfg, active);
    ModelSpec spec = model.resolve(cfg, active);
    spec.kind = parse_model_kind(model_kind);
    spec.seed = seed;
    spec.validate();
    ScenarioConfig sc = scenario(cfg);
    sc.train_size = train_size;
    sc.regime = parse_training_regime(regime);
    sc.norm = parse_norm_mode(norm);
    sc.validate();

    const LobStream stream = src.load();
    if (stream.size() < train_size) {
      throw ConfigError("stream has " + std::to_string(stream.size()) + " events, fewer than train_size");
    }
    const std::span<const LobEvent> window(stream.events.data(), train_size);
    auto m = make_model(spec, Normalizer::fit(sc.norm, window));
    std::vector<double> history;
    for (int e = 0; e < sc.max_epochs(); ++e) {
      history.push_back(m->train_epoch(window, e));
      out << "epoch " << e + 1 << " train_mse " << format_mse(history.back()) << "\n";
      if (!std::isfinite(history.back())) throw NumericError("training diverged");
      if (sc.regime == Regime::long_training && early_stop(history, sc.early_stop.patience, sc.early_stop.min_delta))
        break;
    }
    m->to_checkpoint().save(checkpoint);
    out << "saved " << checkpoint << "\n";
    return kExitOk;
  }

  int evaluate() {
    const json cfg = read_config(config_path);
    const DataSource src = data.resolve(cfg, active);
    auto m = model_from_checkpoint(Checkpoint::load(checkpoint));
    const LobStream stream = src.load();
    const std::size_t first = start;
    const std::size_t n = given("--test-len") ? test_len : cfg.value("test_len", test_len);
    if (first + n + 1 > stream.size()) {
      throw ConfigError("stream of " + std::to_string(stream.size()) + " events cannot serve " + std::to_string(n) +
                        " predictions from event " + std::to_string(first));
    }
    std::string per_event = "event,predicted,realized,sq_error\n";
    double sum = 0.0;
    char buf[128];
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t k = first + j;
      const double realized = mid_price(stream.events[k + 1]);
      const double predicted = m->predict_next(stream.events[k]);
      const double sq = reporting_sq_error(m->normalizer(), predicted, realized);
      sum += sq;
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", k, predicted, realized, sq);
      per_event += buf;
      m->absorb(stream.events[k], realized, 1);
    }
    out << "model " << to_string(m->spec().kind) << " test_len " << n << " test_mse " << format_mse(sum / static_cast<double>(n))
        << "\n";
    if (given("--out")) {
      fs::create_directories(out_dir);
      write_file(fs::path(out_dir) / "predictions.csv", per_event);
    }
    return kExitOk;
  }

  int gradcheck() {
    GradcheckOptions opts;
    opts.seed = seed;
    opts.perturb = perturb;
    opts.step = step;
    const auto cases = run_gradcheck_suite(opts);
    bool ok = true;
    char buf[160];
    for (const auto& c : cases) {
      for (const auto& t : c.tensors) {
        const bool pass = t.max_rel_error < tol;
        ok = ok && pass;
        std::snprintf(buf, sizeof buf, "%-22s %-10s %.3e %s\n", c.name.c_str(), t.name.c_str(), t.max_rel_error,
                      pass ? "ok" : "FAIL");
        out << buf;
      }
    }
    out << (ok ? "gradcheck passed" : "gradcheck FAILED") << " (tolerance " << tol << ")\n";
    return ok ? kExitOk : kExitRunFailure;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Commands c{out, err};
  CLI::App app{"Optimum-output LSTM forecasting toolkit"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "Write a synthetic LOB CSV");
  gen->add_option("--regime", c.gen_regime, "random_walk, mean_revert or trend");
  gen->add_option("--events", c.gen.events, "Number of events")->required();
  gen->add_option("--seed", c.gen.seed, "Generator seed");
  gen->add_option("--out", c.gen_out, "Output CSV path")->required();
  gen->add_option("--drift", c.gen.drift, "Trend drift, ticks per event");
  gen->add_option("--noise", c.gen.noise, "Noise std, ticks");
  gen->add_option("--reversion", c.gen.reversion, "Mean-reversion pull per event");
  gen->add_option("--tick", c.gen.tick, "Tick size in scaled price units");
  gen->add_option("--start-mid", c.gen.start_mid, "Initial mid-price in scaled units");

  auto* bench = app.add_subcommand("benchmark", "Run the model x size x regime x normalization matrix");
  auto* train = app.add_subcommand("train", "Train one model and save a checkpoint");
  auto* eval = app.add_subcommand("evaluate", "Progressively test a checkpoint");
  for (auto* sub : {bench, train, eval}) {
    sub->add_option("--config", c.config_path, "JSON run configuration; flags override it");
    c.data.attach(sub);
    sub->add_option("--test-len", c.test_len, "Progressive test length");
  }
  for (auto* sub : {bench, train}) {
    c.model.attach(sub);
    sub->add_option("--patience", c.patience, "Early-stop patience (long regime)");
    sub->add_option("--min-delta", c.min_delta, "Early-stop minimum improvement");
  }

  bench->add_option("--models", c.models, "Comma list of optm,lstm,gru,persistence,naive");
  bench->add_option("--sizes", c.sizes, "Comma list of training sizes");
  bench->add_option("--regime", c.regimes, "short, long, or both comma separated");
  bench->add_option("--norm", c.norms, "raw, minmax, zscore (comma list)");
  bench->add_option("--jobs", c.jobs, "Worker threads, 0 = all cores");
  bench->add_flag("--timings", c.timings, "Add wall-clock time to result records");
  bench->add_option("--seed", c.seed, "Model initialization seed");
  bench->add_option("--out", c.out_dir, "Output directory");

  train->add_option("--model", c.model_kind, "optm, lstm, gru, persistence or naive");
  train->add_option("--train-size", c.train_size, "Training window length");
  train->add_option("--regime", c.regime, "short or long");
  train->add_option("--norm", c.norm, "raw, minmax or zscore");
  train->add_option("--seed", c.seed, "Model initialization seed");
  train->add_option("--out", c.checkpoint, "Checkpoint path")->required();

  eval->add_option("--checkpoint", c.checkpoint, "Checkpoint to evaluate")->required();
  eval->add_option("--start", c.start, "Index of the first event to predict from");
  eval->add_option("--out", c.out_dir, "Directory for predictions.csv");

  auto* grad = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  grad->add_option("--seed", c.seed, "Seed for the random instances");
  grad->add_option("--perturb", c.perturb, "Scale analytic gradients by (1 + p) to test the checker");
  grad->add_option("--tol", c.tol, "Relative error tolerance");
  grad->add_option("--step", c.step, "Finite-difference step");

  std::vector<std::string> argv_store{"optm"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitConfigError;
  }

  for (const auto* sub : app.get_subcommands()) c.active = sub;
  try {
    if (*gen) return c.generate();
    if (*bench) return c.benchmark();
    if (*train) return c.train();
    if (*eval) return c.evaluate();
    if (*grad) return c.gradcheck();
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const Error& e) {
    err << "run failure: " << e.what() << "\n";
    return kExitRunFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRunFailure;
  }
  return kExitOk;
}

}  // namespace optm::cli
