// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "optm/error.hpp"
#include "optm/models.hpp"

namespace optm {

namespace {

constexpr std::string_view kFormat = "optm-checkpoint";

std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

const std::string& need(const std::map<std::string, std::string>& meta, const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) throw ParseError("checkpoint: missing metadata '" + key + "'");
  return it->second;
}

const Mat& need(const std::map<std::string, Mat>& tensors, const std::string& key) {
  auto it = tensors.find(key);
  if (it == tensors.end()) throw ParseError("checkpoint: missing tensor '" + key + "'");
  return it->second;
}

double to_double(const std::string& s) {
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw ParseError("checkpoint: '" + s + "' is not a number");
  }
}

long long to_int(const std::string& s) {
  try {
    return std::stoll(s);
  } catch (const std::exception&) {
    throw ParseError("checkpoint: '" + s + "' is not an integer");
  }
}

Mat row_of(std::span<const double> v) { return Mat(1, v.size(), Vec(v.begin(), v.end())); }

Vec vec_of(const Mat& m) { return Vec(m.flat().begin(), m.flat().end()); }

template <class P>
void save_params(Checkpoint& ck, const P& params, const OptimizerState& opt) {
  for (const auto& [name, m] : params.tensors()) ck.tensors["param/" + name] = *m;
  ck.meta["opt.steps"] = std::to_string(opt.steps);
  for (std::size_t k = 0; k < opt.m.size(); ++k) {
    ck.tensors["opt/m/" + std::to_string(k)] = opt.m[k];
    ck.tensors["opt/v/" + std::to_string(k)] = opt.v[k];
  }
}

template <class P>
void load_params(const Checkpoint& ck, P& params, OptimizerState& opt) {
  for (auto& [name, m] : params.tensors()) {
    const Mat& src = need(ck.tensors, "param/" + name);
    if (src.rows() != m->rows() || src.cols() != m->cols()) {
      throw ShapeError("checkpoint: tensor " + name + " is " + src.shape_str() + ", expected " + m->shape_str());
    }
    *m = src;
  }
  opt.steps = to_int(need(ck.meta, "opt.steps"));
  opt.m.clear();
  opt.v.clear();
  for (std::size_t k = 0; ck.tensors.count("opt/m/" + std::to_string(k)); ++k) {
    opt.m.push_back(need(ck.tensors, "opt/m/" + std::to_string(k)));
    opt.v.push_back(need(ck.tensors, "opt/v/" + std::to_string(k)));
  }
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (auto x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
  return s;
}

std::vector<std::size_t> split_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(static_cast<std::size_t>(to_int(item)));
  return out;
}

}  // namespace

std::string Checkpoint::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = kFormat;
  j["version"] = version;
  j["meta"] = meta;
  nlohmann::ordered_json t = nlohmann::ordered_json::object();
  for (const auto& [name, m] : tensors) {
    t[name] = {{"rows", m.rows()}, {"cols", m.cols()}, {"data", Vec(m.flat().begin(), m.flat().end())}};
  }
  j["tensors"] = std::move(t);
  return j.dump(1);
}

Checkpoint Checkpoint::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kFormat) throw ParseError("checkpoint: unrecognized format");
    Checkpoint ck;
    ck.version = j.at("version").get<int>();
    if (ck.version != kVersion) {
      throw ParseError("checkpoint: unsupported version " + std::to_string(ck.version));
    }
    ck.meta = j.at("meta").get<std::map<std::string, std::string>>();
    for (const auto& [name, t] : j.at("tensors").items()) {
      ck.tensors[name] = Mat(t.at("rows").get<std::size_t>(), t.at("cols").get<std::size_t>(),
                             t.at("data").get<std::vector<double>>());
    }
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

Checkpoint Model::to_checkpoint() const {
  Checkpoint ck;
  auto& m = ck.meta;
  m["kind"] = to_string(spec_.kind);
  m["units"] = std::to_string(spec_.units);
  m["head"] = join_sizes(spec_.head);
  m["look_back"] = std::to_string(spec_.look_back);
  m["batch_size"] = std::to_string(spec_.batch_size);
  m["optimizer"] = to_string(spec_.optimizer);
  m["lr"] = fmt_double(spec_.lr);
  m["clip_norm"] = fmt_double(spec_.clip_norm);
  m["repo.alpha"] = fmt_double(spec_.repo.alpha);
  m["repo.iters"] = std::to_string(spec_.repo.iters);
  m["repo.theta_init"] = spec_.repo.theta_init == ThetaInit::warm ? "warm" : "zero";
  m["repo.importance"] = spec_.repo.importance == ImportanceMode::signed_mean ? "signed" : "absolute";
  m["seed"] = std::to_string(spec_.seed);
  m["norm.mode"] = to_string(norm_.mode());
  m["events_absorbed"] = std::to_string(absorbed_);

  Mat feats(kFeatures, 2);
  for (std::size_t f = 0; f < kFeatures; ++f) {
    feats(f, 0) = norm_.features()[f].offset;
    feats(f, 1) = norm_.features()[f].scale;
  }
  ck.tensors["norm/features"] = feats;
  ck.tensors["norm/label"] = Mat(1, 2, {norm_.label().offset, norm_.label().scale});
  save_state(ck);
  return ck;
}

std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& ck) {
  const auto& m = ck.meta;
  ModelSpec spec;
  spec.kind = parse_model_kind(need(m, "kind"));
  spec.units = static_cast<std::size_t>(to_int(need(m, "units")));
  spec.head = split_sizes(need(m, "head"));
  spec.look_back = static_cast<std::size_t>(to_int(need(m, "look_back")));
  spec.batch_size = static_cast<std::size_t>(to_int(need(m, "batch_size")));
  spec.optimizer = parse_optimizer(need(m, "optimizer"));
  spec.lr = to_double(need(m, "lr"));
  spec.clip_norm = to_double(need(m, "clip_norm"));
  spec.repo.alpha = to_double(need(m, "repo.alpha"));
  spec.repo.iters = static_cast<int>(to_int(need(m, "repo.iters")));
  spec.repo.theta_init = need(m, "repo.theta_init") == "zero" ? ThetaInit::zero : ThetaInit::warm;
  spec.repo.importance =
      need(m, "repo.importance") == "absolute" ? ImportanceMode::absolute_mean : ImportanceMode::signed_mean;
  spec.seed = static_cast<std::uint64_t>(std::stoull(need(m, "seed")));

  const Mat& feats = need(ck.tensors, "norm/features");
  const Mat& label = need(ck.tensors, "norm/label");
  if (feats.rows() != kFeatures || feats.cols() != 2 || label.size() != 2) {
    throw ShapeError("checkpoint: malformed normalizer tensors");
  }
  std::array<ColumnScaler, kFeatures> cols{};
  for (std::size_t f = 0; f < kFeatures; ++f) cols[f] = {feats(f, 0), feats(f, 1)};
  const Normalizer norm =
      Normalizer::from_parts(parse_norm_mode(need(m, "norm.mode")), cols, {label(0, 0), label(0, 1)});

  auto model = make_model(spec, norm);
  model->absorbed_ = to_int(need(m, "events_absorbed"));
  model->load_state(ck);
  return model;
}

void NaiveModel::save_state(Checkpoint& ck) const {
  ck.meta["naive.sum"] = fmt_double(sum_);
  ck.meta["naive.count"] = std::to_string(count_);
}

void NaiveModel::load_state(const Checkpoint& ck) {
  sum_ = to_double(need(ck.meta, "naive.sum"));
  count_ = to_int(need(ck.meta, "naive.count"));
}

void LstmModel::save_state(Checkpoint& ck) const {
  save_params(ck, params_, opt_);
  ck.tensors["carry/h"] = row_of(h_);
  ck.tensors["carry/c"] = row_of(c_);
  for (std::size_t k = 0; k < history_.size(); ++k) {
    const auto p = "window/" + std::to_string(k) + "/";
    ck.tensors[p + "x"] = row_of(history_[k].x);
    ck.tensors[p + "h_prev"] = row_of(history_[k].h_prev);
    ck.tensors[p + "c_prev"] = row_of(history_[k].c_prev);
  }
}

void LstmModel::load_state(const Checkpoint& ck) {
  load_params(ck, params_, opt_);
  h_ = vec_of(need(ck.tensors, "carry/h"));
  c_ = vec_of(need(ck.tensors, "carry/c"));
  history_.clear();
  for (std::size_t k = 0; ck.tensors.count("window/" + std::to_string(k) + "/x"); ++k) {
    const auto p = "window/" + std::to_string(k) + "/";
    history_.push_back({vec_of(need(ck.tensors, p + "x")), vec_of(need(ck.tensors, p + "h_prev")),
                        vec_of(need(ck.tensors, p + "c_prev"))});
  }
}

void GruModel::save_state(Checkpoint& ck) const {
  save_params(ck, params_, opt_);
  ck.tensors["carry/h"] = row_of(h_);
  for (std::size_t k = 0; k < history_.size(); ++k) {
    const auto p = "window/" + std::to_string(k) + "/";
    ck.tensors[p + "x"] = row_of(history_[k].x);
    ck.tensors[p + "h_prev"] = row_of(history_[k].h_prev);
  }
}

void GruModel::load_state(const Checkpoint& ck) {
  load_params(ck, params_, opt_);
  h_ = vec_of(need(ck.tensors, "carry/h"));
  history_.clear();
  for (std::size_t k = 0; ck.tensors.count("window/" + std::to_string(k) + "/x"); ++k) {
    const auto p = "window/" + std::to_string(k) + "/";
    history_.push_back({vec_of(need(ck.tensors, p + "x")), vec_of(need(ck.tensors, p + "h_prev")), {}});
  }
}

void OptmModel::save_state(Checkpoint& ck) const {
  save_params(ck, params_, opt_);
  ck.tensors["carry/h"] = row_of(h_);
  ck.tensors["carry/c"] = row_of(c_);
  ck.tensors["carry/theta"] = row_of(theta_);
  Vec counts(selections_.begin(), selections_.end());
  ck.tensors["stats/selections"] = row_of(counts);
}

void OptmModel::load_state(const Checkpoint& ck) {
  load_params(ck, params_, opt_);
  h_ = vec_of(need(ck.tensors, "carry/h"));
  c_ = vec_of(need(ck.tensors, "carry/c"));
  theta_ = vec_of(need(ck.tensors, "carry/theta"));
  const Mat& counts = need(ck.tensors, "stats/selections");
  if (counts.size() != kComponents) throw ShapeError("checkpoint: malformed selection counts");
  for (int c = 0; c < kComponents; ++c) selections_[c] = static_cast<long long>(counts.flat()[c]);
}

}  // namespace optm
