#include "mvsd/run_config.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "mvsd/rng.hpp"

namespace mvsd {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (!s.empty()) {
    const auto comma = s.find(',');
    const auto part = trim(s.substr(0, comma));
    if (!part.empty()) out.push_back(part);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw std::invalid_argument(fmt::format("invalid value '{}' for '{}'", value, key));
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T x{};
  const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), x);
  if (ec != std::errc() || end != value.data() + value.size()) bad_value(key, value);
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(x)) bad_value(key, value);
  }
  return x;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value);
}

struct Field {
  std::string_view key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field number_field(std::string_view key, T RunConfig::*member) {
  return {key, [key, member](RunConfig& rc, std::string_view v) { rc.*member = parse_number<T>(key, v); },
          [member](const RunConfig& rc) {
            if constexpr (std::is_floating_point_v<T>) return fmt::format("{:.17g}", rc.*member);
            else return fmt::format("{}", rc.*member);
          }};
}

Field string_field(std::string_view key, std::string RunConfig::*member) {
  return {key, [member](RunConfig& rc, std::string_view v) { rc.*member = std::string(v); },
          [member](const RunConfig& rc) { return rc.*member; }};
}

Field bool_field(std::string_view key, bool RunConfig::*member) {
  return {key, [key, member](RunConfig& rc, std::string_view v) { rc.*member = parse_bool(key, v); },
          [member](const RunConfig& rc) { return std::string(rc.*member ? "true" : "false"); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      number_field("seed", &RunConfig::seed),
      string_field("data", &RunConfig::data),
      string_field("kge", &RunConfig::kge),
      string_field("embeddings", &RunConfig::embeddings),
      string_field("out", &RunConfig::out),
      number_field("input_dim", &RunConfig::input_dim),
      number_field("hidden", &RunConfig::hidden),
      number_field("layers", &RunConfig::layers),
      number_field("classifier_hidden", &RunConfig::classifier_hidden),
      number_field("dropout", &RunConfig::dropout),
      number_field("epochs", &RunConfig::epochs),
      number_field("batch_size", &RunConfig::batch_size),
      number_field("fanout", &RunConfig::fanout),
      bool_field("sample", &RunConfig::sample),
      string_field("optimizer", &RunConfig::optimizer),
      number_field("lr", &RunConfig::lr),
      number_field("beta1", &RunConfig::beta1),
      number_field("beta2", &RunConfig::beta2),
      number_field("eps", &RunConfig::eps),
      number_field("weight_decay", &RunConfig::weight_decay),
      number_field("patience", &RunConfig::patience),
      number_field("lr_factor", &RunConfig::lr_factor),
      number_field("kge_dim", &RunConfig::kge_dim),
      number_field("kge_margin", &RunConfig::kge_margin),
      number_field("kge_epochs", &RunConfig::kge_epochs),
      number_field("kge_batch", &RunConfig::kge_batch),
      number_field("kge_lr", &RunConfig::kge_lr),
      number_field("kge_norm", &RunConfig::kge_norm),
      number_field("split_train", &RunConfig::split_train),
      number_field("split_valid", &RunConfig::split_valid),
      number_field("split_test", &RunConfig::split_test),
      string_field("view_fusion", &RunConfig::view_fusion),
      string_field("subgraph_fusion", &RunConfig::subgraph_fusion),
      bool_field("per_node_attention", &RunConfig::per_node_attention),
      string_field("drop_views", &RunConfig::drop_views),
      string_field("drop_subgraphs", &RunConfig::drop_subgraphs),
      string_field("edge_fractions", &RunConfig::edge_fractions),
  };
  return table;
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(*this, trim(value));
      return;
    }
  }
  throw std::invalid_argument("unknown config key '" + std::string(key) + "'");
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += fmt::format("{}={}\n", f.key, f.get(*this));
  return out;
}

std::set<ViewId> RunConfig::dropped_views() const {
  std::set<ViewId> out;
  for (auto part : split_list(drop_views)) out.insert(parse_view(part));
  return out;
}

std::set<SubgraphId> RunConfig::dropped_subgraphs() const {
  std::set<SubgraphId> out;
  for (auto part : split_list(drop_subgraphs)) out.insert(parse_subgraph(part));
  return out;
}

std::vector<std::pair<SubgraphId, double>> RunConfig::edge_removals() const {
  std::vector<std::pair<SubgraphId, double>> out;
  for (auto part : split_list(edge_fractions)) {
    const auto colon = part.find(':');
    if (colon == std::string_view::npos) bad_value("edge_fractions", part);
    const double f = parse_number<double>("edge_fractions", trim(part.substr(colon + 1)));
    if (f < 0 || f > 1) throw std::invalid_argument("edge fraction must lie in [0, 1]");
    out.emplace_back(parse_subgraph(trim(part.substr(0, colon))), f);
  }
  return out;
}

void RunConfig::validate() const {
  if (optimizer != "AdamW") throw std::invalid_argument("only the AdamW optimizer is supported");
  if (input_dim == 0 || hidden == 0 || layers == 0 || classifier_hidden == 0) {
    throw std::invalid_argument("model sizes must be at least 1");
  }
  if (epochs == 0 || batch_size == 0 || fanout == 0) throw std::invalid_argument("epochs, batch_size and fanout must be at least 1");
  if (!(dropout >= 0 && dropout < 1)) throw std::invalid_argument("dropout must lie in [0, 1)");
  if (!(lr > 0)) throw std::invalid_argument("lr must be positive");
  if (weight_decay < 0) throw std::invalid_argument("weight_decay must be non-negative");
  if (patience == 0 || !(lr_factor > 0 && lr_factor < 1)) throw std::invalid_argument("invalid scheduler settings");
  if (kge_dim == 0 || kge_epochs == 0 || kge_batch == 0 || !(kge_margin > 0) || !(kge_lr > 0)) {
    throw std::invalid_argument("invalid KGE settings");
  }
  if (kge_norm != 1 && kge_norm != 2) throw std::invalid_argument("kge_norm must be 1 or 2");
  if (split_train < 0 || split_valid < 0 || split_test < 0 ||
      std::abs(split_train + split_valid + split_test - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must be non-negative and sum to 1");
  }
  parse_fusion(view_fusion);
  parse_fusion(subgraph_fusion);
  edge_removals();
  model_config().validate();
}

MvsdConfig RunConfig::model_config() const {
  MvsdConfig m;
  m.semantic_dim = input_dim;
  m.knowledge_dim = kge_dim;
  m.hidden = hidden;
  m.layers = layers;
  m.classifier_hidden = classifier_hidden;
  m.dropout = dropout;
  m.per_node_attention = per_node_attention;
  m.view_fusion = parse_fusion(view_fusion);
  m.subgraph_fusion = parse_fusion(subgraph_fusion);
  m.dropped_views = dropped_views();
  m.dropped_subgraphs = dropped_subgraphs();
  return m;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.fanout = fanout;
  t.sample = sample;
  t.optimizer = {lr, beta1, beta2, eps, weight_decay};
  t.patience = patience;
  t.lr_factor = lr_factor;
  t.seed = stage_seed(*this, "train");
  return t;
}

KgeConfig RunConfig::kge_config() const {
  KgeConfig k;
  k.dim = kge_dim;
  k.margin = kge_margin;
  k.epochs = kge_epochs;
  k.batch_size = kge_batch;
  k.lr = kge_lr;
  k.norm = kge_norm;
  k.seed = stage_seed(*this, "kge");
  return k;
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig rc;
  std::size_t lineno = 0;
  while (!text.empty()) {
    ++lineno;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument(fmt::format("config line {}: expected key=value", lineno));
    }
    try {
      rc.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(fmt::format("config line {}: {}", lineno, e.what()));
    }
  }
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open config " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

void save_run_config(const RunConfig& rc, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << rc.to_text();
  if (!out) throw std::runtime_error("write failed for " + file.string());
}

std::uint64_t stage_seed(const RunConfig& rc, std::string_view stage) { return derive_seed(rc.seed, stage); }

}  // namespace mvsd
