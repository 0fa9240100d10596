// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#include "pulse/config.hpp"

#include <fmt/format.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <json.hpp>
#include <sstream>

#include "pulse/error.hpp"

namespace pulse {

namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t parse_size(const std::string& key, const std::string& text) {
  std::size_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError(fmt::format("{}: expected a non-negative integer, got '{}'", key, text));
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError(fmt::format("{}: expected an unsigned integer, got '{}'", key, text));
  return v;
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError(fmt::format("{}: expected a number, got '{}'", key, text));
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, text));
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto size_key = [&t](const std::string& name, auto member) {
      t[name] = [member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = parse_size(k, v); };
    };
    auto double_key = [&t](const std::string& name, auto member) {
      t[name] = [member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = parse_double(k, v); };
    };
    auto bool_key = [&t](const std::string& name, auto member) {
      t[name] = [member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = parse_bool(k, v); };
    };

    t["data.timestamp_column"] = [](RunConfig& c, const std::string&, const std::string& v) {
      c.data.timestamp_column = v;
    };
    double_key("data.train_ratio", [](RunConfig& c) -> double& { return c.data.ratios.train; });
    double_key("data.val_ratio", [](RunConfig& c) -> double& { return c.data.ratios.val; });
    double_key("data.test_ratio", [](RunConfig& c) -> double& { return c.data.ratios.test; });
    t["data.marks"] = [](RunConfig& c, const std::string&, const std::string& v) {
      parse_mark_spec(v);
      c.data.marks = v;
    };
    size_key("data.acf_max_lag", [](RunConfig& c) -> std::size_t& { return c.data.acf_max_lag; });

    size_key("model.lookback", [](RunConfig& c) -> std::size_t& { return c.train.model.lookback; });
    size_key("model.horizon", [](RunConfig& c) -> std::size_t& { return c.train.model.horizon; });
    t["model.period"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      if (v == "auto") {
        c.data.auto_period = true;
      } else {
        c.data.auto_period = false;
        c.train.model.period = parse_size(k, v);
      }
    };
    size_key("model.codebook_size", [](RunConfig& c) -> std::size_t& { return c.train.model.codebook_size; });
    size_key("model.patch", [](RunConfig& c) -> std::size_t& { return c.train.model.patch; });
    size_key("model.d_router", [](RunConfig& c) -> std::size_t& { return c.train.model.d_router; });
    size_key("model.d_backbone", [](RunConfig& c) -> std::size_t& { return c.train.model.d_backbone; });
    size_key("model.d_time", [](RunConfig& c) -> std::size_t& { return c.train.model.d_time; });
    double_key("model.dropout", [](RunConfig& c) -> double& { return c.train.model.dropout; });
    t["model.backbone"] = [](RunConfig& c, const std::string&, const std::string& v) { c.train.model.backbone = v; };
    bool_key("model.swap_stage1", [](RunConfig& c) -> bool& { return c.train.model.swap_stage1; });
    bool_key("model.affine", [](RunConfig& c) -> bool& { return c.train.model.affine; });

    double_key("train.lr", [](RunConfig& c) -> double& { return c.train.lr; });
    size_key("train.epochs", [](RunConfig& c) -> std::size_t& { return c.train.epochs; });
    size_key("train.patience", [](RunConfig& c) -> std::size_t& { return c.train.patience; });
    size_key("train.batch_size", [](RunConfig& c) -> std::size_t& { return c.train.batch_size; });
    double_key("train.alpha", [](RunConfig& c) -> double& { return c.train.alpha; });
    t["train.seed"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.train.seed = parse_u64(k, v); };
    double_key("train.clip_norm", [](RunConfig& c) -> double& { return c.train.clip_norm; });
    bool_key("train.per_sample_lambda", [](RunConfig& c) -> bool& { return c.train.per_sample_lambda; });
    t["train.force_lambda"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      if (v == "none" || v.empty()) {
        c.train.force_lambda.reset();
      } else {
        c.train.force_lambda = parse_double(k, v);
      }
    };
    size_key("train.eval_threads", [](RunConfig& c) -> std::size_t& { return c.train.eval_threads; });

    bool_key("flags.use_anchor", [](RunConfig& c) -> bool& { return c.train.model.flags.use_anchor; });
    bool_key("flags.use_router", [](RunConfig& c) -> bool& { return c.train.model.flags.use_router; });
    bool_key("flags.use_sam", [](RunConfig& c) -> bool& { return c.train.model.flags.use_sam; });
    bool_key("flags.statistic_aware", [](RunConfig& c) -> bool& { return c.train.model.flags.statistic_aware; });
    return t;
  }();
  return table;
}

std::string format_double(double v) { return fmt::format("{}", v); }

json to_json_value(const RunConfig& c) {
  const auto& m = c.train.model;
  json j;
  j["data"] = {{"timestamp_column", c.data.timestamp_column},
               {"train_ratio", c.data.ratios.train},
               {"val_ratio", c.data.ratios.val},
               {"test_ratio", c.data.ratios.test},
               {"marks", c.data.marks},
               {"auto_period", c.data.auto_period},
               {"acf_max_lag", c.data.acf_max_lag}};
  j["model"] = {{"lookback", m.lookback},       {"horizon", m.horizon},
                {"channels", m.channels},       {"mark_features", m.mark_features},
                {"period", m.period},           {"codebook_size", m.codebook_size},
                {"patch", m.patch},             {"d_router", m.d_router},
                {"d_backbone", m.d_backbone},   {"d_time", m.d_time},
                {"dropout", m.dropout},         {"backbone", m.backbone},
                {"swap_stage1", m.swap_stage1}, {"affine", m.affine}};
  j["flags"] = {{"use_anchor", m.flags.use_anchor},
                {"use_router", m.flags.use_router},
                {"use_sam", m.flags.use_sam},
                {"statistic_aware", m.flags.statistic_aware}};
  j["train"] = {{"lr", c.train.lr},
                {"epochs", c.train.epochs},
                {"patience", c.train.patience},
                {"batch_size", c.train.batch_size},
                {"alpha", c.train.alpha},
                {"seed", c.train.seed},
                {"clip_norm", c.train.clip_norm},
                {"per_sample_lambda", c.train.per_sample_lambda},
                {"force_lambda", c.train.force_lambda ? json(*c.train.force_lambda) : json(nullptr)},
                {"eval_threads", c.train.eval_threads}};
  return j;
}

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  if (!(lr > 0.0)) throw ConfigError(fmt::format("train.lr must be positive, got {}", lr));
  if (epochs == 0) throw ConfigError("train.epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (!(alpha > 0.0)) throw ConfigError(fmt::format("train.alpha must be positive, got {}", alpha));
  if (clip_norm < 0.0) throw ConfigError("train.clip_norm must be >= 0");
  if (force_lambda && !(*force_lambda >= 0.0 && *force_lambda <= 1.0)) {
    throw ConfigError(fmt::format("train.force_lambda {} outside [0, 1]", *force_lambda));
  }
  if (eval_threads == 0) throw ConfigError("train.eval_threads must be >= 1");
}

RunConfig parse_run_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }
  RunConfig cfg;
  const auto& table = setters();
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError(fmt::format("config key '{}' outside a section", section));
    }
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      const auto it = table.find(full);
      if (it == table.end()) throw ConfigError(fmt::format("unknown config key '{}'", full));
      it->second(cfg, full, trim(value.data()));
    }
  }
  cfg.train.validate();
  const auto& r = cfg.data.ratios;
  if (!(r.train > 0.0) || r.val < 0.0 || !(r.test > 0.0) || r.train + r.val + r.test > 1.0 + 1e-9) {
    throw ConfigError(fmt::format("invalid split ratios ({}, {}, {})", r.train, r.val, r.test));
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
  return parse_run_config(in);
}

std::string to_ini(const RunConfig& c) {
  const auto& m = c.train.model;
  std::ostringstream out;
  out << "[data]\n"
      << "timestamp_column = " << c.data.timestamp_column << "\n"
      << "train_ratio = " << format_double(c.data.ratios.train) << "\n"
      << "val_ratio = " << format_double(c.data.ratios.val) << "\n"
      << "test_ratio = " << format_double(c.data.ratios.test) << "\n"
      << "marks = " << c.data.marks << "\n"
      << "acf_max_lag = " << c.data.acf_max_lag << "\n\n"
      << "[model]\n"
      << "lookback = " << m.lookback << "\n"
      << "horizon = " << m.horizon << "\n"
      << "period = " << (c.data.auto_period ? std::string("auto") : std::to_string(m.period)) << "\n"
      << "codebook_size = " << m.codebook_size << "\n"
      << "patch = " << m.patch << "\n"
      << "d_router = " << m.d_router << "\n"
      << "d_backbone = " << m.d_backbone << "\n"
      << "d_time = " << m.d_time << "\n"
      << "dropout = " << format_double(m.dropout) << "\n"
      << "backbone = " << m.backbone << "\n"
      << "swap_stage1 = " << (m.swap_stage1 ? "true" : "false") << "\n"
      << "affine = " << (m.affine ? "true" : "false") << "\n\n"
      << "[train]\n"
      << "lr = " << format_double(c.train.lr) << "\n"
      << "epochs = " << c.train.epochs << "\n"
      << "patience = " << c.train.patience << "\n"
      << "batch_size = " << c.train.batch_size << "\n"
      << "alpha = " << format_double(c.train.alpha) << "\n"
      << "seed = " << c.train.seed << "\n"
      << "clip_norm = " << format_double(c.train.clip_norm) << "\n"
      << "per_sample_lambda = " << (c.train.per_sample_lambda ? "true" : "false") << "\n"
      << "force_lambda = " << (c.train.force_lambda ? format_double(*c.train.force_lambda) : std::string("none")) << "\n"
      << "eval_threads = " << c.train.eval_threads << "\n\n"
      << "[flags]\n"
      << "use_anchor = " << (m.flags.use_anchor ? "true" : "false") << "\n"
      << "use_router = " << (m.flags.use_router ? "true" : "false") << "\n"
      << "use_sam = " << (m.flags.use_sam ? "true" : "false") << "\n"
      << "statistic_aware = " << (m.flags.statistic_aware ? "true" : "false") << "\n";
  return out.str();
}

std::string to_json(const RunConfig& cfg) { return to_json_value(cfg).dump(); }

RunConfig run_config_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    RunConfig c;
    const auto& d = j.at("data");
    c.data.timestamp_column = d.at("timestamp_column").get<std::string>();
    c.data.ratios = {d.at("train_ratio").get<double>(), d.at("val_ratio").get<double>(), d.at("test_ratio").get<double>()};
    c.data.marks = d.at("marks").get<std::string>();
    c.data.auto_period = d.at("auto_period").get<bool>();
    c.data.acf_max_lag = d.at("acf_max_lag").get<std::size_t>();
    const auto& m = j.at("model");
    auto& mc = c.train.model;
    mc.lookback = m.at("lookback").get<std::size_t>();
    mc.horizon = m.at("horizon").get<std::size_t>();
    mc.channels = m.at("channels").get<std::size_t>();
    mc.mark_features = m.at("mark_features").get<std::size_t>();
    mc.period = m.at("period").get<std::size_t>();
    mc.codebook_size = m.at("codebook_size").get<std::size_t>();
    mc.patch = m.at("patch").get<std::size_t>();
    mc.d_router = m.at("d_router").get<std::size_t>();
    mc.d_backbone = m.at("d_backbone").get<std::size_t>();
    mc.d_time = m.at("d_time").get<std::size_t>();
    mc.dropout = m.at("dropout").get<double>();
    mc.backbone = m.at("backbone").get<std::string>();
    mc.swap_stage1 = m.at("swap_stage1").get<bool>();
    mc.affine = m.at("affine").get<bool>();
    const auto& f = j.at("flags");
    mc.flags = {f.at("use_anchor").get<bool>(), f.at("use_router").get<bool>(), f.at("use_sam").get<bool>(),
                f.at("statistic_aware").get<bool>()};
    const auto& t = j.at("train");
    c.train.lr = t.at("lr").get<double>();
    c.train.epochs = t.at("epochs").get<std::size_t>();
    c.train.patience = t.at("patience").get<std::size_t>();
    c.train.batch_size = t.at("batch_size").get<std::size_t>();
    c.train.alpha = t.at("alpha").get<double>();
    c.train.seed = t.at("seed").get<std::uint64_t>();
    c.train.clip_norm = t.at("clip_norm").get<double>();
    c.train.per_sample_lambda = t.at("per_sample_lambda").get<bool>();
    if (!t.at("force_lambda").is_null()) c.train.force_lambda = t.at("force_lambda").get<double>();
    c.train.eval_threads = t.at("eval_threads").get<std::size_t>();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("malformed config JSON: {}", e.what()));
  }
}

std::string config_hash(const RunConfig& cfg) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : to_json(cfg)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return fmt::format("{:016x}", h);
}

std::string csv_header(const RunConfig& cfg) {
  return fmt::format("# config_hash={} config={}", config_hash(cfg), to_json(cfg));
}

void apply_seed_override(RunConfig& cfg) {
  const char* env = std::getenv("PULSE_SEED");
  if (env == nullptr || *env == '\0') return;
  cfg.train.seed = parse_u64("PULSE_SEED", env);
}

}  // namespace pulse
