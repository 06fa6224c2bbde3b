#include "expe/cli/run_config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "expe/evaluation/ablation.hpp"
#include "expe/json_fields.hpp"
#include "expe/positional/quantization.hpp"
#include "expe/transformer/config_json.hpp"

namespace expe::cli {

using nlohmann::json;

namespace {

std::string default_out_dir() {
  const char* env = std::getenv("EXPE_OUT_DIR");
  return env && *env ? env : "runs";
}

void check_multiples(FieldReader& r, const std::string& key, const std::vector<std::size_t>& multiples) {
  if (multiples.empty()) r.error(key, "must not be empty");
  for (auto m : multiples) {
    if (m != 1 && m != 2 && m != 4 && m != 8 && m != 16) {
      r.error(key, "value " + std::to_string(m) + " not in {1, 2, 4, 8, 16}");
    }
  }
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  std::vector<std::string> errors;
  FieldReader root(j, "", errors);
  RunConfig cfg;
  cfg.out_dir = default_out_dir();
  root.get("out_dir", cfg.out_dir);
  root.get("run_name", cfg.run_name);
  if (cfg.run_name.empty() || cfg.run_name.find('/') != std::string::npos) {
    root.error("run_name", "must be a non-empty name without '/'");
  }

  auto model = root.child("model");
  auto encoding = root.child("encoding");
  cfg.model = nn::read_model_config(model, encoding);

  auto training = root.child("training");
  cfg.training = train::read_train_config(training);

  auto ev = root.child("eval");
  ev.get_count("n_windows", cfg.eval.n_windows);
  ev.get("seed", cfg.eval.seed);
  ev.get_count("batch", cfg.eval.batch);
  ev.get("multiples", cfg.eval.multiples);
  ev.get("scales", cfg.eval.scales);
  ev.get("checkpoint", cfg.eval.checkpoint);
  ev.get("split", cfg.eval.split);
  ev.reject_unknown();
  if (cfg.eval.n_windows < 1) ev.error("n_windows", "must be at least 1");
  if (cfg.eval.batch < 1) ev.error("batch", "must be at least 1");
  check_multiples(ev, "multiples", cfg.eval.multiples);
  if (cfg.eval.scales.empty()) ev.error("scales", "must not be empty");
  for (auto s : cfg.eval.scales) {
    if (!(s > 0.0) || !std::isfinite(s)) ev.error("scales", "every scale factor must be positive");
  }
  if (cfg.eval.split != "train" && cfg.eval.split != "dev" && cfg.eval.split != "test") {
    ev.error("split", "must be train, dev or test");
  }

  auto ab = root.child("ablation");
  ab.get("multiples", cfg.ablation.multiples);
  ab.get("variants", cfg.ablation.variants);
  ab.reject_unknown();
  check_multiples(ab, "multiples", cfg.ablation.multiples);
  for (const auto& v : cfg.ablation.variants) {
    try {
      eval::variant_from_tag(v);
    } catch (const ConfigError&) {
      ab.error("variants", "unknown variant '" + v + "'");
    }
  }

  auto q = root.child("quantcheck");
  q.get("format", cfg.quantcheck.format);
  q.get("max_len", cfg.quantcheck.max_len);
  q.get("S", cfg.quantcheck.S);
  q.get("theta", cfg.quantcheck.theta);
  std::optional<double> theta1;
  q.get("theta1", theta1);
  cfg.quantcheck.theta1 = theta1.value_or(cfg.quantcheck.theta);
  q.get("theta2", cfg.quantcheck.theta2);
  std::optional<std::size_t> l;
  q.get_count("l", l);
  cfg.quantcheck.l = l.value_or(std::max<std::size_t>(1, cfg.model.d_model / 8));
  q.reject_unknown();
  try {
    pos::FloatFormat::from_name(cfg.quantcheck.format);
  } catch (const ConfigError& e) {
    q.error("format", e.what());
  }
  if (cfg.quantcheck.max_len < 2) q.error("max_len", "must be at least 2");
  if (!(cfg.quantcheck.theta > 0.0)) q.error("theta", "must be positive");
  if (!(cfg.quantcheck.theta1 >= 0.0)) q.error("theta1", "must be non-negative");
  if (!(cfg.quantcheck.theta2 > 0.0)) q.error("theta2", "must be positive");
  if (cfg.quantcheck.l < 1) q.error("l", "must be at least 1");

  root.reject_unknown();
  if (!errors.empty()) throw ConfigValidationError(errors);
  return cfg;
}

RunConfig validate_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

json run_config_to_json(const RunConfig& c) {
  json j = nn::model_config_to_json(c.model);
  j["training"] = train::train_config_to_json(c.training);
  j["eval"] = {{"n_windows", c.eval.n_windows}, {"seed", c.eval.seed},         {"batch", c.eval.batch},
               {"multiples", c.eval.multiples}, {"scales", c.eval.scales},     {"checkpoint", c.eval.checkpoint},
               {"split", c.eval.split}};
  j["ablation"] = {{"multiples", c.ablation.multiples}, {"variants", c.ablation.variants}};
  j["quantcheck"] = {{"format", c.quantcheck.format}, {"max_len", c.quantcheck.max_len},
                     {"S", c.quantcheck.S},           {"theta", c.quantcheck.theta},
                     {"theta1", c.quantcheck.theta1}, {"theta2", c.quantcheck.theta2},
                     {"l", c.quantcheck.l}};
  j["out_dir"] = c.out_dir;
  j["run_name"] = c.run_name;
  return j;
}

json apply_overrides(json j, const std::vector<std::string>& assignments) {
  if (j.is_null()) j = json::object();
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + a + "' is not of the form key=value");
    const auto key = a.substr(0, eq);
    const auto text = a.substr(eq + 1);
    json value;
    try {
      value = json::parse(text);
    } catch (const json::exception&) {
      value = text;
    }
    json* node = &j;
    std::size_t begin = 0;
    while (true) {
      const auto dot = key.find('.', begin);
      const auto part = key.substr(begin, dot == std::string::npos ? std::string::npos : dot - begin);
      if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
      if (!node->is_object()) throw ConfigError("override '" + key + "': '" + part + "' is inside a non-object");
      if (dot == std::string::npos) {
        (*node)[part] = value;
        break;
      }
      node = &(*node)[part];
      if (node->is_null()) *node = json::object();
      begin = dot + 1;
    }
  }
  return j;
}

}  // namespace expe::cli
