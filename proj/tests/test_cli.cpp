#include <doctest.h>

#include <fstream>
#include <sstream>

#include "expe/cli/commands.hpp"
#include "expe/cli/run_config.hpp"
#include "expe/error.hpp"
#include "expe/json_fields.hpp"
#include "fixtures.hpp"

using namespace expe;
using namespace expe::cli;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> errors_of(const json& j) {
  try {
    parse_run_config(j);
  } catch (const ConfigValidationError& e) {
    return e.errors();
  }
  return {};
}

bool has_error_at(const std::vector<std::string>& errors, const std::string& key) {
  for (const auto& e : errors)
    if (e.rfind(key + ":", 0) == 0) return true;
  return false;
}

// A model small enough to train in a second on the sample corpus.
json small_config(const std::filesystem::path& out) {
  return {{"model", {{"d_model", 32}, {"n_heads", 2}, {"n_layers", 1}, {"seq_len", 16}, {"dropout", 0.0}}},
          {"training", {{"total_steps", 4}, {"batch_size", 2}}},
          {"eval", {{"n_windows", 4}, {"multiples", {1, 2}}}},
          {"out_dir", out.string()},
          {"run_name", "smoke"}};
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "expe_lab");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("empty config is fully defaulted") {
  const auto cfg = parse_run_config(json::object());
  CHECK(cfg.model.d_model == 128);
  CHECK(cfg.model.seq_len == 64);
  CHECK(cfg.model.encoding.kind() == pos::SchemeKind::expe);
  CHECK(cfg.model.encoding.width() == 16);
  CHECK(std::get<pos::ExpeParams>(cfg.model.encoding.params).theta == 1.0 / 128);
  CHECK(cfg.training.batch_size == 16);
  CHECK(cfg.eval.n_windows == 64);
  CHECK(cfg.quantcheck.l == 16);
  CHECK(cfg.run_name == "run");
  CHECK(parse_run_config(nullptr).model.d_model == 128);
  // Normalised output reparses to itself.
  const auto j = run_config_to_json(cfg);
  CHECK(run_config_to_json(parse_run_config(j)) == j);
}

TEST_CASE("theta follows the training length") {
  auto cfg = parse_run_config({{"model", {{"seq_len", 256}}}});
  CHECK(std::get<pos::ExpeParams>(cfg.model.encoding.params).theta == 1.0 / 512);
  cfg = parse_run_config({{"encoding", {{"type", "exqpe"}}}});
  const auto& q = std::get<pos::ExqpeParams>(cfg.model.encoding.params);
  CHECK(q.theta1 == 1.0 / 128);
  CHECK(q.theta2 == 1.0 / 16);
  cfg = parse_run_config({{"encoding", {{"theta", 0.25}}}});
  CHECK(std::get<pos::ExpeParams>(cfg.model.encoding.params).theta == 0.25);
}

TEST_CASE("invariant violations carry key paths") {
  CHECK(has_error_at(errors_of({{"encoding", {{"l", 200}}}}), "encoding.l"));
  CHECK(has_error_at(errors_of({{"model", {{"n_heads", 3}}}}), "model.head_size"));
  CHECK(has_error_at(errors_of({{"model", {{"dropout", 1.5}}}}), "model.dropout"));
  CHECK(has_error_at(errors_of({{"training", {{"batch_size", 0}}}}), "training.batch_size"));
  CHECK(has_error_at(errors_of({{"training", {{"grad_accum_steps", 0}}}}), "training.grad_accum_steps"));
  CHECK(has_error_at(errors_of({{"training", {{"warmup_ratio", 1.0}}}}), "training.warmup_ratio"));
  CHECK(has_error_at(errors_of({{"training", {{"precision", "fp8"}}}}), "training.precision"));
  CHECK(has_error_at(errors_of({{"eval", {{"multiples", {3}}}}}), "eval.multiples"));
  CHECK(has_error_at(errors_of({{"eval", {{"scales", {-1.0}}}}}), "eval.scales"));
  CHECK(has_error_at(errors_of({{"eval", {{"split", "val"}}}}), "eval.split"));
  CHECK(has_error_at(errors_of({{"ablation", {{"variants", {"bogus"}}}}}), "ablation.variants"));
  CHECK(has_error_at(errors_of({{"quantcheck", {{"format", "fp7"}}}}), "quantcheck.format"));
  CHECK(has_error_at(errors_of({{"encoding", {{"type", "alibi"}}}}), "encoding.type"));
  CHECK(has_error_at(errors_of({{"model", {{"d_model", "big"}}}}), "model.d_model"));
  CHECK(has_error_at(errors_of({{"run_name", "a/b"}}), "run_name"));
}

TEST_CASE("unknown keys are rejected") {
  CHECK(has_error_at(errors_of({{"modle", json::object()}}), "modle"));
  CHECK(has_error_at(errors_of({{"training", {{"lr", 0.1}}}}), "training.lr"));
  CHECK(has_error_at(errors_of({{"encoding", {{"thetaa", 0.1}}}}), "encoding.thetaa"));
}

TEST_CASE("all violations are reported together") {
  const auto errors = errors_of({{"encoding", {{"l", 200}}},
                                 {"training", {{"batch_size", 0}}},
                                 {"eval", {{"split", "x"}}},
                                 {"extra", 1}});
  CHECK(errors.size() >= 4);
  CHECK(has_error_at(errors, "encoding.l"));
  CHECK(has_error_at(errors, "training.batch_size"));
  CHECK(has_error_at(errors, "eval.split"));
  CHECK(has_error_at(errors, "extra"));
}

TEST_CASE("overrides") {
  const auto j = apply_overrides(json::object(), {"training.seed=7", "encoding.type=rope", "eval.scales=[1,0.5]"});
  CHECK(j["training"]["seed"] == 7);
  CHECK(j["encoding"]["type"] == "rope");
  CHECK(j["eval"]["scales"] == json({1, 0.5}));
  CHECK_THROWS_AS(apply_overrides(json::object(), {"noequals"}), ConfigError);
  CHECK_THROWS_AS(apply_overrides(json::object(), {"a..b=1"}), ConfigError);
  CHECK_THROWS_AS(apply_overrides(json{{"a", 1}}, {"a.b=1"}), ConfigError);

  const json file = {{"training", {{"seed", 7}}}};
  CHECK(run_config_to_json(parse_run_config(file)) ==
        run_config_to_json(parse_run_config(apply_overrides(json::object(), {"training.seed=7"}))));
}

TEST_CASE("flags and config file give the same run") {
  fixture::TempDir dir("cli_same");
  auto base = small_config(dir.path());
  auto with_seed = base;
  with_seed["training"]["seed"] = 7;
  with_seed["run_name"] = "file";
  std::ofstream(dir / "file.json") << with_seed.dump();
  std::ofstream(dir / "base.json") << base.dump();
  CHECK(run({"train", "--config", (dir / "file.json").string()}) == 0);
  CHECK(run({"train", "--config", (dir / "base.json").string(), "--seed", "7", "--set", "run_name=flag"}) == 0);
  CHECK(slurp(dir / "file/checkpoints/final.ckpt") == slurp(dir / "flag/checkpoints/final.ckpt"));
  CHECK(slurp(dir / "file/metrics.csv").size() > 0);
}

TEST_CASE("train, eval and sweep on the sample corpus") {
  REQUIRE(std::filesystem::exists(sample_corpus_path()));
  fixture::TempDir dir("cli_run");
  const auto cfg = parse_run_config(small_config(dir.path()));
  std::ostringstream out, log;
  auto artifacts = run_command("train", cfg, out, log);
  CHECK(std::filesystem::exists(dir / "smoke/checkpoints/final.ckpt"));
  CHECK(std::filesystem::exists(dir / "smoke/metrics.csv"));
  CHECK(std::filesystem::exists(dir / "smoke/config.json"));
  for (const auto& p : artifacts) {
    CHECK(std::filesystem::exists(p));
    CHECK(out.str().find(p.string()) != std::string::npos);
  }

  const auto ev = run_command("eval", cfg, out, log);
  CHECK(std::filesystem::exists(dir / "smoke/eval.csv"));
  for (const auto& p : ev) CHECK(std::filesystem::exists(p));

  std::ofstream(dir / "cfg.json") << small_config(dir.path()).dump();
  CHECK(run({"sweep", "--config", (dir / "cfg.json").string(), "--multiples", "1,2,4", "--scales", "1,0.5"}) == 0);
  std::ifstream csv(dir / "smoke/sweep.csv");
  std::string line;
  int rows = -1;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 6);
  const auto report = json::parse(slurp(dir / "smoke/sweep.json"));
  CHECK(report["rows"].size() == 6);
  CHECK(report["metadata"].contains("config_hash"));
}

TEST_CASE("quantcheck command") {
  fixture::TempDir dir("cli_quant");
  CHECK(run({"quantcheck", "--format", "bf16-sim", "--max-len", "16384", "--out", dir.path().string()}) == 0);
  const auto j = json::parse(slurp(dir / "run/quantcheck.json"));
  CHECK(j["format"] == "bf16-sim");
  CHECK(j["max_len"] == 16384);
  CHECK(j["exqpe_collides_later"] == true);
  CHECK(j["expe"]["first_collision"].is_number());
}

TEST_CASE("exit codes") {
  fixture::TempDir dir("cli_exit");
  CHECK(run({"train", "--set", "encoding.l=500", "--out", dir.path().string()}) == 2);
  CHECK(run({"train", "--config", (dir / "missing.json").string()}) == 2);
  CHECK(run({"eval", "--out", dir.path().string()}) == 3);
  CHECK(run({"train", "--set", "training.corpus=/nonexistent/corpus.txt", "--out", dir.path().string()}) == 3);
  CHECK(run({"bogus"}) != 0);
}

}  // TEST_SUITE
