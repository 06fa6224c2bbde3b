#include "expe/cli/commands.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "expe/evaluation/ablation.hpp"
#include "expe/evaluation/eval.hpp"
#include "expe/evaluation/report.hpp"
#include "expe/positional/quantization.hpp"
#include "expe/training/checkpoint.hpp"
#include "expe/training/corpus.hpp"
#include "expe/training/trainer.hpp"

#ifndef EXPE_SAMPLE_CORPUS
#define EXPE_SAMPLE_CORPUS "data/sample_corpus.txt"
#endif

namespace expe::cli {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path sample_corpus_path() { return EXPE_SAMPLE_CORPUS; }

namespace {

fs::path corpus_path(const RunConfig& cfg) {
  return cfg.training.corpus.empty() ? sample_corpus_path() : fs::path(cfg.training.corpus);
}

const train::TokenStream& pick_split(const train::CorpusSplit& split, const std::string& name) {
  if (name == "train") return split.train;
  if (name == "dev") return split.dev;
  return split.test;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

struct Context {
  const RunConfig& cfg;
  std::ostream& out;
  std::ostream& log;
  std::vector<fs::path> artifacts;

  void artifact(const fs::path& p, const std::string& what) {
    artifacts.push_back(p);
    out << what << ": " << p.string() << "\n";
  }
};

template <typename T>
void train_command(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto split = train::load_corpus(corpus_path(cfg));
  ctx.log << "corpus " << corpus_path(cfg).string() << ": " << split.train.size() << " train / " << split.dev.size()
          << " dev / " << split.test.size() << " test tokens\n";
  nn::Transformer<T> model(cfg.model, cfg.training.seed);
  const auto dir = cfg.run_dir();
  write_text(dir / "config.json", run_config_to_json(cfg).dump(2) + "\n");
  ctx.artifact(dir / "config.json", "config");

  train::TrainHooks<T> hooks;
  hooks.metrics_csv = dir / "metrics.csv";
  hooks.checkpoint_dir = dir / "checkpoints";
  hooks.log_every = std::max<std::size_t>(1, cfg.training.total_steps() / 20);
  hooks.on_eval = [&](std::uint64_t step, nn::Transformer<T>& m) {
    const auto r = eval::eval_loss(m, split.dev, cfg.model.seq_len, cfg.training.eval_windows, cfg.eval.seed);
    ctx.log << "step " << step << " dev loss " << r.mean_loss << " (+- " << r.std_error << ")\n";
  };
  ctx.out << "train: " << model.parameter_count() << " parameters, " << cfg.model.encoding.name() << ", "
          << cfg.training.total_steps() << " steps\n";
  train::Trainer<T> trainer(model, cfg.training);
  const auto result = trainer.run(split.train, hooks);
  ctx.out << "train: done, final loss "
          << (result.metrics.empty() ? std::string("n/a") : std::to_string(result.metrics.back().train_loss))
          << ", " << result.cpu_seconds << " s cpu\n";
  ctx.artifact(*hooks.metrics_csv, "metrics");
  for (const auto& p : result.checkpoints) ctx.artifact(p, "checkpoint");
}

template <typename T>
void eval_command(Context& ctx, const train::Checkpoint& ckpt, bool sweep) {
  const auto& cfg = ctx.cfg;
  auto model = train::model_from_checkpoint<T>(ckpt);
  const auto split = train::load_corpus(corpus_path(cfg));
  eval::SweepOptions so;
  so.multiples = cfg.eval.multiples;
  so.scales = sweep ? cfg.eval.scales : std::vector<double>{1.0};
  so.n_windows = cfg.eval.n_windows;
  so.seed = cfg.eval.seed;
  so.batch = cfg.eval.batch;
  so.model_tag = cfg.run_name;
  auto report = eval::extrapolation_sweep(model, pick_split(split, cfg.eval.split), so);
  report.metadata = eval::report_metadata(run_config_to_json(cfg));
  for (const auto& r : report.rows) {
    ctx.log << "ev=" << r.multiple << " scale " << r.scale << ": "
            << (r.error ? "error: " + *r.error : std::to_string(r.loss) + " nats") << "\n";
  }
  const auto paths = eval::write_report(report, cfg.run_dir(), sweep ? "sweep" : "eval");
  ctx.out << (sweep ? "sweep" : "eval") << ": " << report.rows.size() << " rows\n";
  ctx.artifact(paths.csv, "report");
  ctx.artifact(paths.json, "report");
  if (paths.svg) ctx.artifact(*paths.svg, "chart");
}

template <typename T>
void ablate_command(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto split = train::load_corpus(corpus_path(cfg));
  const auto dir = cfg.run_dir() / "ablation";
  eval::AblationOptions<T> opts;
  opts.multiples = cfg.ablation.multiples;
  opts.n_windows = cfg.eval.n_windows;
  opts.eval_seed = cfg.eval.seed;
  opts.eval_batch = cfg.eval.batch;
  opts.variants.clear();
  for (const auto& v : cfg.ablation.variants) opts.variants.push_back(eval::variant_from_tag(v));
  opts.hooks = [&](const std::string& tag) {
    train::TrainHooks<T> h;
    h.metrics_csv = dir / tag / "metrics.csv";
    h.log_every = std::max<std::size_t>(1, cfg.training.total_steps() / 10);
    ctx.log << "ablation variant " << tag << "\n";
    return h;
  };
  const auto runs = eval::ablation_suite<T>(cfg.model, cfg.training, split.train, pick_split(split, cfg.eval.split),
                                            opts);
  std::vector<eval::EvalReport> reports;
  json summary = json::array();
  for (const auto& r : runs) {
    reports.push_back(r.report);
    json losses = json::object();
    for (const auto& row : r.report.rows) {
      losses["ev" + std::to_string(row.multiple)] = row.error ? json(nullptr) : json(row.loss);
    }
    summary.push_back({{"variant", r.tag},
                       {"relative_time", r.relative_time},
                       {"cpu_seconds", r.cpu_seconds},
                       {"diverged", r.diverged},
                       {"last_finite_loss", r.last_finite_loss ? json(*r.last_finite_loss) : json(nullptr)},
                       {"loss", losses}});
    ctx.out << "ablate: " << r.tag << " relative time " << r.relative_time << (r.diverged ? " (diverged)" : "")
            << "\n";
    ctx.artifacts.push_back(dir / r.tag / "metrics.csv");
  }
  auto merged = eval::compare_report(reports);
  merged.metadata = eval::report_metadata(run_config_to_json(cfg));
  const auto paths = eval::write_report(merged, cfg.run_dir(), "ablation");
  write_text(cfg.run_dir() / "ablation_runs.json", summary.dump(2) + "\n");
  ctx.artifact(paths.csv, "report");
  ctx.artifact(paths.json, "report");
  if (paths.svg) ctx.artifact(*paths.svg, "chart");
  ctx.artifact(cfg.run_dir() / "ablation_runs.json", "summary");
}

void quantcheck_command(Context& ctx) {
  const auto& q = ctx.cfg.quantcheck;
  const auto fmt = pos::FloatFormat::from_name(q.format);
  pos::EncodingScheme expe;
  expe.params = pos::ExpeParams{q.S, q.theta, q.l, 1.0};
  pos::EncodingScheme exqpe;
  exqpe.params = pos::ExqpeParams{q.S, q.theta1, q.theta2, q.l, 1.0};
  const auto a = pos::quantization_sensitivity(expe, q.max_len, fmt);
  const auto b = pos::quantization_sensitivity(exqpe, q.max_len, fmt);
  auto first = [](const pos::CollisionReport& r) {
    return r.first_collision ? std::to_string(*r.first_collision) : std::string("none");
  };
  const bool later = a.first_collision && (!b.first_collision || *b.first_collision > *a.first_collision);
  json j = {{"format", q.format}, {"max_len", q.max_len},          {"expe", pos::to_json(a)},
            {"exqpe", pos::to_json(b)}, {"exqpe_collides_later", later}};
  const auto path = ctx.cfg.run_dir() / "quantcheck.json";
  write_text(path, j.dump(2) + "\n");
  ctx.out << "quantcheck: " << q.format << " over " << q.max_len << " positions, first collision ExPE " << first(a)
          << " (" << a.collision_count << " total), ExQPE " << first(b) << " (" << b.collision_count << " total)\n";
  ctx.artifact(path, "report");
}

train::Checkpoint load_eval_checkpoint(const RunConfig& cfg) {
  const fs::path path =
      cfg.eval.checkpoint.empty() ? cfg.run_dir() / "checkpoints" / "final.ckpt" : fs::path(cfg.eval.checkpoint);
  if (!fs::exists(path)) throw CheckpointError("checkpoint not found: " + path.string() + " (run train first)");
  return train::load_checkpoint(path);
}

}  // namespace

std::vector<fs::path> run_command(const std::string& command, const RunConfig& cfg, std::ostream& out,
                                  std::ostream& log) {
  Context ctx{cfg, out, log, {}};
  const bool fp64 = cfg.training.precision == train::Precision::fp64;
  if (command == "train") {
    fp64 ? train_command<double>(ctx) : train_command<float>(ctx);
  } else if (command == "eval" || command == "sweep") {
    const auto ckpt = load_eval_checkpoint(cfg);
    const bool ckpt64 = ckpt.train && ckpt.train->precision == train::Precision::fp64;
    ckpt64 ? eval_command<double>(ctx, ckpt, command == "sweep") : eval_command<float>(ctx, ckpt, command == "sweep");
  } else if (command == "ablate") {
    fp64 ? ablate_command<double>(ctx) : ablate_command<float>(ctx);
  } else if (command == "quantcheck") {
    quantcheck_command(ctx);
  } else {
    throw ConfigError("unknown command '" + command + "'");
  }
  return ctx.artifacts;
}

namespace {

template <typename V>
std::string join_list(const std::vector<V>& values) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < values.size(); ++i) os << (i ? "," : "") << values[i];
  os << ']';
  return os.str();
}

const char* command_help(const std::string& name) {
  if (name == "train") return "train a model and write checkpoints and metrics";
  if (name == "eval") return "evaluate the final checkpoint at the configured length multiples";
  if (name == "sweep") return "loss across evaluation lengths and encoding scales";
  if (name == "ablate") return "train and evaluate every ExPE ablation variant";
  if (name == "quantcheck") return "compare ExPE and ExQPE position collisions in a low-precision format";
  return "";
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Positional encoding length-extrapolation lab"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::vector<std::size_t> multiples;
  std::vector<double> scales;
  std::string format;
  std::optional<std::uint64_t> max_len;

  for (const auto& name : kCommands) {
    auto* sub = app.add_subcommand(name, command_help(name));
    sub->add_option("--config", config_path, "JSON run config");
    sub->add_option("--out", out_dir, "output directory (default $EXPE_OUT_DIR or ./runs)");
    sub->add_option("--set", sets, "override a config key, e.g. training.seed=7 (repeatable)")->take_all();
    sub->add_option("--seed", seed, "training seed");
    if (name == "sweep") {
      sub->add_option("--multiples", multiples, "evaluation multiples, e.g. 1,2,4")->delimiter(',');
      sub->add_option("--scales", scales, "encoding scale factors, e.g. 1,0.5")->delimiter(',');
    }
    if (name == "quantcheck") {
      sub->add_option("--format", format, "float format: bf16-sim, fp16, tf32, fp32");
      sub->add_option("--max-len", max_len, "number of positions to check");
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  const auto command = app.get_subcommands().front()->get_name();

  try {
    json raw = json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot read config file " + config_path);
      try {
        raw = json::parse(in);
      } catch (const json::exception& e) {
        throw ConfigError("config file " + config_path + " is not valid JSON: " + e.what());
      }
    }
    // Flags are sugar for the equivalent --set assignments.
    std::vector<std::string> all = sets;
    if (!out_dir.empty()) all.push_back("out_dir=" + json(out_dir).dump());
    if (seed) all.push_back("training.seed=" + std::to_string(*seed));
    if (!multiples.empty()) all.push_back("eval.multiples=" + join_list(multiples));
    if (!scales.empty()) all.push_back("eval.scales=" + join_list(scales));
    if (!format.empty()) all.push_back("quantcheck.format=" + json(format).dump());
    if (max_len) all.push_back("quantcheck.max_len=" + std::to_string(*max_len));
    const auto cfg = parse_run_config(apply_overrides(raw, all));
    run_command(command, cfg, std::cout, std::cerr);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace expe::cli
