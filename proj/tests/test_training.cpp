#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "expe/error.hpp"
#include "expe/training/checkpoint.hpp"
#include "expe/training/corpus.hpp"
#include "expe/training/sampler.hpp"
#include "expe/training/synthetic.hpp"
#include "expe/training/tokenizer.hpp"
#include "expe/training/trainer.hpp"
#include "fixtures.hpp"

using namespace expe;
using namespace expe::train;
using num::TokenId;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

TrainConfig quick_train(std::uint64_t steps) {
  TrainConfig c;
  c.batch_size = 4;
  c.schedule.total_steps = steps;
  c.eval_max_multiple = 4;
  return c;
}

template <typename T>
std::vector<std::vector<T>> snapshot(const nn::Transformer<T>& m) {
  std::vector<std::vector<T>> out;
  for (const auto& p : m.parameters()) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("byte tokenizer") {
  CHECK(tokenize_bytes("") == std::vector<TokenId>{kBosId});
  CHECK(tokenize_bytes("AB") == std::vector<TokenId>{kBosId, 65, 66});
  std::string all;
  for (int b = 0; b < 256; ++b) all.push_back(static_cast<char>(b));
  const auto ids = tokenize_bytes(all);
  CHECK(ids.size() == 257);
  CHECK(ids[256] == 255);
  CHECK(detokenize(ids) == all);
  const std::vector<TokenId> bad = {kBosId, 300};
  CHECK_THROWS_AS(detokenize(bad), IndexError);
}

TEST_CASE("token stream layout and validation") {
  auto s = stream_from_documents("t", {"abc", "", "de"});
  CHECK(s.doc_count() == 3);
  CHECK(s.size() == 4 + 1 + 3);
  CHECK(s.doc_range(0) == std::pair<std::size_t, std::size_t>{0, 4});
  CHECK(s.doc_range(2) == std::pair<std::size_t, std::size_t>{5, 8});
  CHECK_NOTHROW(s.validate(257));
  CHECK_THROWS_AS(s.validate(100), DataError);
  s.doc_starts = {0, 6, 5};
  CHECK_THROWS_AS(s.validate(257), DataError);
}

TEST_CASE("corpus files split on form feeds") {
  fixture::TempDir dir("corpus");
  spit(dir / "b.txt", "second\fthird\f\f");
  spit(dir / "a.txt", "first");
  const auto docs = read_corpus_documents(dir.path());
  CHECK(docs == std::vector<std::string>{"first", "second", "third"});
  CHECK(read_corpus_documents(dir / "b.txt").size() == 2);
  spit(dir / "empty.txt", "");
  CHECK_THROWS_AS(read_corpus_documents(dir / "empty.txt"), DataError);
  CHECK_THROWS_AS(read_corpus_documents(dir / "missing.txt"), DataError);
}

TEST_CASE("document split is 90/5/5") {
  const auto docs = fixture::random_documents(40, 50, 1);
  const auto split = split_corpus("x", docs);
  CHECK(split.train.doc_count() == 36);
  CHECK(split.dev.doc_count() == 2);
  CHECK(split.test.doc_count() == 2);
  CHECK(detokenize(split.dev.tokens) == docs[18] + docs[38]);
  CHECK(detokenize(split.test.tokens) == docs[19] + docs[39]);

  // Few documents: each is cut by bytes.
  const auto few = split_corpus("y", fixture::random_documents(2, 1000, 2));
  CHECK(few.train.size() == 2 * 901);
  CHECK(few.dev.size() == 2 * 51);
  CHECK(few.test.size() == 2 * 51);
}

TEST_CASE("synthetic corpus is deterministic and sized") {
  SyntheticCorpusOptions o;
  o.target_bytes = 200000;
  o.min_doc_bytes = 5000;
  o.max_doc_bytes = 15000;
  const auto a = synthetic_documents(o), b = synthetic_documents(o);
  CHECK(a == b);
  std::size_t total = 0;
  for (const auto& d : a) {
    total += d.size();
    CHECK(d.find('\f') == std::string::npos);
  }
  CHECK(total >= o.target_bytes);
  o.seed += 1;
  CHECK(synthetic_documents(o) != a);
}

TEST_CASE("sampler is a function of seed and step") {
  const auto stream = stream_from_documents("s", fixture::random_documents(5, 4000, 3));
  const auto a = batch_sampler(stream, 32, 4, 7, 11), b = batch_sampler(stream, 32, 4, 7, 11);
  CHECK(a.inputs == b.inputs);
  CHECK(a.targets == b.targets);
  CHECK(batch_sampler(stream, 32, 4, 7, 12).inputs != a.inputs);
  CHECK(batch_sampler(stream, 32, 4, 8, 11).inputs != a.inputs);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t t = 0; t + 1 < 32; ++t) CHECK(a.targets[r * 32 + t] == a.inputs[r * 32 + t + 1]);

  // Row r does not depend on how the batch is cut.
  BatchSampler s(stream, 32, 16 * 32 + 1);
  const auto tail = s.sample(2, 7, 11, 2);
  CHECK(std::equal(tail.inputs.begin(), tail.inputs.end(), a.inputs.begin() + 64));
}

TEST_CASE("sampler keeps windows inside long documents") {
  std::vector<std::string> docs = {std::string(100, 'a'), std::string(3000, 'b'), std::string(50, 'c')};
  const auto stream = stream_from_documents("s", docs);
  BatchSampler s(stream, 16, 16 * 16 + 1);
  CHECK_FALSE(s.fallback());
  CHECK(s.start_count() == 3001 - 16);
  for (std::uint64_t step = 0; step < 500; ++step) {
    const auto start = s.window_start(1, step, 0);
    CHECK(start >= 101);
    CHECK(start + 16 < 101 + 3001);
  }
  BatchSampler all_short(stream, 16, 5000);
  CHECK(all_short.fallback());
  CHECK(all_short.start_count() == stream.size() - 16);
  CHECK_THROWS_AS(BatchSampler(stream_from_documents("t", {"abc"}), 16, 0), DataError);
}

TEST_CASE("window starts cover the corpus uniformly") {
  const auto stream = stream_from_documents("s", fixture::random_documents(4, 5000, 4));
  BatchSampler s(stream, 64, 65);
  constexpr std::size_t kBins = 20, kDraws = 10000;
  std::vector<double> counts(kBins, 0.0);
  // Starts are enumerated document by document; map each back to its rank.
  std::vector<std::size_t> rank_base;
  for (std::size_t d = 0; d < stream.doc_count(); ++d) rank_base.push_back(d * (5001 - 64));
  for (std::size_t i = 0; i < kDraws; ++i) {
    const auto start = s.window_start(99, i / 16, i % 16);
    const auto doc = start / 5001;
    const auto rank = rank_base[doc] + start % 5001;
    counts[rank * kBins / s.start_count()] += 1;
  }
  double chi2 = 0;
  const double expect = static_cast<double>(kDraws) / kBins;
  for (auto c : counts) chi2 += (c - expect) * (c - expect) / expect;
  // 19 degrees of freedom; 43.8 is the 0.999 quantile.
  CHECK(chi2 < 43.8);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  fixture::TempDir dir("ckpt");
  auto cfg = fixture::tiny_model(pos::SchemeKind::exqpe);
  nn::Transformer<float> m(cfg, 3);
  auto tc = quick_train(3);
  const auto stream = stream_from_documents("s", fixture::random_documents(3, 2000, 5));
  Trainer<float> trainer(m, tc);
  trainer.run(stream);
  save_checkpoint(trainer.checkpoint(), dir / "a.ckpt");
  const auto loaded = load_checkpoint(dir / "a.ckpt");
  CHECK(loaded.step == 3);
  CHECK(loaded.adam_t == 3);
  REQUIRE(loaded.train.has_value());
  CHECK(loaded.train->schedule.total_steps == 3);
  auto copy = model_from_checkpoint<float>(loaded);
  CHECK(copy.checksum() == m.checksum());
  CHECK(snapshot(copy) == snapshot(m));
  num::Rng rng(6);
  const auto tokens = fixture::random_tokens(16, rng);
  num::NoGradScope<float> ng;
  const auto a = m.forward(tokens, 1, 16), b = copy.forward(tokens, 1, 16);
  CHECK(std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(float)) == 0);

  // Saving the loaded checkpoint reproduces the file byte for byte.
  save_checkpoint(loaded, dir / "b.ckpt");
  CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));
}

TEST_CASE("resuming from a checkpoint continues the same run") {
  fixture::TempDir dir("resume");
  auto cfg = fixture::tiny_model();
  cfg.dropout = 0.1;
  const auto stream = stream_from_documents("s", fixture::random_documents(3, 2000, 7));
  nn::Transformer<float> straight(cfg, 1);
  train::train(straight, quick_train(6), stream);

  nn::Transformer<float> first(cfg, 1);
  Trainer<float> t1(first, quick_train(6));
  const BatchSampler sampler(stream, cfg.seq_len, 4 * cfg.seq_len + 1);
  for (int i = 0; i < 3; ++i) t1.train_step(sampler);
  save_checkpoint(t1.checkpoint(), dir / "mid.ckpt");

  const auto ckpt = load_checkpoint(dir / "mid.ckpt");
  auto second = model_from_checkpoint<float>(ckpt);
  Trainer<float> t2(second, quick_train(6));
  t2.resume(ckpt);
  t2.run(stream);
  CHECK(t2.step() == 6);
  CHECK(second.checksum() == straight.checksum());
}

TEST_CASE("checkpoint errors") {
  fixture::TempDir dir("ckpt_err");
  nn::Transformer<float> m(fixture::tiny_model(), 1);
  save_checkpoint(capture_checkpoint<float>(m, nullptr, 0), dir / "ok.ckpt");
  const auto bytes = slurp(dir / "ok.ckpt");

  spit(dir / "short.ckpt", bytes.substr(0, bytes.size() - 10));
  CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt"), CheckpointCorruptError);
  spit(dir / "stub.ckpt", bytes.substr(0, 6));
  CHECK_THROWS_AS(load_checkpoint(dir / "stub.ckpt"), CheckpointCorruptError);
  auto magic = bytes;
  magic[0] = 'X';
  spit(dir / "magic.ckpt", magic);
  CHECK_THROWS_AS(load_checkpoint(dir / "magic.ckpt"), CheckpointCorruptError);
  auto version = bytes;
  version[4] = 9;
  spit(dir / "version.ckpt", version);
  CHECK_THROWS_AS(load_checkpoint(dir / "version.ckpt"), CheckpointVersionError);
  CHECK_THROWS_AS(load_checkpoint(dir / "none.ckpt"), CheckpointError);

  auto wide = fixture::tiny_model();
  wide.d_model = 64;
  wide.head_size = 32;
  nn::Transformer<float> other(wide, 1);
  try {
    restore_model(load_checkpoint(dir / "ok.ckpt"), other);
    FAIL("expected a shape error");
  } catch (const CheckpointShapeError& e) {
    CHECK(std::string(e.what()).find("tok_emb") != std::string::npos);
  }
}

TEST_CASE("zero steps leaves the initial weights") {
  fixture::TempDir dir("zero");
  auto cfg = fixture::tiny_model();
  nn::Transformer<float> init(cfg, 9), m(cfg, 9);
  const auto stream = stream_from_documents("s", fixture::random_documents(2, 2000, 8));
  TrainHooks<float> hooks;
  hooks.checkpoint_dir = dir.path();
  const auto r = train::train(m, quick_train(0), stream, hooks);
  CHECK(r.steps == 0);
  CHECK(r.metrics.empty());
  CHECK(model_from_checkpoint<float>(load_checkpoint(dir / "final.ckpt")).checksum() == init.checksum());
}

TEST_CASE("full runs are deterministic") {
  fixture::TempDir dir("det");
  auto cfg = fixture::tiny_model(pos::SchemeKind::rope);
  cfg.dropout = 0.1;
  const auto stream = stream_from_documents("s", fixture::random_documents(3, 3000, 9));
  auto tc = quick_train(8);
  tc.grad_accum_steps = 2;
  nn::Transformer<float> a(cfg, 5), b(cfg, 5);
  TrainHooks<float> ha, hb;
  ha.checkpoint_dir = dir / "a";
  hb.checkpoint_dir = dir / "b";
  const auto ra = train::train(a, tc, stream, ha), rb = train::train(b, tc, stream, hb);
  CHECK(slurp(dir / "a/final.ckpt") == slurp(dir / "b/final.ckpt"));
  for (std::size_t i = 0; i < ra.metrics.size(); ++i) CHECK(ra.metrics[i].train_loss == rb.metrics[i].train_loss);
  tc.seed = 2;
  nn::Transformer<float> c(cfg, 5);
  train::train(c, tc, stream);
  CHECK(c.checksum() != a.checksum());
}

TEST_CASE("gradient accumulation matches the full batch") {
  auto cfg = fixture::tiny_model();
  const auto stream = stream_from_documents("s", fixture::random_documents(3, 3000, 10));
  const BatchSampler sampler(stream, cfg.seq_len, 4 * cfg.seq_len + 1);
  auto tc = quick_train(1);
  tc.schedule.warmup_ratio = 0.0;
  nn::Transformer<double> full(cfg, 2), accum(cfg, 2);
  tc.batch_size = 8;
  tc.grad_accum_steps = 1;
  Trainer<double> t_full(full, tc);
  const double loss_full = t_full.train_step(sampler);
  tc.batch_size = 2;
  tc.grad_accum_steps = 4;
  Trainer<double> t_acc(accum, tc);
  const double loss_acc = t_acc.train_step(sampler);
  CHECK(std::abs(loss_full - loss_acc) <= 1e-10 * std::abs(loss_full));
  const auto a = snapshot(full), b = snapshot(accum);
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j)
      worst = std::max(worst, std::abs(a[i][j] - b[i][j]) / std::max(std::abs(a[i][j]), 1e-12));
  CHECK(worst <= 1e-10);
}

TEST_CASE("metrics file and checkpoint cadence") {
  fixture::TempDir dir("metrics");
  nn::Transformer<float> m(fixture::tiny_model(), 1);
  auto tc = quick_train(6);
  tc.checkpoint_every = 2;
  tc.eval_every = 3;
  TrainHooks<float> hooks;
  hooks.metrics_csv = dir / "metrics.csv";
  hooks.checkpoint_dir = dir / "ckpt";
  std::vector<std::uint64_t> evals;
  hooks.on_eval = [&](std::uint64_t step, nn::Transformer<float>&) { evals.push_back(step); };
  const auto r = train::train(m, tc, stream_from_documents("s", fixture::random_documents(2, 2000, 11)), hooks);
  CHECK(evals == std::vector<std::uint64_t>{3, 6});
  CHECK(std::filesystem::exists(dir / "ckpt/step_2.ckpt"));
  CHECK(std::filesystem::exists(dir / "ckpt/step_4.ckpt"));
  CHECK(std::filesystem::exists(dir / "ckpt/final.ckpt"));
  CHECK(r.checkpoints.size() == 3);
  std::ifstream in(dir / "metrics.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == kMetricsHeader);
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 6);
}

TEST_CASE("non-finite loss aborts with a snapshot") {
  auto cfg = fixture::tiny_model();
  nn::Transformer<float> m(cfg, 1);
  m.blocks()[0].wq.data()[0] = std::numeric_limits<float>::quiet_NaN();
  auto tc = quick_train(5);
  try {
    train::train(m, tc, stream_from_documents("s", fixture::random_documents(2, 2000, 12)));
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.snapshot().step == 1);
    CHECK_FALSE(e.snapshot().last_finite_loss.has_value());
    CHECK(e.snapshot().grad_norms.size() == m.parameters().size());
  }
}

TEST_CASE("a small model learns a repetitive corpus") {
  const std::string verse = "The quick brown fox jumps over the lazy dog while the cat sleeps by the warm fire.\n";
  std::string text;
  while (text.size() < 100000) text += verse;
  const auto stream = stream_from_documents("rep", {text});
  auto cfg = fixture::tiny_model();
  cfg.seq_len = 32;
  cfg.d_model = 64;
  cfg.head_size = 32;
  cfg.ffn_hidden = 128;
  std::get<pos::ExpeParams>(cfg.encoding.params) = {0.0, 1.0 / 64, 8, 1.0};
  nn::Transformer<float> m(cfg, 1);
  auto tc = quick_train(200);
  tc.batch_size = 8;
  tc.schedule.peak_lr = 3e-3;
  const auto r = train::train(m, tc, stream);
  CHECK(r.metrics.front().train_loss == doctest::Approx(std::log(257.0)).epsilon(0.02));
  double tail = 0;
  for (std::size_t i = r.metrics.size() - 10; i < r.metrics.size(); ++i) tail += r.metrics[i].train_loss;
  CHECK(tail / 10 < 2.0);
}

}  // TEST_SUITE
