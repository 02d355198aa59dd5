// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Usage: acceptance <work_dir> [criterion numbers...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "antcode/datagen.hpp"
#include "antcode/gradcheck.hpp"
#include "antcode/pipeline.hpp"
#include "lstm_oracle.hpp"

using namespace antcode;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path g_work;

// ------------------------------------------------------------------ 1

Outcome lstm_fidelity() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t e = 1 + rng.below(8), h = 1 + rng.below(8);
    LstmParams p = LstmParams::initialized(e, h, rng);
    // Nonzero biases so every term of the gate equations is exercised.
    p.for_each([&](const char*, Tensor& t) {
      if (t.rank() == 1)
        for (double& v : t.values()) v += rng.uniform(-0.5, 0.5);
    });
    std::vector<double> x(e), hp(h), cp(h);
    for (double& v : x) v = rng.uniform(-2, 2);
    for (double& v : hp) v = rng.uniform(-1, 1);
    for (double& v : cp) v = rng.uniform(-2, 2);
    const LstmStep s = lstm_step(Tensor({e}, x), {Tensor({h}, cp), Tensor({h}, hp)}, p);
    const oracle::LstmOut ref = oracle::lstm_step(x, hp, cp, p);
    for (std::size_t k = 0; k < h; ++k) {
      worst = std::max(worst, std::abs(s.state.hidden[k] - ref.hidden[k]));
      worst = std::max(worst, std::abs(s.state.cell[k] - ref.cell[k]));
    }
  }
  const double secs = since(t0);
  return {worst <= 1e-12 && secs < 5.0,
          "100 instances, max abs diff " + fmt("%.3g", worst) + ", " + fmt("%.3f", secs) + " s"};
}

// ------------------------------------------------------------------ 2

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  const GradcheckReport r = run_gradcheck();
  const double secs = since(t0);
  std::cout << r.to_text();
  double worst = 0.0;
  std::size_t kinks = 0;
  for (const GradcheckEntry& e : r.entries) {
    worst = std::max(worst, e.worst);
    kinks += e.kinks;
  }
  return {r.passed() && secs < 120.0,
          std::to_string(r.entries.size()) + " tensors, worst rel err " + fmt("%.3g", worst) +
              ", kinks skipped " + std::to_string(kinks) + ", " + fmt("%.1f", secs) + " s"};
}

// ------------------------------------------------------------------ 3

Outcome sliding_pairs() {
  // One line, so no <NL> token between the statements.
  const std::string code = "use template Antenna define material FR4 4.3000";
  const std::vector<std::string> tokens = tokenize(code);
  const std::vector<std::vector<std::string>> corpus = {tokens};
  const Vocabulary v = Vocabulary::build(corpus);
  TokenSeq ids;
  for (const std::string& t : tokens) ids.push_back(v.index_of(t));
  const std::vector<TrainingPair> pairs = make_pairs(ids);

  const std::vector<std::pair<std::vector<std::string>, std::string>> expected = {
      {{"use"}, "template"}, {{"use", "template"}, "Antenna"}, {{"use", "template", "Antenna"}, "define"}};
  bool ok = pairs.size() == ids.size() - 1;
  std::ostringstream shown;
  for (std::size_t k = 0; ok && k < expected.size(); ++k) {
    std::vector<std::string> prefix;
    for (int id : pairs[k].prefix) prefix.push_back(v.token(id));
    ok = prefix == expected[k].first && v.token(pairs[k].target) == expected[k].second;
    for (const std::string& t : prefix) shown << t << ' ';
    shown << "-> " << v.token(pairs[k].target) << (k + 1 < expected.size() ? "; " : "");
  }
  return {ok, shown.str()};
}

// ------------------------------------------------------------------ 4, 7, 10

struct OverfitRun {
  bool done = false;
  std::string error;
  fs::path data, out;
  double min_loss = 1e300;
  std::size_t reached_epoch = 0;  // first epoch with train loss <= 0.01
  std::size_t vocab = 0, longest = 0;
  double seconds = 0;
};

OverfitRun& overfit() {
  static OverfitRun run;
  if (run.done) return run;
  run.done = true;
  run.data = g_work / "overfit_data";
  run.out = g_work / "overfit_run";
  fs::remove_all(run.data);
  fs::remove_all(run.out);
  try {
    DatasetOptions d;
    d.n = 10;
    d.seed = 3;
    d.image_size = 64;
    d.fractions = {1.0, 0.0, 0.0};
    build_dataset(d, run.data.string());

    TrainConfig c;
    c.epochs = 300;
    c.batch_size = 1;
    c.lr = 1e-3;
    c.seed = 1;
    c.data = run.data.string();
    c.out = run.out.string();
    const auto t0 = Clock::now();
    train(c, {}, [&](const EpochMetrics& m) {
      if (m.train_loss < run.min_loss) run.min_loss = m.train_loss;
      if (run.reached_epoch == 0 && m.train_loss <= 0.01) run.reached_epoch = m.epoch;
      if (m.epoch % 25 == 0)
        std::cout << "  overfit epoch " << m.epoch << " train_loss " << m.train_loss << std::endl;
    });
    run.seconds = since(t0);
    const Dataset ds = Dataset::load(run.data.string());
    run.vocab = ds.vocab.size();
    for (const Sample& s : ds.samples) run.longest = std::max(run.longest, s.tokens.size());
  } catch (const std::exception& e) {
    run.error = e.what();
  }
  return run;
}

Outcome overfit_exact() {
  OverfitRun& run = overfit();
  if (!run.error.empty()) return {false, run.error};
  const Dataset ds = Dataset::load(run.data.string());
  auto exact_count = [&](const char* file) {
    const Checkpoint ck = Checkpoint::load((run.out / file).string());
    std::size_t exact = 0;
    for (const Sample& s : ds.samples) exact += generate(s.image, ck.params, ck.config).tokens == s.tokens;
    return exact;
  };
  // best.ckpt is the selected model (lowest train loss); last.ckpt is reported alongside.
  const std::size_t exact = exact_count("best.ckpt"), exact_last = exact_count("last.ckpt");
  const bool ok = run.reached_epoch > 0 && exact == ds.samples.size() && run.vocab <= 200 &&
                  run.longest <= 120 && run.seconds < 900.0;
  return {ok, "loss <= 0.01 first at epoch " + std::to_string(run.reached_epoch) + " (min " +
                  fmt("%.4g", run.min_loss) + "), exact " + std::to_string(exact) + "/" +
                  std::to_string(ds.samples.size()) + " from best.ckpt (" +
                  std::to_string(exact_last) + " from last.ckpt), V=" + std::to_string(run.vocab) +
                  ", longest " + std::to_string(run.longest) + " tokens, " +
                  fmt("%.0f", run.seconds) + " s"};
}

Outcome overfit_geometry() {
  OverfitRun& run = overfit();
  if (!run.error.empty()) return {false, run.error};
  const Checkpoint ck = Checkpoint::load((run.out / "best.ckpt").string());
  const Dataset ds = Dataset::load(run.data.string());
  std::size_t ok = 0;
  double min_iou = 1.0;
  for (const Sample& s : ds.samples) {
    const InferenceReport r = infer(ck, s.image, s.code);
    const double iou = r.iou.value_or(0.0);
    min_iou = std::min(min_iou, iou);
    ok += iou == 1.0 && r.exact.value_or(false);
  }
  return {ok == ds.samples.size(), std::to_string(ok) + "/" + std::to_string(ds.samples.size()) +
                                       " exact with iou 1.0, min iou " + fmt("%.4f", min_iou)};
}

Outcome inference_time() {
  OverfitRun& run = overfit();
  if (!run.error.empty()) return {false, run.error};
  const Checkpoint ck = Checkpoint::load((run.out / "best.ckpt").string());
  const Dataset ds = Dataset::load(run.data.string());
  double worst = 0;
  for (const Sample& s : ds.samples) {
    const auto t0 = Clock::now();
    const Tensor img = read_pgm((run.data / "images" / (s.id + ".pgm")).string());
    const InferenceReport r = infer(ck, img, s.code);
    (void)r;
    worst = std::max(worst, since(t0));
  }
  return {worst < 10.0, "slowest single-image inference " + fmt("%.3f", worst) + " s (mini encoder)"};
}

// ------------------------------------------------------------------ 5

Outcome generalization() {
  const fs::path data = g_work / "general_data", out = g_work / "general_run";
  fs::remove_all(data);
  fs::remove_all(out);
  const auto t0 = Clock::now();
  DatasetOptions d;
  d.n = 200;
  d.seed = 11;
  build_dataset(d, data.string());
  TrainConfig c;
  c.epochs = 50;
  c.batch_size = 8;
  c.lr = 1e-3;
  c.seed = 1;
  c.data = data.string();
  c.out = out.string();
  train(c, {}, [](const EpochMetrics& m) {
    if (m.epoch % 5 == 0)
      std::cout << "  general epoch " << m.epoch << " train_loss " << m.train_loss << " val_loss "
                << m.val.loss << " val_acc " << m.val.token_accuracy << std::endl;
  });
  const Checkpoint ck = Checkpoint::load((out / "best.ckpt").string());
  const Dataset ds = Dataset::load(data.string());
  const std::vector<const Sample*> test = ds.split(Split::test);
  const std::size_t n_train = ds.split(Split::train).size(), n_val = ds.split(Split::val).size();
  const EvalMetrics m = evaluate_samples(ck.params, ck.config, test, ds.vocab, true);
  const double baseline = 1.0 / static_cast<double>(ds.vocab.size());
  const double secs = since(t0);
  const bool ok = n_train == 140 && n_val == 30 && test.size() == 30 &&
                  m.token_accuracy >= 5.0 * baseline && m.parse_rate.value_or(0.0) >= 0.5 &&
                  secs < 7200.0;
  return {ok, "split " + std::to_string(n_train) + "/" + std::to_string(n_val) + "/" +
                  std::to_string(test.size()) + ", test token acc " + fmt("%.4f", m.token_accuracy) +
                  " vs 5/V " + fmt("%.4f", 5.0 * baseline) + ", parse rate " +
                  fmt("%.3f", m.parse_rate.value_or(0.0)) + ", mean iou " +
                  fmt("%.3f", m.mean_iou.value_or(0.0)) + ", exact " +
                  fmt("%.3f", m.exact_match.value_or(0.0)) + ", " + fmt("%.0f", secs) + " s"};
}

// ------------------------------------------------------------------ 6

Outcome geometry_round_trip() {
  const auto t0 = Clock::now();
  Rng rng(99);
  std::size_t pass = 0;
  std::string first_failure;
  for (std::size_t i = 0; i < 1000; ++i) {
    const AntennaSpec spec = sample_spec(all_families()[i % all_families().size()], rng);
    const Scene direct = to_scene(spec);
    bool ok = false;
    try {
      const Scene parsed = evaluate(parse(emit_code(spec)));
      ok = parsed.solids.size() == direct.solids.size();
      for (std::size_t k = 0; ok && k < direct.solids.size(); ++k)
        ok = parsed.solids[k].material == direct.solids[k].material &&
             same_geometry(parsed.solids[k], direct.solids[k], 1e-6);
    } catch (const std::exception& e) {
      if (first_failure.empty()) first_failure = e.what();
    }
    pass += ok;
  }
  const double secs = since(t0);
  return {pass == 1000 && secs < 60.0, std::to_string(pass) + "/1000 exact, " + fmt("%.2f", secs) +
                                           " s" + (first_failure.empty() ? "" : ", " + first_failure)};
}

// ------------------------------------------------------------------ 8

Outcome iou_oracle() {
  auto scene = [](double x1, double x2) {
    return evaluate(parse("define material copper 1\nbrick b copper " + format_number(x1) + " " +
                          format_number(x2) + " 0 1 0 1"));
  };
  const Scene unit = scene(0, 1), shifted = scene(0.5, 1.5), far = scene(3, 4);
  const double third = compare(unit, shifted, 128).iou;
  const double same = compare(unit, unit, 128).iou;
  const double disjoint = compare(unit, far, 128).iou;
  const bool ok = std::abs(third - 1.0 / 3.0) <= 2.0 / 128 && same == 1.0 && disjoint == 0.0;
  return {ok, "shifted " + fmt("%.6f", third) + ", identical " + fmt("%.1f", same) + ", disjoint " +
                  fmt("%.1f", disjoint)};
}

// ------------------------------------------------------------------ 9

Outcome determinism() {
  const fs::path a = g_work / "det_a", b = g_work / "det_b";
  for (const auto& p : {a, b}) fs::remove_all(p);
  DatasetOptions d;
  d.n = 12;
  d.seed = 21;
  build_dataset(d, (a / "data").string());
  build_dataset(d, (b / "data").string());
  const bool manifest = slurp(a / "data" / "manifest.tsv") == slurp(b / "data" / "manifest.tsv") &&
                        slurp(a / "data" / "vocab.txt") == slurp(b / "data" / "vocab.txt");
  bool images = true;
  for (const auto& entry : fs::directory_iterator(a / "data" / "images"))
    images = images && slurp(entry.path()) == slurp(b / "data" / "images" / entry.path().filename());

  auto run = [&](const fs::path& root) {
    TrainConfig c;
    c.epochs = 2;
    c.batch_size = 4;
    c.width = 64;
    c.seed = 5;
    c.threads = 1;
    c.data = (root / "data").string();
    c.out = (root / "run").string();
    train(c);
  };
  run(a);
  run(b);
  const std::string ck = slurp(a / "run" / "last.ckpt");
  const bool ckpt = !ck.empty() && ck == slurp(b / "run" / "last.ckpt");
  Checkpoint::load((a / "run" / "last.ckpt").string()).save((a / "run" / "resaved.ckpt").string());
  const bool round = slurp(a / "run" / "resaved.ckpt") == ck;
  return {manifest && images && ckpt && round,
          std::string("manifest ") + (manifest ? "identical" : "differs") + ", images " +
              (images ? "identical" : "differ") + ", checkpoints " + (ckpt ? "identical" : "differ") +
              ", save/load " + (round ? "byte-identical" : "differs") + " (" +
              std::to_string(ck.size()) + " bytes)"};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <work_dir> [criteria...]\n";
    return 2;
  }
  g_work = argv[1];
  fs::create_directories(g_work);
  std::set<int> only;
  for (int i = 2; i < argc; ++i) only.insert(std::stoi(argv[i]));

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"lstm step matches scalar transcription", lstm_fidelity},
      {"finite-difference gradient suite", gradient_suite},
      {"sliding-window pairs for use template Antenna define", sliding_pairs},
      {"overfit 10 samples: loss <= 0.01 and exact decoding", overfit_exact},
      {"generalization smoke on 200 samples", generalization},
      {"geometry round trip on 1000 specs", geometry_round_trip},
      {"overfit generations match ground-truth geometry", overfit_geometry},
      {"voxel iou oracle", iou_oracle},
      {"determinism and checkpoint persistence", determinism},
      {"single-image inference under 10 s", inference_time},
  };
  std::vector<std::string> lines;
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(n)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::ostringstream line;
    line << (o.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << criteria[i].first << " | "
         << o.detail;
    std::cout << line.str() << std::endl;
    lines.push_back(line.str());
  }
  std::cout << "\nsummary\n";
  std::ofstream summary(g_work / "summary.txt");
  for (const std::string& l : lines) {
    std::cout << l << '\n';
    summary << l << '\n';
  }
  return failed == 0 ? 0 : 1;
}
