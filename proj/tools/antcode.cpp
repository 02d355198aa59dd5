// Command-line front end: dataset generation, training, inference,
// evaluation, gradient checks and tokenization.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "antcode/codec.hpp"
#include "antcode/datagen.hpp"
#include "antcode/gradcheck.hpp"
#include "antcode/pipeline.hpp"
#include "json.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::ordered_json metrics_json(const antcode::EvalMetrics& m) {
  nlohmann::ordered_json j;
  j["samples"] = m.samples;
  j["pairs"] = m.pairs;
  j["loss"] = m.loss;
  j["token_accuracy"] = m.token_accuracy;
  if (m.exact_match) {
    j["exact_match"] = *m.exact_match;
    j["parse_rate"] = *m.parse_rate;
    j["mean_iou"] = *m.mean_iou;
    j["geom_exact"] = *m.geom_exact;
  }
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace antcode;
  CLI::App app{"Antenna image to modeling code: data, training and inference"};
  app.require_subcommand(1);

  // ---- datagen
  auto* datagen = app.add_subcommand("datagen", "Generate a synthetic antenna dataset");
  DatasetOptions dopts;
  std::string families = "all", data_out;
  datagen->add_option("--n", dopts.n, "Number of samples")->check(CLI::PositiveNumber);
  datagen->add_option("--families", families, "Comma-separated families or 'all'");
  datagen->add_option("--seed", dopts.seed, "Generator seed");
  datagen->add_option("--size", dopts.image_size, "Image side in pixels")->check(CLI::PositiveNumber);
  datagen->add_option("--out", data_out, "Output directory")->required();
  std::vector<double> fractions;
  datagen->add_option("--fractions", fractions, "Train, val and test fractions, e.g. 0.7 0.15 0.15")
      ->expected(3);

  // ---- train
  auto* train_cmd = app.add_subcommand("train", "Train the caption model");
  std::string config_path, train_data, train_out, resume;
  bool no_early_best = false;
  train_cmd->add_option("--config", config_path, "key = value configuration file");
  train_cmd->add_option("--data", train_data, "Dataset directory (overrides the config)");
  train_cmd->add_option("--out", train_out, "Output directory (overrides the config)");
  train_cmd->add_option("--resume", resume, "Checkpoint to continue from");
  train_cmd->add_flag("--no-early-best", no_early_best, "Keep only the last checkpoint");

  // ---- infer
  auto* infer_cmd = app.add_subcommand("infer", "Generate modeling code for one image");
  std::string ckpt_path, image_path, reference_path;
  infer_cmd->add_option("--ckpt", ckpt_path, "Checkpoint")->required();
  infer_cmd->add_option("--image", image_path, "PGM image")->required();
  infer_cmd->add_option("--reference", reference_path, "Ground-truth code for IoU comparison");

  // ---- eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  std::string eval_ckpt, eval_data, split = "test";
  eval_cmd->add_option("--ckpt", eval_ckpt, "Checkpoint")->required();
  eval_cmd->add_option("--data", eval_data, "Dataset directory")->required();
  eval_cmd->add_option("--split", split, "train, val or test");

  // ---- gradcheck
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  std::string scale = "mini";
  grad_cmd->add_option("--scale", scale, "mini or full")->check(CLI::IsMember({"mini", "full"}));

  // ---- tokenize
  auto* tok_cmd = app.add_subcommand("tokenize", "Print the tokens of a code file");
  std::string tok_in;
  tok_cmd->add_option("--in", tok_in, "Code file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*datagen) {
      dopts.families = parse_families(families);
      if (!fractions.empty()) dopts.fractions = {fractions[0], fractions[1], fractions[2]};
      const Manifest m = build_dataset(dopts, data_out);
      std::size_t counts[3] = {0, 0, 0};
      for (const ManifestEntry& e : m.entries) ++counts[static_cast<int>(e.split)];
      std::printf("wrote %zu samples to %s (train %zu, val %zu, test %zu)\n", m.entries.size(),
                  data_out.c_str(), counts[0], counts[1], counts[2]);
    } else if (*train_cmd) {
      TrainConfig cfg = config_path.empty() ? TrainConfig{} : TrainConfig::load(config_path);
      if (!train_data.empty()) cfg.data = train_data;
      if (!train_out.empty()) cfg.out = train_out;
      if (no_early_best) cfg.early_best = false;
      const TrainResult r =
          train(cfg, resume.empty() ? std::nullopt : std::optional<std::string>(resume),
                [](const EpochMetrics& m) { std::printf("%s\n", m.to_json().c_str()); std::fflush(stdout); });
      std::printf("finished at epoch %zu; checkpoints in %s\n", r.last.state.epoch, cfg.out.c_str());
    } else if (*infer_cmd) {
      const Checkpoint ck = Checkpoint::load(ckpt_path);
      std::optional<std::string> reference;
      if (!reference_path.empty()) reference = slurp(reference_path);
      const InferenceReport r = infer(ck, read_pgm(image_path), reference);
      std::printf("%s", r.code.c_str());
      if (!r.code.empty() && r.code.back() != '\n') std::printf("\n");
      std::printf("%s\n", r.to_json().c_str());
    } else if (*eval_cmd) {
      const Checkpoint ck = Checkpoint::load(eval_ckpt);
      const Dataset ds = Dataset::load(eval_data, ck.config.max_len);
      if (!(ds.vocab == ck.vocab)) throw std::runtime_error("dataset vocabulary does not match the checkpoint");
      const auto samples = ds.split(parse_split(split));
      if (samples.empty()) throw std::runtime_error("split '" + split + "' is empty");
      std::printf("%s\n", metrics_json(evaluate_samples(ck.params, ck.config, samples, ds.vocab, true))
                              .dump()
                              .c_str());
    } else if (*grad_cmd) {
      GradcheckOptions o;
      o.scale = scale;
      const GradcheckReport r = run_gradcheck(o);
      std::printf("%s", r.to_text().c_str());
      return r.passed() ? 0 : 1;
    } else if (*tok_cmd) {
      for (const std::string& t : tokenize(slurp(tok_in))) std::printf("%s\n", t.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
