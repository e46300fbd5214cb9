// Command-line front end: train, eval, sample, inspect, synth.
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "adrbm/data_io.hpp"
#include "adrbm/errors.hpp"
#include "adrbm/session.hpp"

namespace fs = std::filesystem;
using namespace adrbm;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kDataError = 2, kNumericFailure = 3 };

std::vector<Matrix> frames_of(const fs::path& path) {
  std::vector<Matrix> out;
  for (auto& s : read_jsonl(path)) {
    out.push_back(std::move(s.frames));
  }
  return out;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive structure-growing RBM / DBN / RNN-RBM / RNN-DBN toolkit"};
  app.require_subcommand(1);

  fs::path config_path;
  fs::path checkpoint_path;
  fs::path dataset_path;
  fs::path out_path;
  fs::path resume_path;
  std::optional<std::uint64_t> seed;
  int stop_after = -1;
  Index length = 0;

  auto* train = app.add_subcommand("train", "train a model described by a config file");
  train->add_option("--config", config_path, "config file (key = value)")->required();
  train->add_option("--out", out_path, "run directory (overrides out.dir)");
  train->add_option("--seed", seed, "seed (overrides train.seed)");
  train->add_option("--resume", resume_path, "continue from this checkpoint");
  train->add_option("--stop-after", stop_after, "stop after this many epochs")
      ->check(CLI::NonNegativeNumber);

  auto* eval = app.add_subcommand("eval", "prediction metrics of a checkpoint on a dataset");
  eval->add_option("--checkpoint", checkpoint_path)->required();
  eval->add_option("--dataset", dataset_path)->required();

  auto* sample = app.add_subcommand("sample", "sample a sequence from a recurrent checkpoint");
  sample->add_option("--checkpoint", checkpoint_path)->required();
  sample->add_option("--length", length, "frames to generate")->required()->check(
      CLI::NonNegativeNumber);
  sample->add_option("--seed", seed);
  sample->add_option("--out", out_path, "output JSONL file")->required();

  auto* inspect = app.add_subcommand("inspect", "print checkpoint structure");
  inspect->add_option("--checkpoint", checkpoint_path)->required();

  SynthCycleConfig synth_cfg;
  auto* synth = app.add_subcommand("synth", "write a synthetic cycle dataset");
  synth->add_option("--out", out_path, "directory for train.jsonl and test.jsonl")->required();
  synth->add_option("--seed", seed);
  synth->add_option("--dim", synth_cfg.dim);
  synth->add_option("--patterns", synth_cfg.n_patterns);
  synth->add_option("--length", synth_cfg.length);
  synth->add_option("--sequences", synth_cfg.n_sequences);
  synth->add_option("--flip", synth_cfg.noise_flip_prob);
  synth->add_option("--parity-bits", synth_cfg.parity_bits);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (train->parsed()) {
      TrainRequest req;
      req.config = load_run_config(config_path);
      if (seed) {
        req.config.seed = *seed;
      }
      if (!out_path.empty()) {
        req.config.out_dir = out_path;
      }
      req.resume = resume_path;
      req.stop_after = stop_after;
      const TrainReport report = run_train(req);
      std::cout << report.summary;
    } else if (eval->parsed()) {
      const Checkpoint ckpt = load_checkpoint(checkpoint_path);
      const auto seqs = frames_of(dataset_path);
      const PredictionMetrics m = evaluate_checkpoint(ckpt, seqs);
      std::cout << fmt::format("error = {:.17g}\ncorrect_ratio = {:.17g}\nframes = {}\n", m.error,
                               m.correct_ratio, m.frames);
    } else if (sample->parsed()) {
      const Checkpoint ckpt = load_checkpoint(checkpoint_path);
      const Matrix frames = sample_sequence(ckpt, length, seed.value_or(ckpt.seed));
      if (frames.rows() == 0) {
        std::ofstream(out_path, std::ios::binary | std::ios::trunc);
      } else {
        const std::vector<Sequence> seqs{Sequence{"sample", frames}};
        write_jsonl(out_path, seqs);
      }
    } else if (inspect->parsed()) {
      std::cout << describe_checkpoint(load_checkpoint(checkpoint_path));
    } else if (synth->parsed()) {
      RngStream rng(seed.value_or(1));
      const SequenceDataset ds = synth_cycle(synth_cfg, rng);
      fs::create_directories(out_path);
      write_jsonl(out_path / "train.jsonl", ds.train);
      write_jsonl(out_path / "test.jsonl", ds.test);
    }
  } catch (const ConfigError& e) {
    std::cerr << "adrbm: config error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "adrbm: numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const std::exception& e) {
    std::cerr << "adrbm: " << e.what() << '\n';
    return kDataError;
  }
  return kOk;
}
