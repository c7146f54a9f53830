// Copyright 2026 The Derev Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// derev: command-line entry point.
//
//   derev synth-corpus   --config cfg.jsonc
//   derev simulate-rirs  --config cfg.jsonc
//   derev build-dataset  --config cfg.jsonc
//   derev train          --config cfg.jsonc --head ifilt [--resume]
//   derev dereverb       --checkpoint best.ckpt --input y.wav --output out.wav
//   derev evaluate       --config cfg.jsonc
//   derev report         --config cfg.jsonc
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
// divergence, 1 anything else.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "derev/config.hpp"
#include "derev/error.hpp"
#include "derev/pipeline.hpp"

namespace {

namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kData = 3, kNumeric = 4 };

struct CommonOptions {
  std::string config;
  std::string profile;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config, "Project config (JSON, comments allowed)");
  cmd->add_option("--profile", opts.profile, "Default values: desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--seed", opts.seed, "Overrides the config seed");
}

derev::ProjectConfig resolve(const CommonOptions& opts) {
  derev::ProjectConfig config;
  if (!opts.config.empty()) {
    config = derev::load_config(opts.config, opts.profile);
  } else {
    config = derev::profile_by_name(opts.profile.empty() ? "desk" : opts.profile);
    derev::apply_env_overrides(config);
  }
  if (opts.seed) config.seed = *opts.seed;
  derev::validate(config);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speech dereverberation by CTF inverse filtering"};
  app.require_subcommand(1);
  app.footer(
      "Environment overrides: DEREV_PROFILE, DEREV_CORPUS_DIR, DEREV_WORK_DIR, DEREV_SEED, DEREV_EPOCHS,\n"
      "DEREV_BATCH_SIZE, DEREV_LR, DEREV_CHECKPOINT_EVERY.");

  CommonOptions common;
  std::string head = "ifilt";
  bool resume = false;
  std::string checkpoint, input, output;
  bool identity = false;
  int taps = 9;
  bool print_config = false;

  auto* synth = app.add_subcommand("synth-corpus", "Write a seeded synthetic speech corpus");
  auto* rirs = app.add_subcommand("simulate-rirs", "Simulate the configured RIR grid");
  auto* build = app.add_subcommand("build-dataset", "Convolve the corpus with the RIRs and write the manifest");
  auto* train = app.add_subcommand("train", "Train one head on the dataset");
  auto* evaluate = app.add_subcommand("evaluate", "Score every method on the test split");
  auto* report = app.add_subcommand("report", "Rebuild the tables from stored per-utterance metrics");
  auto* show = app.add_subcommand("config", "Print the resolved configuration");
  for (auto* cmd : {synth, rirs, build, train, evaluate, report, show}) add_common(cmd, common);
  train->add_option("--head", head, "ifilt, dsm or dirm")->check(CLI::IsMember({"ifilt", "dsm", "dirm"}));
  train->add_flag("--resume", resume, "Continue from last.ckpt");
  show->add_flag("--sample", print_config, "Print the commented sample config instead");

  auto* dereverb = app.add_subcommand("dereverb", "Enhance one WAV file");
  dereverb->add_option("--checkpoint", checkpoint, "Trained model");
  dereverb->add_option("--input", input, "Reverberant 16 kHz mono WAV")->required();
  dereverb->add_option("--output", output, "Enhanced WAV")->required();
  dereverb->add_flag("--identity", identity, "Force W = delta(p) instead of the network");
  dereverb->add_option("--taps", taps, "Filter taps for --identity without a checkpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*dereverb) {
      derev::cmd_dereverb(checkpoint, input, output, identity, taps);
      std::cout << "wrote " << output << '\n';
      return kOk;
    }
    if (*show && print_config) {
      std::cout << derev::sample_config_text();
      return kOk;
    }
    const derev::ProjectConfig config = resolve(common);
    if (*show) {
      std::cout << derev::to_json(config);
    } else if (*synth) {
      derev::cmd_synth_corpus(config, std::cout);
    } else if (*rirs) {
      derev::cmd_simulate_rirs(config, std::cout);
    } else if (*build) {
      derev::cmd_build_dataset(config, std::cout);
    } else if (*train) {
      const auto r = derev::cmd_train(config, derev::parse_head(head), resume, std::cout);
      std::cout << "best epoch " << r.best_epoch << ", checkpoint " << r.best_checkpoint.string() << '\n';
    } else if (*evaluate) {
      derev::cmd_evaluate(config, std::cout);
    } else if (*report) {
      derev::cmd_report(config, std::cout);
    }
    return kOk;
  } catch (const derev::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const derev::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const derev::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
}
