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

#include "derev/pipeline.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "derev/checkpoint.hpp"
#include "derev/corpus.hpp"
#include "derev/digest.hpp"
#include "derev/wav.hpp"
#include "json.hpp"

namespace derev {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  Fnv1a h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    h.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

void require_corpus(const ProjectConfig& config) {
  if (!fs::is_directory(config.corpus_dir)) {
    throw DataError("corpus directory " + config.corpus_dir.string() +
                    " does not exist (point corpus_dir at <dir>/{train,validation,test}/*.wav or run "
                    "`derev synth-corpus`)");
  }
}

TrainConfig train_config(const ProjectConfig& config) {
  TrainConfig t = config.train;
  t.seed = config.seed;
  return t;
}

Model load_best(const WorkLayout& work, Head head) {
  const fs::path path = work.models(head) / "best.ckpt";
  if (!fs::exists(path)) {
    throw DataError("no trained " + to_string(head) + " model at " + path.string() + " (run `derev train --head " +
                    to_string(head) + "`)");
  }
  Model model = load_checkpoint(path).model;
  model.params.mode = nn::Mode::kEval;
  return model;
}

void write_reports(const WorkLayout& work, const std::vector<MetricRecord>& records, std::string* table_text) {
  const auto rows = aggregate(records);
  std::ostringstream csv, table;
  write_metrics_csv(csv, rows);
  write_metrics_table(table, rows);
  write_text(work.eval() / "metrics.csv", csv.str());
  write_text(work.eval() / "tables.txt", table.str());
  if (table_text) *table_text = table.str();
}

}  // namespace

WorkLock::WorkLock(const fs::path& work_dir) : path_(work_dir / ".lock") {
  fs::create_directories(work_dir);
  std::FILE* f = std::fopen(path_.c_str(), "wx");
  if (!f) {
    if (errno == EEXIST) {
      throw UsageError("work directory " + work_dir.string() + " is locked by another command (remove " +
                       path_.string() + " if no command is running)");
    }
    throw DataError("cannot create lock " + path_.string() + ": " + std::strerror(errno));
  }
  std::fclose(f);
}

WorkLock::~WorkLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

void update_index(const fs::path& work_dir, const std::string& stage, const std::vector<fs::path>& files) {
  const fs::path path = work_dir / "index.json";
  Json index = Json::object();
  if (fs::exists(path)) {
    std::ifstream in(path);
    try {
      index = Json::parse(in);
    } catch (const nlohmann::json::exception&) {
      index = Json::object();
    }
  }
  Json entries = Json::object();
  for (const auto& f : files) entries[f.generic_string()] = file_digest(work_dir / f);
  index[stage] = {{"files", entries}};
  write_text(path, index.dump(1) + "\n");
}

int cmd_synth_corpus(const ProjectConfig& config, std::ostream& log) {
  SpeechSynthConfig synth;
  synth.duration = config.corpus.synthetic_duration;
  const int n = write_synthetic_corpus(config.corpus_dir, config.corpus.counts, config.seed, synth);
  log << "wrote " << n << " synthetic utterances under " << config.corpus_dir.string() << '\n';
  return n;
}

int cmd_simulate_rirs(const ProjectConfig& config, std::ostream& log) {
  const WorkLayout work{config.work_dir};
  WorkLock lock(work.root);
  fs::create_directories(work.rirs());
  std::vector<fs::path> files;
  for (const auto& record : plan_rirs(config)) {
    const RirFilter h = render_rir(record, config.train.early_len);
    const fs::path wav = work.rirs() / (record.id + ".wav");
    write_wav(wav, {h.taps, h.sample_rate});
    const Json meta = {{"id", record.id},
                       {"room", record.room},
                       {"dimensions", {record.spec.dimensions[0], record.spec.dimensions[1], record.spec.dimensions[2]}},
                       {"rt60", record.rt60},
                       {"split", record.split},
                       {"source", {record.spec.source[0], record.spec.source[1], record.spec.source[2]}},
                       {"mic", {record.spec.mic[0], record.spec.mic[1], record.spec.mic[2]}},
                       {"seed", record.spec.seed},
                       {"early_len", h.early_len},
                       {"length", h.size()},
                       {"sample_rate", h.sample_rate},
                       {"measured_rt60", estimate_rt60(h)}};
    write_text(work.rirs() / (record.id + ".json"), meta.dump(1) + "\n");
    files.push_back(fs::relative(wav, work.root));
    files.push_back(fs::relative(work.rirs() / (record.id + ".json"), work.root));
    log << "rir " << record.id << " (" << h.size() << " taps)\n";
  }
  update_index(work.root, "simulate-rirs", files);
  const int count = static_cast<int>(files.size() / 2);
  log << "wrote " << count << " RIRs to " << work.rirs().string() << '\n';
  return count;
}

DatasetManifest cmd_build_dataset(const ProjectConfig& config, std::ostream& log) {
  require_corpus(config);
  const WorkLayout work{config.work_dir};
  WorkLock lock(work.root);
  const auto rirs = plan_rirs(config);
  const auto scenes = plan_scenes(config, rirs);
  DatasetManifest manifest = plan_dataset(config, rirs, scenes, list_corpus_splits(config));
  build_dataset(manifest, work.rirs(), work.dataset());
  save_manifest(work.manifest(), manifest);
  update_index(work.root, "build-dataset", {fs::relative(work.manifest(), work.root)});
  log << "built " << manifest.entries.size() << " examples (" << manifest.split("train").size() << " train, "
      << manifest.split("validation").size() << " validation, " << manifest.split("test").size()
      << " test), digest " << manifest_digest(manifest) << '\n';
  return manifest;
}

std::vector<TrainingExample> load_examples(const ProjectConfig& config, const DatasetManifest& manifest,
                                           const std::string& split, Head head) {
  const WorkLayout work{config.work_dir};
  std::vector<TrainingExample> out;
  for (const DatasetEntry* e : manifest.split(split)) {
    const auto [y, ye] = load_entry(work.dataset(), *e);
    out.push_back(make_example(e->id, e->split, y, ye, head, manifest.stft));
  }
  return out;
}

TrainReport cmd_train(const ProjectConfig& config, Head head, bool resume, std::ostream& log) {
  const WorkLayout work{config.work_dir};
  WorkLock lock(work.root);
  const DatasetManifest manifest = load_manifest(work.manifest());
  if (manifest.early_len != config.train.early_len || !(manifest.stft == config.stft)) {
    throw ConfigError("dataset was built with different early_len or STFT settings; rerun build-dataset");
  }
  const auto train_set = load_examples(config, manifest, "train", head);
  const auto val_set = load_examples(config, manifest, "validation", head);
  if (train_set.empty()) throw DataError("the dataset has no training examples");
  TrainOptions options;
  options.out_dir = work.models(head);
  options.resume = resume;
  options.progress = &log;
  options.stft = config.stft;
  const TrainReport report = train(train_config(config), head, train_set, val_set, options);
  update_index(work.root, "train-" + to_string(head),
               {fs::relative(report.best_checkpoint, work.root), fs::relative(report.last_checkpoint, work.root),
                fs::relative(options.out_dir / "train_log.csv", work.root)});
  return report;
}

void cmd_dereverb(const fs::path& checkpoint, const fs::path& input, const fs::path& output, bool identity,
                  Index taps) {
  if (!fs::exists(input)) throw DataError("missing input " + input.string());
  std::optional<Model> model;
  if (!checkpoint.empty()) {
    model = load_checkpoint(checkpoint).model;
    taps = model->config.taps;
  } else if (!identity) {
    throw UsageError("dereverb needs --checkpoint unless --identity is given");
  }
  const StftConfig stft = model ? model->stft : StftConfig{};
  const Waveform y = read_wav(input, 0.0);
  if (y.sample_rate != kDefaultSampleRate) {
    throw DataError(input.string() + " is sampled at " + std::to_string(static_cast<int>(y.sample_rate)) +
                    " Hz; 16000 Hz is required");
  }
  const Waveform out = identity ? enhance_identity(y, taps, stft) : enhance(*model, y);
  if (!output.parent_path().empty()) fs::create_directories(output.parent_path());
  write_wav(output, out);
}

std::vector<MetricRecord> cmd_evaluate(const ProjectConfig& config, std::ostream& log) {
  const WorkLayout work{config.work_dir};
  WorkLock lock(work.root);
  const DatasetManifest manifest = load_manifest(work.manifest());
  std::vector<std::pair<std::string, std::optional<Model>>> methods;
  for (const auto& m : config.methods) {
    if (m == "rev") {
      methods.emplace_back(m, std::nullopt);
    } else {
      methods.emplace_back(m, load_best(work, parse_head(m)));
    }
  }
  std::vector<MetricRecord> records;
  const auto test = manifest.split("test");
  if (test.empty()) throw DataError("the dataset has no test examples");
  for (const DatasetEntry* e : test) {
    const auto [y, ye] = load_entry(work.dataset(), *e);
    // The reference is y^E; its digest must match the manifest.
    Fnv1a h;
    h.update(signal_digest(y.samples));
    h.update(signal_digest(ye.samples));
    if (h.hex() != e->digest) throw DataError("example " + e->id + " does not match its manifest digest");
    for (auto& [name, model] : methods) {
      const Waveform est = model ? enhance(*model, y) : enhance_identity(y, config.train.taps, config.stft);
      records.push_back({e->id, e->room, e->rt60, e->scenario, name, si_sdr(est, ye), estoi(est, ye)});
    }
    log << "evaluated " << e->id << '\n';
  }
  std::ostringstream jsonl;
  write_metrics_jsonl(jsonl, records);
  write_text(work.eval() / "metrics.jsonl", jsonl.str());
  std::string table;
  write_reports(work, records, &table);
  update_index(work.root, "evaluate",
               {"eval/metrics.jsonl", "eval/metrics.csv", "eval/tables.txt"});
  log << table;
  return records;
}

std::string cmd_report(const ProjectConfig& config, std::ostream& log) {
  const WorkLayout work{config.work_dir};
  WorkLock lock(work.root);
  const auto records = read_metrics_jsonl(work.eval() / "metrics.jsonl");
  std::string table;
  write_reports(work, records, &table);
  update_index(work.root, "report", {"eval/metrics.csv", "eval/tables.txt"});
  log << table;
  return table;
}

}  // namespace derev
