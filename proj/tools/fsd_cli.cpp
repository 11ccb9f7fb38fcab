// Copyright 2026 The fsdbench Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// fsd: command-line front end over the C API.
//
//   fsd gen-data --task pair --size 2000 --out data/pair
//   fsd train-teacher --config configs/desk_parity.json
//   fsd distill --config configs/desk_parity.json --kind ILG --seed 1
//   fsd report --config configs/desk_parity.json
//
// Exit codes: 0 success, 1 usage or I/O error, 2 numerical failure,
// 3 missing upstream stage.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fsd/fsd.h"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::vector<std::string> sets;
  std::string kind;
  std::uint64_t seed = 0;
  std::size_t batch_size = 0;
  // gen-data without a config
  std::string task = "parity";
  std::size_t size = 2000, vocab = 60, seq_len = 16, marker_len = 3;
};

std::string json_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

int report(fsd_status s) {
  if (s != FSD_OK) std::fprintf(stderr, "fsd: %s: %s\n", fsd_status_name(s), fsd_last_error());
  return fsd_exit_code(s);
}

// Owns an open experiment for the duration of one subcommand.
class Session {
 public:
  ~Session() { fsd_experiment_close(exp_); }

  fsd_status open(const Options& o, std::vector<std::string> extra = {}) {
    std::vector<std::string> all = o.sets;
    if (!o.out.empty()) all.push_back("out_dir=" + json_string(o.out));
    all.insert(all.end(), extra.begin(), extra.end());
    std::vector<const char*> ptrs;
    for (const auto& s : all) ptrs.push_back(s.c_str());
    return fsd_experiment_open(o.config.c_str(), ptrs.data(), ptrs.size(), &exp_);
  }

  fsd_experiment* get() const { return exp_; }

  std::vector<std::uint64_t> seeds() const {
    std::size_t n = 0;
    fsd_experiment_seeds(exp_, nullptr, 0, &n);
    std::vector<std::uint64_t> out(n);
    fsd_experiment_seeds(exp_, out.data(), n, &n);
    return out;
  }

 private:
  fsd_experiment* exp_ = nullptr;
};

void add_common(CLI::App* sub, Options& o, bool config_required = true) {
  auto* c = sub->add_option("-c,--config", o.config, "Experiment config (JSON)");
  if (config_required) c->required()->check(CLI::ExistingFile);
  sub->add_option("-o,--out", o.out, "Run directory (overrides out_dir)");
  sub->add_option("--set", o.sets, "Config override key=value, e.g. distill.weights.beta=3")->take_all();
}

void add_run(CLI::App* sub, Options& o) {
  add_common(sub, o);
  sub->add_option("-k,--kind", o.kind, "Loss kind: noDS, VKD, I, L, G, IL, ILG")->required();
  sub->add_option("-s,--seed", o.seed, "Student seed (default: first configured seed)");
  sub->add_option("-b,--batch-size", o.batch_size, "Batch size (default: configured)");
}

using RunFn = fsd_status (*)(fsd_experiment*, const fsd_run*);

int run_stage(const Options& o, CLI::App* sub, RunFn fn) {
  Session s;
  if (auto st = s.open(o); st != FSD_OK) return report(st);
  fsd_run run{o.kind.c_str(), o.seed, o.batch_size};
  if (sub->count("--seed") == 0) {
    auto seeds = s.seeds();
    run.seed = seeds.front();
  }
  return report(fn(s.get(), &run));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feature-structure distillation benchmark"};
  app.set_version_flag("--version", std::string(fsd_version()));
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic train/dev/test dataset");
  add_common(gen, o, false);
  gen->add_option("--task", o.task, "parity, marker or pair");
  gen->add_option("--size", o.size, "Training lines (dev and test get a quarter each)");
  gen->add_option("--vocab", o.vocab, "Distinct content words");
  gen->add_option("--seq-len", o.seq_len, "Maximum tokens per line");
  gen->add_option("--marker-len", o.marker_len, "Shared span length (pair task)");
  gen->add_option("-s,--seed", o.seed, "Generator seed");

  auto* teacher = app.add_subcommand("train-teacher", "Fine-tune the teacher");
  add_common(teacher, o);
  teacher->add_option("-s,--seed", o.seed, "Teacher seed (overrides teacher_training.seed)");

  auto* memory = app.add_subcommand("post-train-memory", "Cluster teacher features into the teacher memory");
  add_common(memory, o);

  auto* distill = app.add_subcommand("distill", "Distill one student");
  add_run(distill, o);
  auto* rd = app.add_subcommand("analyze-rd", "Relation-difference curve of a student");
  add_run(rd, o);
  auto* restoration = app.add_subcommand("analyze-restoration", "Restoration rate against teacher predictions");
  add_run(restoration, o);
  auto* heat = app.add_subcommand("heatmap", "Cross-batch CKA heatmap of a student");
  add_run(heat, o);

  auto* rank = app.add_subcommand("rank", "Average RD ranks across the configured kinds");
  add_common(rank, o);
  rank->add_option("-s,--seed", o.seed, "Seed to rank (default: every configured seed)");

  auto* rep = app.add_subcommand("report", "Mean and standard deviation over seeds");
  add_common(rep, o);

  auto* all = app.add_subcommand("run", "Every stage for every configured kind and seed");
  add_common(all, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (gen->parsed()) {
    if (!o.config.empty()) {
      Session s;
      if (auto st = s.open(o); st != FSD_OK) return report(st);
      return report(fsd_gen_data(s.get()));
    }
    if (o.out.empty()) {
      std::fprintf(stderr, "fsd: gen-data needs --config or --out\n");
      return 1;
    }
    return report(fsd_generate_dataset(o.task.c_str(), o.size, o.vocab, o.seq_len, o.marker_len, o.seed,
                                       o.out.c_str()));
  }
  if (teacher->parsed()) {
    Session s;
    std::vector<std::string> extra;
    if (teacher->count("--seed")) extra.push_back("teacher_training.seed=" + std::to_string(o.seed));
    if (auto st = s.open(o, extra); st != FSD_OK) return report(st);
    double acc = 0.0;
    auto st = fsd_train_teacher(s.get(), &acc);
    if (st == FSD_OK) std::printf("teacher train accuracy %.4f\n", acc);
    return report(st);
  }
  if (memory->parsed()) {
    Session s;
    if (auto st = s.open(o); st != FSD_OK) return report(st);
    return report(fsd_post_train_memory(s.get()));
  }
  if (distill->parsed()) return run_stage(o, distill, fsd_distill);
  if (rd->parsed()) return run_stage(o, rd, fsd_analyze_rd);
  if (restoration->parsed()) return run_stage(o, restoration, fsd_analyze_restoration);
  if (heat->parsed()) return run_stage(o, heat, fsd_heatmap);
  if (rank->parsed()) {
    Session s;
    if (auto st = s.open(o); st != FSD_OK) return report(st);
    std::vector<std::uint64_t> seeds = rank->count("--seed") ? std::vector<std::uint64_t>{o.seed} : s.seeds();
    for (auto seed : seeds) {
      if (auto st = fsd_rank(s.get(), seed); st != FSD_OK) return report(st);
    }
    return 0;
  }
  if (rep->parsed()) {
    Session s;
    if (auto st = s.open(o); st != FSD_OK) return report(st);
    return report(fsd_report(s.get()));
  }
  Session s;
  if (auto st = s.open(o); st != FSD_OK) return report(st);
  return report(fsd_run_all(s.get()));
}
