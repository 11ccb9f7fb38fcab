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
#include "fsd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>

#include "fsd/analysis.hpp"
#include "fsd/checkpoint.hpp"
#include "fsd/csv.hpp"
#include "fsd/errors.hpp"
#include "fsd/rng.hpp"
#include "fsd/train.hpp"

#ifndef FSD_VERSION
#define FSD_VERSION "0.0.0"
#endif

namespace fsd::pipe {

namespace fs = std::filesystem;
using cfg::Json;
using loss::LossKind;

namespace {

constexpr const char* kRdColumns[4] = {"rd_e_intra", "rd_e_inter", "rd_c_intra", "rd_c_inter"};

std::string file_hash(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return cfg::hex64(fnv1a(bytes));
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
}

void require(const fs::path& p, const std::string& stage) {
  if (!fs::exists(p)) throw DependencyError("missing " + p.string() + " (run " + stage + " first)");
}

// manifest.json of a stage directory; `files` are hashed from disk. Any
// existing entries for other files are kept so analysis stages can share the
// run directory of their student.
void write_manifest(const fs::path& dir, const std::string& stage, const Json& fields,
                    const std::vector<std::string>& files) {
  const fs::path path = dir / "manifest.json";
  Json m = Json::object();
  if (fs::exists(path)) {
    std::ifstream in(path);
    m = Json::parse(in, nullptr, false);
    if (m.is_discarded() || !m.is_object()) m = Json::object();
  }
  m["version"] = FSD_VERSION;
  m["checkpoint_format"] = ckpt::kFormatVersion;
  for (const auto& [k, v] : fields.items()) m[k] = v;
  Json& stages = m["stages"];
  if (!stages.is_array()) stages = Json::array();
  if (std::find(stages.begin(), stages.end(), stage) == stages.end()) stages.push_back(stage);
  for (const auto& f : files) m["files"][f] = file_hash(dir / f);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << m.dump(2) << '\n';
}

std::string run_name(LossKind kind, std::size_t bs) {
  return std::string(loss::to_string(kind)) + "_bs" + std::to_string(bs);
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Population standard deviation.
double std_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double metric_value(const fs::path& eval_csv, const std::string& name) {
  auto t = csv::read(eval_csv);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (t.rows[r][0] == name) return t.number(r, "value");
  }
  throw FormatError(eval_csv.string() + ": no metric '" + name + "'");
}

std::array<double, 4> final_rd(const fs::path& rd_csv) {
  auto t = csv::read(rd_csv);
  if (t.rows.empty()) throw FormatError(rd_csv.string() + ": no rows");
  std::array<double, 4> out{};
  for (std::size_t k = 0; k < 4; ++k) out[k] = t.number(t.rows.size() - 1, kRdColumns[k]);
  return out;
}

}  // namespace

const char* version() { return FSD_VERSION; }

Experiment::Experiment(cfg::ExperimentConfig config) : config_(std::move(config)) {}

fs::path Experiment::data_dir() const {
  return config_.task.synthetic ? config_.out_dir / "data" : config_.task.tsv_dir;
}
fs::path Experiment::teacher_dir() const { return config_.out_dir / "teacher"; }
fs::path Experiment::memory_dir() const { return config_.out_dir / "memory"; }
fs::path Experiment::seed_dir(std::uint64_t seed) const {
  return config_.out_dir / ("seed_" + std::to_string(seed));
}
fs::path Experiment::run_dir(const RunSpec& run) const {
  return seed_dir(run.seed) / run_name(run.kind, batch_size(run));
}

std::size_t Experiment::batch_size(const RunSpec& run) const {
  return run.batch_size ? run.batch_size : config_.distill.batch_size;
}

std::string Experiment::teacher_key() const {
  const Json& r = config_.raw;
  Json slice = {{"task", r.at("task")}, {"teacher", r.at("teacher")}, {"teacher_training", r.at("teacher_training")}};
  return cfg::hex64(fnv1a(slice.dump()));
}

std::string Experiment::memory_key() const {
  const Json& d = config_.raw.at("distill");
  Json slice = {{"teacher", teacher_key()},
                {"memory_size", d.at("memory_size")},
                {"kmeans_epochs", d.at("kmeans_epochs")}};
  return cfg::hex64(fnv1a(slice.dump()));
}

std::string Experiment::student_key() const {
  Json slice = {{"memory", memory_key()}, {"student", config_.raw.at("student")}, {"distill", config_.raw.at("distill")}};
  return cfg::hex64(fnv1a(slice.dump()));
}

void Experiment::write_config_copy() const {
  ensure_dir(config_.out_dir);
  const fs::path p = config_.out_dir / ("config-" + config_.hash() + ".json");
  if (fs::exists(p)) return;
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << config_.raw.dump(2) << '\n';
}

const data::TaskData& Experiment::task_data() {
  if (!data_) {
    for (const char* f : {"train.tsv", "dev.tsv", "test.tsv"}) require(data_dir() / f, "gen-data");
    data_ = data::load_task_dir(data_dir(), config_.teacher.max_seq_len, config_.task.n_classes);
    if (data_->vocab.size() > config_.teacher.vocab_size) {
      throw UsageError("dataset vocabulary has " + std::to_string(data_->vocab.size()) +
                       " ids, teacher.vocab_size is " + std::to_string(config_.teacher.vocab_size));
    }
  }
  return *data_;
}

const model::EncoderParams& Experiment::teacher() {
  if (!teacher_) {
    const fs::path p = teacher_dir() / "teacher.fsdc";
    require(p, "train-teacher");
    auto c = ckpt::load(p);
    if (c.meta.config_hash != teacher_key() || !c.config || !(*c.config == config_.teacher)) {
      throw DependencyError(p.string() + " was trained under a different configuration (rerun train-teacher)");
    }
    teacher_ = std::move(c.params);
  }
  return *teacher_;
}

const mem::MemoryBank& Experiment::teacher_memory() {
  if (!memory_) {
    const fs::path p = memory_dir() / "teacher_memory.fsdc";
    require(p, "post-train-memory");
    auto c = ckpt::load(p);
    if (c.meta.config_hash != memory_key() || !c.memory) {
      throw DependencyError(p.string() + " was built under a different configuration (rerun post-train-memory)");
    }
    memory_ = std::move(*c.memory);
  }
  return *memory_;
}

model::EncoderParams Experiment::student(const RunSpec& run) {
  const fs::path p = run_dir(run) / "student.fsdc";
  require(p, "distill");
  auto c = ckpt::load(p);
  if (c.meta.config_hash != student_key()) {
    throw DependencyError(p.string() + " was distilled under a different configuration (rerun distill)");
  }
  return std::move(c.params);
}

// The first rd_batches * rd_batch_size dev examples, in file order.
std::vector<model::Batch> Experiment::rd_batches() {
  const auto& dev = task_data().dev;
  const auto& a = config_.analysis;
  if (a.rd_batches * a.rd_batch_size > dev.size()) {
    throw UsageError("analysis: RD evaluation needs " + std::to_string(a.rd_batches * a.rd_batch_size) +
                     " dev examples, found " + std::to_string(dev.size()));
  }
  std::vector<model::Batch> out;
  for (std::size_t i = 0; i < a.rd_batches; ++i) out.push_back(dev.range(i * a.rd_batch_size, a.rd_batch_size));
  return out;
}

void Experiment::gen_data() {
  if (!config_.task.synthetic) throw UsageError("gen-data: task.source is tsv, nothing to generate");
  data::gen_data(config_.task.gen, data_dir());
  data_.reset();
  write_manifest(data_dir(), "gen-data", {{"config_hash", config_.hash()}, {"seed", config_.task.gen.seed}},
                 {"train.tsv", "dev.tsv", "test.tsv"});
}

double Experiment::train_teacher() {
  write_config_copy();
  const auto& td = task_data();
  auto result = train::fine_tune_teacher(config_.teacher, config_.teacher_training, td.train);
  const fs::path dir = teacher_dir();
  ensure_dir(dir);

  csv::Writer epochs({"epoch", "mean_loss", "train_accuracy"});
  for (const auto& e : result.epochs) {
    epochs.row({std::to_string(e.epoch), csv::format(e.mean_loss), csv::format(e.train_accuracy)});
  }
  epochs.save(dir / "metrics.csv");
  csv::Writer eval({"metric", "value"});
  eval.row({"train_accuracy", csv::format(result.train_accuracy)});
  eval.row({"dev_accuracy", csv::format(train::accuracy(train::predict(result.params, config_.teacher, td.dev), td.dev.labels))});
  eval.row({"test_accuracy", csv::format(train::accuracy(train::predict(result.params, config_.teacher, td.test), td.test.labels))});
  eval.save(dir / "eval.csv");

  ckpt::Checkpoint c;
  c.config = config_.teacher;
  c.params = result.params.clone(false);
  c.meta = {"teacher", config_.teacher_training.seed, result.epochs.size(), teacher_key(), ""};
  ckpt::save(dir / "teacher.fsdc", c);
  teacher_ = std::move(result.params);
  memory_.reset();
  write_manifest(dir, "train-teacher",
                 {{"config_hash", config_.hash()}, {"key", teacher_key()}, {"seed", config_.teacher_training.seed}},
                 {"teacher.fsdc", "metrics.csv", "eval.csv"});
  return result.train_accuracy;
}

void Experiment::post_train_memory() {
  write_config_copy();
  const auto& td = task_data();
  auto cache = train::cache_teacher_outputs(teacher(), config_.teacher, td.train);
  const std::size_t n = td.train.size();
  num::Tensor flat = num::Tensor::from({n, cache.hidden.size() / n}, cache.hidden.to_vector());
  const std::uint64_t seed = config_.teacher_training.seed;
  auto [bank, report] = mem::post_train_teacher_memory(flat, config_.distill.memory_size,
                                                       config_.distill.kmeans_epochs, seed);
  const fs::path dir = memory_dir();
  ensure_dir(dir);
  csv::Writer obj({"epoch", "objective"});
  for (std::size_t e = 0; e < report.objective.size(); ++e) obj.row({std::to_string(e + 1), csv::format(report.objective[e])});
  obj.save(dir / "kmeans.csv");
  csv::Writer counts({"centroid", "members"});
  for (std::size_t k = 0; k < report.counts.size(); ++k) counts.row({std::to_string(k), std::to_string(report.counts[k])});
  counts.save(dir / "clusters.csv");

  ckpt::Checkpoint c;
  c.memory = bank;
  c.meta = {"teacher-memory", seed, report.epochs_run, memory_key(), ""};
  ckpt::save(dir / "teacher_memory.fsdc", c);
  memory_ = std::move(bank);
  write_manifest(dir, "post-train-memory",
                 {{"config_hash", config_.hash()}, {"key", memory_key()}, {"seed", seed},
                  {"reseeded_clusters", report.reseeded}},
                 {"teacher_memory.fsdc", "kmeans.csv", "clusters.csv"});
}

void Experiment::distill(const RunSpec& run) {
  write_config_copy();
  const auto& td = task_data();
  const auto& t = teacher();
  const mem::MemoryBank* tm = loss::uses_global(run.kind) ? &teacher_memory() : nullptr;
  auto dc = config_.distill_for(run.kind, run.seed, batch_size(run));
  const fs::path dir = run_dir(run);
  fs::remove_all(dir);
  ensure_dir(dir);

  const auto eval_batches = dc.checkpoint_interval ? rd_batches() : std::vector<model::Batch>{};
  const std::string key = student_key();
  const std::string kind(loss::to_string(run.kind));
  std::vector<std::string> written;
  train::DistillHooks hooks;
  hooks.on_step = [&](train::MetricsRecord& rec, const model::EncoderParams& p) {
    if (!dc.checkpoint_interval || rec.step % dc.checkpoint_interval) return;
    auto rd = analysis::evaluate_rd(t, config_.teacher, p, config_.student, eval_batches);
    rec.rd_e_intra = rd.e_intra;
    rec.rd_e_inter = rd.e_inter;
    rec.rd_c_intra = rd.c_intra;
    rec.rd_c_inter = rd.c_inter;
  };
  hooks.on_checkpoint = [&](std::size_t step, const model::EncoderParams& p, const mem::MemoryBank* m) {
    ensure_dir(dir / "checkpoints");
    ckpt::Checkpoint c;
    c.config = config_.student;
    c.params = p.clone(false);
    if (m) c.memory = *m;
    c.meta = {"student", run.seed, step, key, kind};
    const std::string name = "checkpoints/step_" + std::to_string(step) + ".fsdc";
    ckpt::save(dir / name, c);
    written.push_back(name);
  };
  auto result = train::distill(t, config_.teacher, tm, model::init_student_from_teacher(t, config_.teacher, config_.student),
                               config_.student, dc, td.train, hooks);

  csv::Writer metrics({"step", "epoch", "total", "ce", "kld", "vkd", "intra", "local", "global", "global_euclidean",
                       "global_cosine", "memory_structure", "batch_accuracy", "rd_e_intra", "rd_e_inter",
                       "rd_c_intra", "rd_c_inter"});
  for (const auto& m : result.metrics) {
    metrics.row({std::to_string(m.step), std::to_string(m.epoch), csv::format(m.total), csv::format(m.ce),
                 csv::format(m.kld), csv::format(m.vkd), csv::format(m.intra), csv::format(m.local),
                 csv::format(m.global), csv::format(m.global_euclidean), csv::format(m.global_cosine),
                 csv::format(m.memory_structure), csv::format(m.batch_accuracy), csv::format(m.rd_e_intra),
                 csv::format(m.rd_e_inter), csv::format(m.rd_c_intra), csv::format(m.rd_c_inter)});
  }
  metrics.save(dir / "metrics.csv");

  csv::Writer eval({"metric", "value"});
  for (const auto& [name, ds] : {std::pair<const char*, const data::Dataset*>{"train_accuracy", &td.train},
                                 {"dev_accuracy", &td.dev},
                                 {"test_accuracy", &td.test}}) {
    eval.row({name, csv::format(train::accuracy(train::predict(result.student, config_.student, *ds), ds->labels))});
  }
  eval.save(dir / "eval.csv");

  ckpt::Checkpoint c;
  c.config = config_.student;
  c.params = result.student.clone(false);
  c.memory = result.student_memory;
  c.meta = {"student", run.seed, result.metrics.size(), key, kind};
  ckpt::save(dir / "student.fsdc", c);
  written.insert(written.end(), {"student.fsdc", "metrics.csv", "eval.csv"});
  write_manifest(dir, "distill",
                 {{"config_hash", config_.hash()}, {"key", key}, {"seed", run.seed}, {"kind", kind},
                  {"batch_size", dc.batch_size}, {"steps", result.metrics.size()}},
                 written);
}

void Experiment::analyze_rd(const RunSpec& run) {
  const fs::path dir = run_dir(run);
  auto final_student = student(run);
  const auto& t = teacher();
  std::vector<analysis::Checkpointed> students;
  if (fs::exists(dir / "checkpoints")) {
    for (const auto& e : fs::directory_iterator(dir / "checkpoints")) {
      auto c = ckpt::load(e.path());
      if (c.meta.config_hash != student_key()) throw DependencyError(e.path().string() + " is stale (rerun distill)");
      students.push_back({c.meta.step, std::move(c.params)});
    }
  }
  std::sort(students.begin(), students.end(), [](const auto& a, const auto& b) { return a.step < b.step; });
  const std::size_t last = ckpt::load(dir / "student.fsdc").meta.step;
  if (students.empty() || students.back().step != last) students.push_back({last, std::move(final_student)});
  auto curve = analysis::rd_curve(t, config_.teacher, students, config_.student, rd_batches());
  csv::Writer w({"step", kRdColumns[0], kRdColumns[1], kRdColumns[2], kRdColumns[3]});
  for (const auto& r : curve) {
    w.row({std::to_string(r.step), csv::format(r.e_intra), csv::format(r.e_inter), csv::format(r.c_intra),
           csv::format(r.c_inter)});
  }
  w.save(dir / "rd_curve.csv");
  write_manifest(dir, "analyze-rd", {}, {"rd_curve.csv"});
}

void Experiment::analyze_restoration(const RunSpec& run) {
  const fs::path dir = run_dir(run);
  auto s = student(run);
  const auto& test = task_data().test;
  auto report = analysis::restoration_rate(train::predict(teacher(), config_.teacher, test),
                                           train::predict(s, config_.student, test), config_.task.n_classes);
  csv::Writer w({"class", "precision", "recall", "f1", "support", "undefined"});
  for (std::size_t k = 0; k < report.classes.size(); ++k) {
    const auto& c = report.classes[k];
    const bool undef = c.precision_undefined || c.recall_undefined || c.f1_undefined;
    w.row({std::to_string(k), csv::format(c.precision), csv::format(c.recall), csv::format(c.f1),
           std::to_string(c.support), undef ? "1" : "0"});
  }
  w.row({"macro", csv::format(report.macro_precision), csv::format(report.macro_recall), csv::format(report.macro_f1),
         std::to_string(test.size()), report.any_undefined ? "1" : "0"});
  w.save(dir / "restoration.csv");
  write_manifest(dir, "analyze-restoration", {}, {"restoration.csv"});
}

void Experiment::heatmap(const RunSpec& run) {
  const fs::path dir = run_dir(run);
  auto s = student(run);
  const auto& a = config_.analysis;
  auto pool = analysis::heatmap_pool(task_data().test, a.pool_size, a.pool_batch_size, a.pool_seed);
  auto h = analysis::cka_heatmap(teacher(), config_.teacher, s, config_.student, pool);
  std::vector<std::string> header = {"teacher_batch"};
  for (std::size_t j = 0; j < h.size; ++j) header.push_back("b" + std::to_string(j));
  csv::Writer w(header);
  for (std::size_t i = 0; i < h.size; ++i) {
    std::vector<std::string> row = {std::to_string(i)};
    for (std::size_t j = 0; j < h.size; ++j) {
      row.push_back(h.missing[i * h.size + j] ? std::string() : csv::format(h.at(i, j)));
    }
    w.row(row);
  }
  w.save(dir / "heatmap.csv");
  csv::Writer summary({"diagonal_average", "diagonal_count", "missing_count"});
  summary.row({csv::format(h.diagonal_average), std::to_string(h.diagonal_count), std::to_string(h.missing_count)});
  summary.save(dir / "heatmap_summary.csv");
  write_manifest(dir, "heatmap", {}, {"heatmap.csv", "heatmap_summary.csv"});
}

void Experiment::rank(std::uint64_t seed) {
  std::map<std::string, std::array<double, 4>> rd;
  std::vector<std::string> order;
  for (auto kind : config_.kinds) {
    const fs::path p = run_dir({kind, seed, 0}) / "rd_curve.csv";
    require(p, "analyze-rd");
    const std::string name(loss::to_string(kind));
    rd[name] = final_rd(p);
    order.push_back(name);
  }
  auto avg = analysis::rank_table(rd);
  std::vector<std::vector<double>> per_variant(4);
  for (std::size_t k = 0; k < 4; ++k) {
    std::vector<double> col;
    for (const auto& n : order) col.push_back(rd[n][k]);
    per_variant[k] = analysis::average_ranks(col);
  }
  csv::Writer w({"method", kRdColumns[0], kRdColumns[1], kRdColumns[2], kRdColumns[3], "rank_e_intra", "rank_e_inter",
                 "rank_c_intra", "rank_c_inter", "average_rank"});
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& v = rd[order[i]];
    w.row({order[i], csv::format(v[0]), csv::format(v[1]), csv::format(v[2]), csv::format(v[3]),
           csv::format(per_variant[0][i]), csv::format(per_variant[1][i]), csv::format(per_variant[2][i]),
           csv::format(per_variant[3][i]), csv::format(avg.at(order[i]))});
  }
  const fs::path dir = seed_dir(seed);
  ensure_dir(dir);
  w.save(dir / "ranks.csv");
  write_manifest(dir, "rank", {{"config_hash", config_.hash()}, {"seed", seed}}, {"ranks.csv"});
}

void Experiment::report() {
  // metric -> method -> per-seed values, in insertion order of methods.
  std::vector<std::string> methods;
  std::map<std::string, std::map<std::string, std::vector<double>>> values;
  const std::vector<std::string> metric_order = {"test_accuracy", "dev_accuracy", "restoration_macro_f1",
                                                 "heatmap_diagonal", kRdColumns[0], kRdColumns[1], kRdColumns[2],
                                                 kRdColumns[3], "average_rank", "accuracy_std_over_batch_sizes"};
  for (auto kind : config_.kinds) methods.emplace_back(loss::to_string(kind));
  for (std::uint64_t seed : config_.seeds) {
    const fs::path ranks = seed_dir(seed) / "ranks.csv";
    require(ranks, "rank");
    auto rt = csv::read(ranks);
    for (auto kind : config_.kinds) {
      const std::string name(loss::to_string(kind));
      const fs::path dir = run_dir({kind, seed, 0});
      for (const char* f : {"eval.csv", "restoration.csv", "heatmap_summary.csv", "rd_curve.csv"}) {
        require(dir / f, f == std::string("eval.csv") ? "distill" : "the analysis stages");
      }
      values["test_accuracy"][name].push_back(metric_value(dir / "eval.csv", "test_accuracy"));
      values["dev_accuracy"][name].push_back(metric_value(dir / "eval.csv", "dev_accuracy"));
      auto rs = csv::read(dir / "restoration.csv");
      values["restoration_macro_f1"][name].push_back(rs.number(rs.rows.size() - 1, "f1"));
      values["heatmap_diagonal"][name].push_back(csv::read(dir / "heatmap_summary.csv").number(0, "diagonal_average"));
      const auto rd = final_rd(dir / "rd_curve.csv");
      for (std::size_t k = 0; k < 4; ++k) values[kRdColumns[k]][name].push_back(rd[k]);
      bool ranked = false;
      for (std::size_t r = 0; r < rt.rows.size(); ++r) {
        if (rt.rows[r][0] == name) {
          values["average_rank"][name].push_back(rt.number(r, "average_rank"));
          ranked = true;
        }
      }
      if (!ranked) throw DependencyError(ranks.string() + " lacks method " + name + " (rerun rank)");
    }
    for (auto kind : config_.batch_size_study.kinds) {
      std::vector<double> acc;
      for (std::size_t bs : config_.batch_size_study.sizes) {
        const fs::path p = run_dir({kind, seed, bs}) / "eval.csv";
        require(p, "distill --batch-size " + std::to_string(bs));
        acc.push_back(metric_value(p, "test_accuracy"));
      }
      const std::string name(loss::to_string(kind));
      if (std::find(methods.begin(), methods.end(), name) == methods.end()) methods.push_back(name);
      values["accuracy_std_over_batch_sizes"][name].push_back(std_of(acc));
    }
  }
  csv::Writer w({"method", "metric", "mean", "std", "median", "n"});
  for (const auto& metric : metric_order) {
    for (const auto& m : methods) {
      auto it = values[metric].find(m);
      if (it == values[metric].end()) continue;
      const auto& v = it->second;
      w.row({m, metric, csv::format(mean_of(v)), csv::format(std_of(v)), csv::format(median_of(v)),
             std::to_string(v.size())});
    }
  }
  ensure_dir(config_.out_dir);
  w.save(config_.out_dir / "report.csv");
  write_manifest(config_.out_dir, "report", {{"config_hash", config_.hash()}, {"seeds", config_.seeds}}, {"report.csv"});
}

void Experiment::run_all() {
  if (config_.task.synthetic) gen_data();
  train_teacher();
  bool global = false;
  for (auto k : config_.kinds) global = global || loss::uses_global(k);
  for (auto k : config_.batch_size_study.kinds) global = global || loss::uses_global(k);
  if (global) post_train_memory();
  for (std::uint64_t seed : config_.seeds) {
    for (auto kind : config_.kinds) {
      RunSpec run{kind, seed, 0};
      distill(run);
      analyze_rd(run);
      analyze_restoration(run);
      heatmap(run);
    }
    for (auto kind : config_.batch_size_study.kinds) {
      for (std::size_t bs : config_.batch_size_study.sizes) {
        RunSpec run{kind, seed, bs};
        const bool main_run = bs == config_.distill.batch_size &&
                              std::find(config_.kinds.begin(), config_.kinds.end(), kind) != config_.kinds.end();
        if (!main_run) distill(run);
      }
    }
    rank(seed);
  }
  report();
}

}  // namespace fsd::pipe
