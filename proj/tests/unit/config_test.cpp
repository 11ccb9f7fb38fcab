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
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "fsd/config.hpp"
#include "fsd/csv.hpp"
#include "fsd/errors.hpp"
#include "fsd/pipeline.hpp"

namespace fsd::cfg {
namespace {

namespace fs = std::filesystem;

TEST(Config, DefaultsAreValid) {
  auto c = parse(Json::object());
  EXPECT_EQ(c.teacher.n_layers, 4u);
  EXPECT_EQ(c.student.n_layers, 2u);
  EXPECT_EQ(c.seeds.size(), 5u);
  EXPECT_EQ(c.kinds.size(), 7u);
  EXPECT_EQ(c.distill.kmeans_epochs, 3u);
  EXPECT_EQ(c.hash(), parse(Json::object()).hash());
  EXPECT_EQ(c.hash().size(), 16u);
}

TEST(Config, UnknownKeysAndWrongTypesAreRejected) {
  EXPECT_THROW(parse(Json{{"distil", Json::object()}}), UsageError);
  EXPECT_THROW(parse(Json{{"distill", {{"weights", {{"betta", 1}}}}}}), UsageError);
  EXPECT_THROW(parse(Json{{"seeds", "1"}}), UsageError);
  EXPECT_THROW(parse(Json{{"seeds", Json::array()}}), UsageError);
  EXPECT_THROW(parse(Json{{"distill", {{"epochs", -1}}}}), UsageError);
  EXPECT_THROW(parse(Json{{"distill", {{"kind_weights", {{"Q", {{"beta", 1}}}}}}}}), UsageError);
  EXPECT_THROW(parse(Json{{"student", {{"n_layers", 6}}}}), UsageError);
}

TEST(Config, KindWeightsOverlayTheBase) {
  Json doc = {{"distill", {{"weights", {{"beta", 1.0}, {"gamma_g", 0.01}}},
                           {"kind_weights", {{"G", {{"beta", 0.1}}}, {"FSD_I", {{"beta", 3.0}}}}}}}};
  auto c = parse(doc);
  EXPECT_EQ(c.distill_for(loss::LossKind::kGlobal, 1).weights.beta, 0.1);
  EXPECT_EQ(c.distill_for(loss::LossKind::kIntra, 1).weights.beta, 3.0);
  EXPECT_EQ(c.distill_for(loss::LossKind::kLocal, 1).weights.beta, 1.0);
  EXPECT_EQ(c.distill_for(loss::LossKind::kIntraLocal, 1).weights.gamma_g, 0.0);
  EXPECT_EQ(c.distill_for(loss::LossKind::kIntraLocalGlobal, 1).weights.gamma_g, 0.01);
  auto d = c.distill_for(loss::LossKind::kVKD, 4, 8);
  EXPECT_EQ(d.seed, 4u);
  EXPECT_EQ(d.batch_size, 8u);
}

TEST(Config, OverridesUseDottedKeys) {
  Json doc = Json::object();
  apply_override(doc, "distill.weights.beta=3");
  apply_override(doc, "out_dir=runs/x");
  apply_override(doc, "seeds=[4,5]");
  auto c = parse(doc);
  EXPECT_EQ(c.distill.weights.beta, 3.0);
  EXPECT_EQ(c.out_dir, "runs/x");
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{4, 5}));
  EXPECT_THROW(apply_override(doc, "novalue"), UsageError);
  EXPECT_THROW(apply_override(doc, "a..b=1"), UsageError);
}

TEST(Config, LoadsCommentedFiles) {
  auto p = fs::temp_directory_path() / "fsd_config_test.json";
  std::ofstream(p) << "// comment\n{\"name\": \"t\", /* inline */ \"seeds\": [3]}\n";
  auto c = load(p, {"distill.epochs=1"});
  EXPECT_EQ(c.name, "t");
  EXPECT_EQ(c.distill.epochs, 1u);
  std::ofstream(p) << "{not json";
  EXPECT_THROW(load(p), FormatError);
  EXPECT_THROW(load(p.string() + ".missing"), IoError);
}

TEST(Config, ShippedPresetsParse) {
  for (const char* name : {"desk_parity.json", "desk_pair.json"}) {
    const fs::path p = fs::path(FSD_SOURCE_DIR) / "configs" / name;
    EXPECT_NO_THROW(load(p)) << name;
  }
  std::ifstream grids(fs::path(FSD_SOURCE_DIR) / "configs" / "search_space.json");
  const Json doc = Json::parse(grids, nullptr, false, true);
  ASSERT_FALSE(doc.is_discarded());
  EXPECT_EQ(doc.at("G").at("kmeans_epochs"), 3);
  EXPECT_THROW(parse(doc), UsageError);  // reference only, not an experiment
}

TEST(Csv, ShortestRoundTripAndParsing) {
  EXPECT_EQ(csv::format(0.1), "0.1");
  EXPECT_EQ(csv::format(1.0), "1");
  EXPECT_EQ(csv::format(std::optional<double>{}), "");
  for (double v : {1.0 / 3.0, -2.5e-300, 123456789.125}) EXPECT_EQ(csv::parse_double(csv::format(v)), v);
  EXPECT_THROW(csv::parse_double("1,5"), FormatError);
  auto p = fs::temp_directory_path() / "fsd_csv_test.csv";
  csv::Writer w({"a", "b"});
  w.row({"x", ""});
  w.row({"y", "2"});
  w.save(p);
  auto t = csv::read(p);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][1], "");
  EXPECT_EQ(t.number(1, "b"), 2.0);
  EXPECT_THROW(t.column("c"), FormatError);
  EXPECT_THROW(w.row({"only one"}), UsageError);
}

// Tiny end-to-end pipeline exercising the dependency checks.
TEST(Pipeline, StagesEnforceTheirDependencies) {
  const fs::path out = fs::temp_directory_path() / "fsd_pipeline_test";
  fs::remove_all(out);
  Json doc = {{"task", {{"name", "marker"}, {"size", 64}, {"seq_len", 8}}},
              {"teacher", {{"n_layers", 2}, {"d_model", 8}, {"d_ff", 8}, {"max_seq_len", 8}}},
              {"student", {{"n_layers", 1}, {"d_model", 8}, {"d_ff", 8}, {"max_seq_len", 8}}},
              {"teacher_training", {{"epochs", 1}}},
              {"distill", {{"epochs", 1}, {"batch_size", 8}, {"memory_size", 2}, {"checkpoint_interval", 4}}},
              {"kinds", {"VKD", "G"}},
              {"batch_size_study", {{"kinds", {"G"}}, {"sizes", {4, 8}}}},
              {"analysis", {{"pool_size", 2}, {"pool_batch_size", 4}, {"rd_batches", 1}, {"rd_batch_size", 8}}},
              {"out_dir", out.string()},
              {"seeds", {1, 2}}};
  pipe::Experiment e(parse(doc));
  const pipe::RunSpec g{loss::LossKind::kGlobal, 1, 0};
  EXPECT_THROW(e.train_teacher(), DependencyError);
  e.gen_data();
  EXPECT_THROW(e.post_train_memory(), DependencyError);
  EXPECT_THROW(e.distill(g), DependencyError);
  e.train_teacher();
  EXPECT_THROW(e.distill(g), DependencyError);
  EXPECT_NO_THROW(e.distill({loss::LossKind::kVKD, 1, 0}));
  EXPECT_THROW(e.rank(1), DependencyError);
  e.post_train_memory();
  e.distill(g);
  EXPECT_TRUE(fs::exists(e.run_dir(g) / "checkpoints" / "step_4.fsdc"));
  e.analyze_rd(g);
  auto curve = csv::read(e.run_dir(g) / "rd_curve.csv");
  auto metrics = csv::read(e.run_dir(g) / "metrics.csv");
  // 64 rows, batch 8 -> 8 steps; checkpoints at 4 and 8.
  ASSERT_EQ(curve.rows.size(), 2u);
  EXPECT_EQ(curve.rows[1][0], "8");
  // Offline replay of the step-4 checkpoint matches the live record.
  EXPECT_EQ(curve.rows[0][1], metrics.rows[3][metrics.column("rd_e_intra")]);
  EXPECT_THROW(e.report(), DependencyError);

  // A student from another configuration is refused.
  Json changed = doc;
  changed["distill"]["weights"] = {{"beta", 2.0}};
  pipe::Experiment other(parse(changed));
  EXPECT_THROW(other.heatmap(g), DependencyError);
  fs::remove_all(out);
}

}  // namespace
}  // namespace fsd::cfg
