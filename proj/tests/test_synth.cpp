/* Copyright 2026 The mifid-engine Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <gtest/gtest.h>

#include "mifid/persistence.hpp"
#include "mifid/synth.hpp"
#include "scratch_dir.hpp"

namespace {

using mifid::Label;
namespace synth = mifid::synth;

synth::SynthScenario small_scenario() {
  auto s = synth::SynthScenario::default_scenario();
  s.train_n = 300;
  s.gen_n = 80;
  s.dim = 24;
  s.signal_dim = 8;
  return s;
}

}  // namespace

TEST(Synth, FieldIsDeterministic) {
  const auto scn = small_scenario();
  const auto a = synth::generate_field(scn);
  const auto b = synth::generate_field(scn);
  ASSERT_EQ(a.submissions.size(), b.submissions.size());
  for (std::size_t i = 0; i < a.submissions.size(); ++i) {
    for (const auto& [space, feats] : a.submissions[i].features) {
      EXPECT_EQ(feats.data(), b.submissions[i].features.at(space).data());
    }
  }
  auto other = scn;
  other.seed += 1;
  EXPECT_NE(synth::generate_field(other).train.at(scn.public_space).data(), a.train.at(scn.public_space).data());
}

TEST(Synth, DefaultScenarioComposition) {
  const auto scn = synth::SynthScenario::default_scenario();
  ASSERT_EQ(scn.generators.size(), 20u);
  std::size_t memorizers = 0;
  for (const auto& g : scn.generators) memorizers += g.label() == Label::memorized;
  EXPECT_EQ(memorizers, 9u);
  EXPECT_EQ(scn.generators[0].label_detail(), mifid::LabelDetail::sup);
  EXPECT_EQ(scn.generators[3].label_detail(), mifid::LabelDetail::ae);
  EXPECT_EQ(scn.generators[7].label_detail(), mifid::LabelDetail::aug);
  EXPECT_FALSE(scn.generators[12].label_detail());
}

TEST(Synth, CopiesHaveZeroDistance) {
  const auto scn = small_scenario();
  const auto [pub, priv] = synth::default_configs(scn);
  const auto records = synth::score_synth_field(synth::generate_field(scn), pub, priv, 2);
  EXPECT_EQ(records[0].public_score->s, 0.0);
  EXPECT_EQ(records[1].private_score->s, 0.0);
  for (const auto& r : records) {
    ASSERT_FALSE(r.failed()) << r.error;
    ASSERT_TRUE(r.public_score->inception_score);
    EXPECT_GE(*r.public_score->inception_score, 1.0);
  }
}

TEST(Synth, SeparationAndAmplifiedSpaceSelected) {
  const auto run = synth::run_scenario(synth::SynthScenario::default_scenario());
  const auto& scn_pub = run.calibration.per_space.at("synth-base");
  const auto& scn_priv = run.calibration.per_space.at("synth-amplified");
  EXPECT_GT(scn_pub.margin, 0.05);
  EXPECT_GT(scn_priv.margin, scn_pub.margin);
  EXPECT_EQ(run.calibration.space_id, "synth-amplified");
  for (const auto& r : run.records) {
    EXPECT_EQ(r.private_score->penalized, r.label == Label::memorized) << r.submission_id;
    EXPECT_EQ(r.public_score->penalized, r.label == Label::memorized) << r.submission_id;
  }
  for (const auto& e : run.final_board.entries) {
    const auto it = std::find_if(run.records.begin(), run.records.end(),
                                 [&](const auto& r) { return r.submission_id == e.submission_id; });
    EXPECT_EQ(it->label, Label::legitimate);
  }
  EXPECT_EQ(run.analysis.field_size, 20u);
}

TEST(Synth, DiskTreeScoresLikeInMemoryField) {
  testing_support::ScratchDir dir("synth-tree");
  const auto scn = small_scenario();
  const auto field = synth::generate_field(scn);
  synth::write_field_tree(field, scn, dir.path());
  const auto kv = mifid::text::KeyValueConfig::load(dir / "config.toml");
  const auto rc = mifid::RunConfig::from(kv, dir.path());
  const auto labels = mifid::read_labels_csv(rc.labels);
  const auto disk = mifid::score_field(rc.submissions(), rc.pub, rc.priv, labels, 3);
  const auto memory = synth::score_synth_field(field, rc.pub, rc.priv, 3);
  EXPECT_EQ(disk, memory);
}

TEST(Synth, ScenarioFromConfig) {
  const auto kv = mifid::text::KeyValueConfig::parse(
      "[synth]\nseed = 5\ncopies = 1\nnoisy_sigmas = 0.01, 0.05\nsamplers = 3\ndim = 20\nsignal_dim = 4\n");
  const auto scn = synth::SynthScenario::from(kv);
  EXPECT_EQ(scn.seed, 5u);
  EXPECT_EQ(scn.generators.size(), 6u);
  EXPECT_EQ(scn.generators[2].sigma, 0.05);
  EXPECT_EQ(scn.generators[5].kind, synth::GeneratorKind::sampler);
  EXPECT_EQ(scn.dim, 20);
}

TEST(Synth, InvalidScenarios) {
  auto s = small_scenario();
  s.signal_dim = s.dim + 1;
  EXPECT_THROW(s.validate(), mifid::ConfigError);
  s = small_scenario();
  s.private_space = s.public_space;
  EXPECT_THROW(s.validate(), mifid::ConfigError);
  s = small_scenario();
  s.generators.clear();
  EXPECT_THROW(s.validate(), mifid::ConfigError);
}

TEST(Synth, NoMemorizersCannotCalibrate) {
  auto s = small_scenario();
  std::erase_if(s.generators, [](const auto& g) { return g.label() == Label::memorized; });
  EXPECT_THROW(synth::run_scenario(s), mifid::EmptyClassError);
}
