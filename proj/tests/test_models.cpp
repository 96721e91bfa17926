// Copyright 2026 The press2dyn Authors
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
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "press2dyn/ingest.hpp"
#include "press2dyn/models.hpp"
#include "test_util.hpp"

namespace press2dyn {
namespace {

using diff::Shape;

Model micro_pns(double dropout = 0.0) {
  PnsConfig c;
  c.depth = 2;
  c.width = 8;
  c.dropout = dropout;
  return build_pressnet_simple(c, 11);
}

Model micro_pn(double dropout = 0.0) {
  PnConfig c;
  c.base_channels = 8;
  c.fc_hidden = 3;
  c.spatial_dropout = dropout;
  return build_pressnet(c, 12);
}

struct Fixture {
  Take take;
  std::vector<NormalizedSample> samples;
};

Fixture synthetic_samples(std::size_t n, std::uint64_t seed = 1) {
  Fixture f;
  f.take = generate_synthetic_take(seed, n, reference_subject(0));
  std::vector<FrameRef> refs;
  for (std::uint32_t i = 0; i < n; ++i) refs.push_back({0, i});
  const auto norm = fit_normalizers({f.take}, refs);
  f.samples = make_samples(norm, {f.take}, refs);
  return f;
}

std::vector<PoseVector> inputs_of(const std::vector<NormalizedSample>& s) {
  std::vector<PoseVector> out;
  for (const auto& x : s) out.push_back(x.input);
  return out;
}

TEST(PressNet, SpatialTraceFollowsDecoderPlan) {
  PnConfig c;
  c.base_channels = 64;
  Model m = build_pressnet(c, 1);
  const auto mask = mask_tensor(synthetic_footmask());
  Graph g(Mode::kEval);
  std::vector<Shape> trace;
  forward(m, g, test::random_tensor({2, kPoseInputDim}, 3), mask, &trace);
  const std::vector<Shape> expected = {{2, 64, 4, 3},  {2, 64, 8, 3},  {2, 32, 16, 6},
                                       {2, 16, 32, 12}, {2, 8, 64, 24}, {2, 2, 60, 21}};
  EXPECT_EQ(trace, expected);
}

TEST(PressNet, PaperConfigChannelsAndParameterBudget) {
  const PnConfig c;
  const auto ch = c.channels();
  EXPECT_EQ(ch[1], 512u);
  EXPECT_EQ(ch[2], 256u);
  EXPECT_EQ(ch[3], 128u);
  EXPECT_EQ(ch[4], 64u);
  const Model m = build_pressnet(c, 0);
  const auto n = m.params.parameter_count();
  EXPECT_GE(n, 2'000'000u);
  EXPECT_LE(n, 4'000'000u);
}

TEST(PressNet, RejectsUpsamplingThatMissesDecodedSize) {
  PnConfig c;
  c.base_channels = 8;
  c.upsample[0] = {2, 2};
  EXPECT_THROW(build_pressnet(c, 0), UsageError);
}

TEST(PressNetSimple, PaperConfigLayerSizes) {
  const Model m = build_pressnet_simple(PnsConfig{}, 0);
  EXPECT_EQ(m.params.get("in.w").value.size() + m.params.get("in.b").value.size(), 125'440u);
  EXPECT_EQ(m.params.get("out.b").value.size(), kGridCells);
  EXPECT_EQ(kGridCells, 2520u);
}

TEST(Models, OutputsAreMaskedAndBounded) {
  const FootMask fm = synthetic_footmask();
  const auto mask = mask_tensor(fm);
  for (Model m : {micro_pns(0.5), micro_pn(0.5)})
    for (Mode mode : {Mode::kEval, Mode::kTrain}) {
      Graph g(mode, 5);
      const Tensor& y = g.value(forward(m, g, test::random_tensor({3, kPoseInputDim}, 4, 2.0), mask));
      ASSERT_EQ(y.shape(), (Shape{3, kNumFeet, kGridRows, kGridCols}));
      for (std::size_t b = 0; b < 3; ++b)
        for (std::size_t i = 0; i < kGridCells; ++i) {
          const double v = y[b * kGridCells + i];
          if (!fm.valid[i]) {
            EXPECT_EQ(v, 0.0);
          } else {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
          }
        }
    }
}

TEST(Models, EvalPredictionIsBatchInvariantAndRepeatable) {
  const FootMask fm = synthetic_footmask();
  const auto f = synthetic_samples(7);
  const auto inputs = inputs_of(f.samples);
  for (Model m : {micro_pns(0.5), micro_pn(0.5)}) {
    const auto batched = predict_normalized(m, inputs, fm);
    const auto again = predict_normalized(m, inputs, fm);
    const auto chunked = predict_normalized(m, inputs, fm, 3);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      const auto single = predict_normalized(m, {inputs[k]}, fm);
      EXPECT_EQ(batched[k], again[k]);
      for (std::size_t i = 0; i < kGridCells; ++i) {
        EXPECT_NEAR(single[0][i], batched[k][i], 1e-10);
        EXPECT_NEAR(chunked[k][i], batched[k][i], 1e-10);
      }
    }
  }
}

TEST(Models, EvalModeIgnoresGraphSeed) {
  const auto mask = mask_tensor(synthetic_footmask());
  const auto x = test::random_tensor({2, kPoseInputDim}, 9);
  Model m = micro_pn(0.5);
  Graph g1(Mode::kEval, 1), g2(Mode::kEval, 2);
  EXPECT_EQ(g1.value(forward(m, g1, x, mask)).storage(), g2.value(forward(m, g2, x, mask)).storage());
}

diff::LossFn mse_loss(Model& m, std::size_t batch) {
  const auto mask = mask_tensor(synthetic_footmask());
  const auto x = test::random_tensor({batch, kPoseInputDim}, 21);
  auto target = test::random_tensor({batch, kNumFeet, kGridRows, kGridCols}, 22, 0.5);
  for (double& v : target.storage()) v += 0.5;
  return [&m, mask, x, target](Graph& g) { return diff::masked_mse(g, forward(m, g, x, mask), target, mask); };
}

diff::GradCheckReport check(Model& m, std::size_t batch, Mode mode, double step, std::size_t coords) {
  diff::GradCheckOptions opt;
  opt.mode = mode;
  opt.step = step;
  opt.graph_seed = 17;
  opt.max_coords_per_param = coords;
  return diff::grad_check(m.params, mse_loss(m, batch), opt);
}

TEST(Models, PressNetSimpleEvalGradientsMatchFiniteDifferences) {
  Model m = micro_pns(0.3);
  const auto r = check(m, 4, Mode::kEval, 1e-3, 40);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
  EXPECT_GT(r.checked, 300u);
}

TEST(Models, PressNetEvalGradientsMatchFiniteDifferences) {
  Model m = micro_pn(0.3);
  const auto r = check(m, 3, Mode::kEval, 1e-3, 6);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
  EXPECT_GT(r.checked, 100u);
}

// Batch statistics and replayed dropout masks in the backward pass.
TEST(Models, PressNetSimpleTrainGradientsMatchFiniteDifferences) {
  Model m = micro_pns(0.3);
  const auto r = check(m, 4, Mode::kTrain, 1e-4, 24);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
  EXPECT_GT(r.checked, 100u);
}

TEST(Models, PressNetTrainGradientsMatchFiniteDifferences) {
  Model m = micro_pn(0.3);
  const auto r = check(m, 3, Mode::kTrain, 1e-3, 6);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
  EXPECT_GT(r.checked, 100u);
}

TEST(Training, PaperScheduleValues) {
  const auto pns = paper_train_config(Arch::kPressNetSimple);
  EXPECT_DOUBLE_EQ(diff::schedule_lr(pns.schedule, 0), 1e-4);
  EXPECT_DOUBLE_EQ(diff::schedule_lr(pns.schedule, 7), 2.5e-5);
  EXPECT_DOUBLE_EQ(diff::schedule_lr(pns.schedule, 14), 6.25e-6);
  EXPECT_EQ(pns.batch_size, 128u);
  const auto pn = paper_train_config(Arch::kPressNet);
  EXPECT_DOUBLE_EQ(diff::schedule_lr(pn.schedule, 10), 5e-5);
  EXPECT_EQ(pn.batch_size, 32u);
  EXPECT_EQ(pn.epochs, 35);
}

TEST(Training, ValidationUsesEvalMode) {
  const auto f = synthetic_samples(24);
  const std::vector<NormalizedSample> tr(f.samples.begin(), f.samples.begin() + 16);
  const std::vector<NormalizedSample> va(f.samples.begin() + 16, f.samples.end());
  Model m = micro_pns(0.5);
  TrainConfig cfg{1, 8, {1e-3, 1.0, 1}, 4, 0, 0.0};
  const auto r = train(m, tr, va, f.take.footmask, cfg);
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_DOUBLE_EQ(r.log[0].val_mse, evaluate_mse(m, va, f.take.footmask));
  EXPECT_EQ(r.steps, 2u);
}

TEST(Training, SeededRunsAreIdenticalAndLossDrops) {
  const auto f = synthetic_samples(32);
  TrainConfig cfg{30, 16, {3e-3, 1.0, 1}, 8, 0, 0.0};
  Model a = micro_pns(0.0), b = micro_pns(0.0);
  const auto ra = train(a, f.samples, {}, f.take.footmask, cfg);
  const auto rb = train(b, f.samples, {}, f.take.footmask, cfg);
  for (std::size_t k = 0; k < a.params.size(); ++k) EXPECT_EQ(a.params[k].value.storage(), b.params[k].value.storage());
  EXPECT_LT(ra.best_val_mse, ra.log.front().val_mse);
  EXPECT_EQ(ra.best_val_mse, rb.best_val_mse);
}

TEST(Training, StopsAtStepBudgetAndTarget) {
  const auto f = synthetic_samples(32);
  Model m = micro_pns(0.0);
  TrainConfig cfg{50, 8, {1e-3, 1.0, 1}, 1, 10, 0.0};
  EXPECT_EQ(train(m, f.samples, {}, f.take.footmask, cfg).steps, 10u);
  cfg.max_steps = 0;
  cfg.target_mse = 1e9;
  EXPECT_EQ(train(m, f.samples, {}, f.take.footmask, cfg).log.size(), 1u);
}

TEST(Training, RejectsDegenerateInputs) {
  const auto f = synthetic_samples(4);
  Model m = micro_pns();
  EXPECT_THROW(train(m, f.samples, {}, f.take.footmask, TrainConfig{1, 1, {}, 0, 0, 0.0}), UsageError);
  EXPECT_THROW(train(m, {f.samples[0]}, {}, f.take.footmask, TrainConfig{}), DataError);
}

TEST(Persistence, SaveLoadRoundTripReproducesPredictions) {
  const auto dir = test::scratch_dir("models_roundtrip");
  const FootMask fm = synthetic_footmask();
  const auto inputs = inputs_of(synthetic_samples(5).samples);
  for (Model m : {micro_pns(0.5), micro_pn(0.5)}) {
    const auto path = dir / (to_string(m.arch) + ".json");
    save_model(path, m, {{"seed", 3}});
    Model back = load_model(path);
    EXPECT_EQ(back.arch, m.arch);
    EXPECT_EQ(model_config_json(back), model_config_json(m));
    EXPECT_EQ(predict_normalized(back, inputs, fm), predict_normalized(m, inputs, fm));
  }
}

TEST(Persistence, RejectsMissingOrMismatchedWeights) {
  const auto dir = test::scratch_dir("models_bad");
  EXPECT_THROW(load_model(dir / "absent.json"), DataError);
  Model a = micro_pns();
  save_model(dir / "a.json", a);
  PnsConfig wider;
  wider.depth = 2;
  wider.width = 9;
  Model b = build_pressnet_simple(wider, 0);
  EXPECT_THROW(diff::load_weights(b.params, dir / "a.json"), DataError);
  EXPECT_THROW(build_model_from_config({{"arch", "pns"}}), DataError);
  EXPECT_THROW(build_model_from_config({{"arch", "cnn"}}), UsageError);
}

}  // namespace
}  // namespace press2dyn
