// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <filesystem>

#include "septfa/train/trainer.hpp"
#include "toy_data.hpp"

namespace septfa {
namespace {

std::vector<TrainingExample> toy_set(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TrainingExample> out;
  for (int i = 0; i < n; ++i) out.push_back(test::toy_example("ex" + std::to_string(i), rng));
  return out;
}

TrainSchedule small_schedule() {
  TrainSchedule s;
  s.batch_size = 2;
  s.seed = 3;
  s.threads = 1;
  return s;
}

TEST(Trainer, LossFallsOnATinySet) {
  Separator m(test::tiny_config(), 1);
  TrainSchedule s = small_schedule();
  s.adam.learning_rate = 3e-3;
  Trainer tr(m, toy_set(2, 1), s);
  const double first = tr.step().loss;
  double last = first;
  for (int i = 0; i < 30; ++i) last = tr.step().loss;
  EXPECT_LT(last, first - 1.0);
  EXPECT_EQ(tr.steps_done(), 31);
}

TEST(Trainer, LogRecordCarriesEveryField) {
  Separator m(test::tiny_config(), 1);
  Trainer tr(m, toy_set(3, 2), small_schedule());
  StepLog a = tr.step(), b = tr.step();
  EXPECT_EQ(a.epoch, 0);
  EXPECT_EQ(b.epoch, 1);  // three examples, batch two: second step wraps
  nlohmann::json j = a.to_json();
  for (auto k : {"step", "epoch", "loss", "si_sdri", "vad_acc", "lambda_vad", "lr", "grad_norm_preclip"}) {
    EXPECT_TRUE(j.contains(k)) << k;
  }
  EXPECT_TRUE(j["vad_acc"].is_number());
  EXPECT_DOUBLE_EQ(j["lambda_vad"].get<double>(), 0.1);
}

TEST(Trainer, ThreadCountDoesNotChangeResults) {
  Separator a(test::tiny_config(), 4), b(test::tiny_config(), 4);
  TrainSchedule s1 = small_schedule(), s2 = small_schedule();
  s2.threads = 2;
  Trainer ta(a, toy_set(4, 3), s1), tb(b, toy_set(4, 3), s2);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(ta.step().loss, tb.step().loss);
  }
  for (std::size_t i = 0; i < a.params().count(); ++i) {
    EXPECT_EQ(a.params().values(static_cast<int>(i)), b.params().values(static_cast<int>(i)));
  }
}

TEST(Trainer, ZeroLambdaLeavesVadHeadUntouched) {
  Separator m(test::tiny_config(), 5);
  const auto before = m.params().values(m.params().find("vad.conv1.w"));
  TrainSchedule s = small_schedule();
  s.lambda_vad = 0.0;
  Trainer tr(m, toy_set(2, 4), s);
  StepLog log = tr.step();
  EXPECT_TRUE(std::isnan(log.vad_accuracy));
  EXPECT_TRUE(log.to_json()["vad_acc"].is_null());
  EXPECT_EQ(m.params().values(m.params().find("vad.conv1.w")), before);
  EXPECT_NE(m.params().values(m.params().find("input.w")),
            Separator(test::tiny_config(), 5).params().values(m.params().find("input.w")));
}

TEST(Trainer, ResumeIsBitExact) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "septfa_resume";
  fs::create_directories(dir);
  const std::string ckpt = (dir / "ck.json").string();
  TrainSchedule s = small_schedule();
  s.crop_seconds = 0.5;

  Separator full(test::tiny_config(), 6);
  Trainer tf(full, toy_set(3, 5), s);
  std::vector<double> losses;
  for (int i = 0; i < 5; ++i) {
    losses.push_back(tf.step().loss);
    if (i == 1) tf.save_checkpoint(ckpt, 8000);
  }

  LoadedModel lm = load_model(ckpt);
  Trainer tr(*lm.model, toy_set(3, 5), s);
  tr.resume(lm.data);
  EXPECT_EQ(tr.steps_done(), 2);
  for (int i = 2; i < 5; ++i) EXPECT_EQ(tr.step().loss, losses[i]) << i;
  for (std::size_t i = 0; i < full.params().count(); ++i) {
    EXPECT_EQ(lm.model->params().values(static_cast<int>(i)), full.params().values(static_cast<int>(i)));
  }
}

TEST(Trainer, RejectsBadSetup) {
  Separator m(test::tiny_config(), 1);
  EXPECT_THROW(Trainer(m, {}, small_schedule()), ConfigError);
  TrainSchedule s = small_schedule();
  s.batch_size = 0;
  EXPECT_THROW(Trainer(m, toy_set(1, 1), s), ConfigError);
  Trainer tr(m, toy_set(1, 1), small_schedule());
  nn::CheckpointData bare;
  EXPECT_THROW(tr.resume(bare), ConfigError);
}

TEST(CropExample, KeepsLabelsAligned) {
  Rng rng(9);
  TrainingExample ex = test::toy_example("c", rng, 16000);
  TrainingExample c = crop_example(ex, 256 * 10, 4096, StftConfig{});
  EXPECT_EQ(c.mixture.size(), 4096u);
  EXPECT_EQ(c.labels.frames, StftConfig{}.frames_for(4096));
  for (int l = 0; l < c.labels.frames; ++l) EXPECT_EQ(c.labels.at(0, l), ex.labels.at(0, 10 + l));
}

}  // namespace
}  // namespace septfa
