// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <map>
#include <sstream>
#include <string>

#include "septfa/signal/wav.hpp"
#include "test_util.hpp"

namespace septfa {
namespace {

namespace fs = std::filesystem;
using test::slurp;

// Runs the CLI inside `dir`; stdout+stderr go to <dir>/last_output.txt.
int run(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" SEPTFA_CLI_PATH "' " + args + " > last_output.txt 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void put(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

// Every regular file under `root`, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path().string());
  }
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = test::fresh_dir("septfa_cli");
    ASSERT_EQ(run(dir_, "synth-pool --out-dir pool --seed 4 --speakers-per-gender 3 --utterances 2 --min-sec 2 "
                        "--max-sec 3"),
              0);
    put(dir_ / "sim.json", R"({"speech_pool": "pool", "out_dir": "data", "seed": 9, "sample_rate": 8000,
      "sample_length": 2.0,
      "splits": [{"name": "train", "fraction": 0.67, "count": 2}, {"name": "test", "fraction": 0.33, "count": 1}]})");
    put(dir_ / "train.json", R"({"model": {"bottleneck": 16, "hidden": 32, "repeats": 1, "blocks": 2},
      "steps": 4, "batch_size": 2, "checkpoint_every": 2})");
    ASSERT_EQ(run(dir_, "simulate --config sim.json"), 0);
    ASSERT_EQ(run(dir_, "train --manifest data/train.jsonl --out-dir run --config train.json --seed 1"), 0);
  }
  static inline fs::path dir_;
};

TEST_F(CliTest, SimulateFileCensusAndRepeatability) {
  const auto first = snapshot(dir_ / "data");
  // 2 train rows + 1 test row, 4 files each, plus two manifests
  EXPECT_EQ(first.size(), 3u * 4u + 2u);
  std::ifstream m(dir_ / "data" / "train.jsonl");
  int rows = 0;
  for (std::string line; std::getline(m, line);) rows += !line.empty();
  EXPECT_EQ(rows, 2);
  ASSERT_EQ(run(dir_, "simulate --config sim.json --out-dir data2"), 0);
  const std::string census = slurp((dir_ / "last_output.txt").string());
  EXPECT_NE(census.find("train         2 mixtures    0.0011 h"), std::string::npos) << census;
  EXPECT_NE(census.find("0.0017 h"), std::string::npos) << census;
  const auto second = snapshot(dir_ / "data2");
  ASSERT_EQ(first.size(), second.size());
  for (const auto& [name, bytes] : first) EXPECT_EQ(second.at(name), bytes) << name;
}

TEST_F(CliTest, TrainIsRepeatableAndResumesWithoutGaps) {
  ASSERT_EQ(run(dir_, "train --manifest data/train.jsonl --out-dir run_b --config train.json --seed 1"), 0);
  EXPECT_EQ(slurp((dir_ / "run/train_log.jsonl").string()), slurp((dir_ / "run_b/train_log.jsonl").string()));
  EXPECT_EQ(slurp((dir_ / "run/checkpoint.bin").string()), slurp((dir_ / "run_b/checkpoint.bin").string()));

  // 4 steps, then continue to 6 from the checkpoint; compare with a straight 6-step run
  ASSERT_EQ(run(dir_, "train --manifest data/train.jsonl --out-dir run_b --resume run_b/checkpoint.json --steps 6"), 0);
  ASSERT_EQ(run(dir_, "train --manifest data/train.jsonl --out-dir run_c --config train.json --seed 1 --steps 6"), 0);
  const std::string log = slurp((dir_ / "run_b/train_log.jsonl").string());
  EXPECT_EQ(log, slurp((dir_ / "run_c/train_log.jsonl").string()));
  std::istringstream is(log);
  long expect = 1;
  for (std::string line; std::getline(is, line); ++expect) {
    EXPECT_EQ(nlohmann::json::parse(line).at("step").get<long>(), expect);
  }
  EXPECT_EQ(expect, 7);
}

TEST_F(CliTest, ZeroVadWeightDropsVadReporting) {
  ASSERT_EQ(run(dir_, "train --manifest data/train.jsonl --out-dir run_novad --config train.json --lambda-vad 0 "
                      "--steps 2"),
            0);
  std::ifstream in(dir_ / "run_novad" / "train_log.jsonl");
  int lines = 0;
  for (std::string line; std::getline(in, line); ++lines) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.at("vad_acc").is_null());
    EXPECT_EQ(j.at("lambda_vad").get<double>(), 0.0);
  }
  EXPECT_EQ(lines, 2);
}

TEST_F(CliTest, SeparateKeepsLengthAndRepeats) {
  const std::string in = "data/test/test_000000_mix.wav";
  ASSERT_EQ(run(dir_, "separate " + in + " --checkpoint run/checkpoint.json --out-dir sep_a --vad"), 0);
  ASSERT_EQ(run(dir_, "separate " + in + " --checkpoint run/checkpoint.json --out-dir sep_b --vad"), 0);
  const auto mix = wav::read((dir_ / in).string());
  for (const char* f : {"out_spk1.wav", "out_spk2.wav"}) {
    EXPECT_EQ(wav::read((dir_ / "sep_a" / f).string()).size(), mix.size());
  }
  EXPECT_EQ(snapshot(dir_ / "sep_a"), snapshot(dir_ / "sep_b"));
}

TEST_F(CliTest, StreamAndEvalRepeat) {
  const std::string in = "data/test/test_000000_mix.wav";
  for (const char* out : {"st_a", "st_b"}) {
    ASSERT_EQ(run(dir_, "stream " + in + " --checkpoint run/checkpoint.json --out-dir " + out +
                            " --segment-sec 1 --lookahead-sec 0.5 --chunk 160"),
              0);
  }
  EXPECT_EQ(snapshot(dir_ / "st_a"), snapshot(dir_ / "st_b"));
  EXPECT_TRUE(fs::exists(dir_ / "st_a" / "permutation_log.csv"));
  ASSERT_EQ(run(dir_, "separate " + in + " --checkpoint run/checkpoint.json --out-dir st_c --stream "
                          "--segment-sec 1 --lookahead-sec 0.5"),
            0);
  EXPECT_EQ(slurp((dir_ / "st_c/out_spk1.wav").string()), slurp((dir_ / "st_a/out_spk1.wav").string()));

  for (const char* fmt : {"csv", "jsonl"}) {
    for (const char* out : {"ev_a", "ev_b"}) {
      ASSERT_EQ(run(dir_, std::string("eval --manifest data/test.jsonl --checkpoint run/checkpoint.json --out-dir ") +
                              out + " --format " + fmt),
                0);
    }
    EXPECT_TRUE(fs::exists(dir_ / "ev_a" / (std::string("eval_rows.") + fmt)));
  }
  EXPECT_EQ(snapshot(dir_ / "ev_a"), snapshot(dir_ / "ev_b"));
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run(dir_, "--help"), 0);
  EXPECT_EQ(run(dir_, "no-such-command"), 2);
  EXPECT_EQ(run(dir_, "eval --manifest data/test.jsonl --checkpoint run/checkpoint.json --out-dir e --format xml"), 2);
  put(dir_ / "bad_sim.json", R"({"speech_pool": "pool", "out_dir": "x", "splits": []})");
  EXPECT_EQ(run(dir_, "simulate --config bad_sim.json"), 2);
  put(dir_ / "broken.json", "{not json");
  EXPECT_EQ(run(dir_, "simulate --config broken.json"), 2);
  EXPECT_EQ(run(dir_, "simulate --config missing.json"), 3);
  EXPECT_EQ(run(dir_, "separate missing.wav --checkpoint run/checkpoint.json --out-dir x"), 3);
  EXPECT_EQ(run(dir_, "separate data/test/test_000000_mix.wav --checkpoint missing.json --out-dir x"), 3);

  // sample-rate mismatch is a configuration error
  wav::write((dir_ / "rate16k.wav").string(), Waveform(std::vector<Real>(16000, 0.01), 16000));
  EXPECT_EQ(run(dir_, "separate rate16k.wav --checkpoint run/checkpoint.json --out-dir x"), 2);
  EXPECT_NE(slurp((dir_ / "last_output.txt").string()).find("sample rate"), std::string::npos);

  // a checkpoint full of NaNs is a numeric failure
  fs::create_directories(dir_ / "nan");
  fs::copy_file(dir_ / "run/checkpoint.json", dir_ / "nan/checkpoint.json", fs::copy_options::overwrite_existing);
  const auto blob_size = fs::file_size(dir_ / "run/checkpoint.bin");
  put(dir_ / "nan/checkpoint.bin", std::string(blob_size, '\xff'));
  EXPECT_EQ(run(dir_, "separate data/test/test_000000_mix.wav --checkpoint nan/checkpoint.json --out-dir x"), 4);
}

}  // namespace
}  // namespace septfa
