// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>

#include "kernel_checks.hpp"
#include "oracles.hpp"
#include "probes.hpp"
#include "septfa/eval/report.hpp"
#include "septfa/sim/dataset.hpp"
#include "septfa/sim/rir.hpp"
#include "septfa/sim/speech.hpp"
#include "septfa/train/gradcheck.hpp"
#include "test_util.hpp"
#include "toy_data.hpp"

namespace septfa {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& name, double budget_sec, const std::function<Outcome()>& f) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = f();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = sec < budget_sec;
  const bool pass = o.pass && in_time;
  failures += !pass;
  std::printf("%s  %-26s %s  [%.1f s / %.0f s%s]\n", pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), sec,
              budget_sec, in_time ? "" : ", over budget");
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome stft_round_trip() {
  Rng rng(2026);
  const StftConfig cfg;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 8192 + rng.index(80000 - 8192 + 1);
    const Waveform w = test::random_wave(n, rng, 8000);
    const Waveform y = istft(stft(w, cfg));
    if (y.size() != n) return {false, "length changed"};
    worst = std::max(worst, test::rel_l2(y.samples, w.samples, cfg.window_length, n - cfg.window_length));
  }
  return {worst <= 1e-6, fmt("max interior rel. L2 %.2e (<= 1e-6)", worst)};
}

Outcome gradient_suite() {
  double worst_kernel = 0.0;
  std::string worst_name;
  for (const auto& [name, err] : test::kernel_gradient_errors(77)) {
    if (err > worst_kernel) worst_kernel = err, worst_name = name;
  }
  // The clamped BCE has kinks at p = 1e-7 and 1 - 1e-7; the check point must
  // keep every VAD probability clear of them.
  double worst_model = 0.0, closest_clamp = 1.0;
  std::size_t checked = 0;
  for (auto v : {BlockVariant::kPlain, BlockVariant::kVadResidual}) {
    Separator m(test::tiny_config(v), 13);
    Rng rng(4);
    const TrainingExample ex = test::toy_example("g", rng, 8000, 8000);
    for (double p : m.separate(ex.mixture).vad.p) closest_clamp = std::min({closest_clamp, p, 1.0 - p});
    const GradCheckResult r = check_model_gradients(m, ex, 0.1, 6, 1);
    worst_model = std::max(worst_model, r.max_rel_error);
    checked += r.checked;
  }
  if (closest_clamp < 1e-5) return {false, fmt("check point lies on a BCE clamp kink (min distance %.1e)", closest_clamp)};
  const bool ok = worst_kernel <= 1e-4 && worst_model <= 1e-4;
  return {ok, fmt("kernels max %.1e, tiny model max %.1e over %.0f coords (<= 1e-4)", worst_kernel, worst_model,
                  static_cast<double>(checked)) +
                  " worst kernel " + worst_name};
}

Outcome receptive_field() {
  SeparatorConfig c = SeparatorConfig::full();
  c.bottleneck = 8;
  c.hidden = 16;
  Separator m(c, 5);
  test::saturate_attention(m);
  const int rf = test::probe_receptive_field(m, 301, 9);
  return {rf == 121, fmt("%.0f frames (expected %.0f)", rf, c.receptive_field())};
}

Outcome upit_equivalence() {
  Rng rng(99);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Waveform> refs{test::random_wave(400, rng, 8000), test::random_wave(400, rng, 8000)};
    std::vector<Waveform> ests{test::random_wave(400, rng, 8000), test::random_wave(400, rng, 8000)};
    const double leak = rng.uniform(0.0, 2.0);
    for (int i = 0; i < 2; ++i) {
      for (std::size_t t = 0; t < 400; ++t) ests[i].samples[t] += leak * refs[1 - i].samples[t] * rng.uniform();
    }
    double best = 0.0;
    const auto want = test::exhaustive(refs, ests, &best);
    const LossReport r = upit_loss(refs, ests);
    mismatches += r.chosen_permutation != want || r.separation != -best;
  }
  return {mismatches == 0, fmt("%.0f of 1000 instances differ from exhaustive search", mismatches)};
}

Outcome si_sdr_properties() {
  const double hand = si_sdr(std::vector<double>{1.0, 0.0}, std::vector<double>{1.0, 1.0});
  Rng rng(7);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    auto s = test::random_wave(2000, rng).samples;
    auto sh = test::random_wave(2000, rng).samples;
    for (std::size_t i = 0; i < s.size(); ++i) sh[i] += rng.uniform(0.2, 2.0) * s[i];
    const double base = si_sdr(s, sh);
    for (double c : {1e-3, 0.5, -3.0, 1e3}) {
      auto scaled = sh;
      for (double& v : scaled) v *= c;
      worst = std::max(worst, std::abs(si_sdr(s, scaled) - base));
    }
  }
  return {hand == 0.0 && worst <= 1e-9, fmt("[1,0] vs [1,1] -> %.3g dB; max scale deviation %.1e dB (<= 1e-9)", hand, worst)};
}

Outcome census() {
  SeparatorConfig vad = SeparatorConfig::full();
  vad.variant = BlockVariant::kVadResidual;
  const std::size_t plain_n = param_census(SeparatorConfig::full()), vad_n = param_census(vad);
  const std::size_t built = Separator(SeparatorConfig::full(), 0).params().census();
  const bool ok = plain_n == built && plain_n >= 4'500'000 && plain_n <= 6'500'000 && vad_n >= 4'500'000 &&
                  vad_n <= 6'500'000;
  return {ok, fmt("plain %.0f (built %.0f), vad_residual %.0f parameters; bounds [4.5M, 6.5M]",
                  static_cast<double>(plain_n), static_cast<double>(built), static_cast<double>(vad_n))};
}

// Schroeder backward integration with a least-squares line over [-5, -25] dB,
// written independently of the simulator.
double oracle_t60(const std::vector<double>& h, int fs) {
  std::vector<double> e(h.size());
  double acc = 0.0;
  for (std::size_t i = h.size(); i-- > 0;) e[i] = (acc += h[i] * h[i]);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  long n = 0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double db = 10.0 * std::log10(e[i] / e[0]);
    if (db > -5.0 || db < -25.0) continue;
    const double t = static_cast<double>(i) / fs;
    sx += t, sy += db, sxx += t * t, sxy += t * db, ++n;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return -60.0 / slope;
}

// First local peak of |h| reaching a quarter of the global peak.
std::size_t oracle_arrival(const std::vector<double>& h) {
  double peak = 0.0;
  for (double v : h) peak = std::max(peak, std::abs(v));
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double a = std::abs(h[i]);
    if (a < 0.25 * peak) continue;
    if (i + 1 < h.size() && std::abs(h[i + 1]) > a) continue;
    return i;
  }
  return h.size();
}

Outcome physics() {
  const int fs = 8000;
  Rng rng(4242);
  sim::SceneConstraints c;
  c.sample_length = 4.0;
  double worst_t60 = 0.0, worst_delay = 0.0, worst_snr = 0.0;
  int scenes = 0;
  for (; scenes < 20; ++scenes) {
    const sim::SceneSpec s = sim::sample_scene(rng, c);
    for (const auto& src : s.sources) {
      const Waveform h = sim::image_method_rir(s.room, src, s.mic, s.t60, fs);
      worst_t60 = std::max(worst_t60, std::abs(oracle_t60(h.samples, fs) / s.t60 - 1.0));
      const double expected = sim::distance(src, s.mic) / sim::kSpeedOfSound * fs;
      worst_delay = std::max(worst_delay, std::abs(static_cast<double>(oracle_arrival(h.samples)) - expected));
    }
    std::vector<Waveform> dry;
    dry.push_back(sim::synth_utterance(sim::make_talker("F", rng), 3.0, fs, rng));
    dry.push_back(sim::synth_utterance(sim::make_talker("M", rng), 3.5, fs, rng));
    const Waveform noise = test::random_wave(static_cast<std::size_t>(4 * fs), rng, fs, 0.2);
    const sim::MixtureSample m = sim::render_mixture(s, dry, noise, rng, fs);
    double ps = 0.0, pn = 0.0;
    for (std::size_t t = 0; t < m.mixture.size(); ++t) {
      const double speech = m.refs[0].samples[t] + m.refs[1].samples[t];
      const double rest = m.mixture.samples[t] - speech;
      ps += speech * speech;
      pn += rest * rest;
    }
    worst_snr = std::max(worst_snr, std::abs(10.0 * std::log10(ps / pn) - s.snr));
  }
  const bool ok = worst_t60 <= 0.2 && worst_delay <= 1.0 && worst_snr <= 0.01;
  return {ok, fmt("20 scenes: T60 max dev %.1f%% (<= 20%%), delay max %.2f samples (<= 1), SNR max dev %.4f dB (<= 0.01)",
                  100.0 * worst_t60, worst_delay, worst_snr)};
}

// ---------------------------------------------------------------------------
// Overfit run shared by the separation, VAD and streaming criteria.

struct OverfitSet {
  std::vector<sim::ManifestRecord> records;
  std::vector<TrainingExample> examples;
  std::unique_ptr<Separator> model;
  long steps = 0;
  bool trained = false;
};

OverfitSet& overfit() {
  static OverfitSet set;
  return set;
}

Outcome overfit_separation() {
  auto& o = overfit();
  const fs::path root = test::fresh_dir("septfa_acceptance_overfit");
  sim::SyntheticPoolSpec ps;
  ps.seed = 1;
  ps.min_seconds = 3.0;
  ps.max_seconds = 5.0;
  sim::write_synthetic_pool((root / "pool").string(), ps);
  sim::DatasetSpec d;
  d.count = 8;
  d.seed = 2;
  d.constraints.sample_length = 4.0;
  o.records = sim::build_dataset(sim::SpeechPool::scan((root / "pool").string()), {}, d, (root / "data").string());
  const StftConfig stft;
  for (const auto& r : o.records) {
    sim::LoadedSample s = sim::load_sample(r);
    o.examples.push_back(prepare_example(r.id, std::move(s.mixture), std::move(s.refs), std::move(s.labels), stft));
  }
  o.model = std::make_unique<Separator>(test::tiny_config(BlockVariant::kVadResidual), 1, stft);
  TrainSchedule sched;
  sched.steps = 2000;
  sched.batch_size = 8;
  sched.lambda_vad = 0.1;
  sched.seed = 3;
  sched.adam.learning_rate = 1e-3;
  Trainer trainer(*o.model, o.examples, sched);
  while (trainer.steps_done() < sched.steps) trainer.step();
  o.steps = trainer.steps_done();
  o.trained = true;
  double imp = 0.0;
  for (const auto& ex : o.examples) {
    const ExampleEval e = evaluate_example(*o.model, ex, 0.0, nullptr);
    imp += (e.si_sdri[0] + e.si_sdri[1]) / 2.0;
  }
  imp /= static_cast<double>(o.examples.size());
  return {imp >= 10.0 && o.steps <= 2000,
          fmt("mean SI-SDRi %.2f dB on 8 x 4 s mixtures after %.0f steps (>= 10 dB, <= 2000 steps)", imp,
              static_cast<double>(o.steps))};
}

std::vector<eval::EvalRow> overfit_rows(bool stream) {
  auto& o = overfit();
  if (!o.trained) throw StateError("overfit run did not complete");
  std::vector<eval::EvalRow> rows;
  eval::EvalOptions opt;
  opt.stream = stream;
  opt.stream_chunk = 160;
  for (std::size_t i = 0; i < o.examples.size(); ++i) {
    const auto& ex = o.examples[i];
    rows.push_back(eval::evaluate_sample(*o.model, eval::meta_from_record(o.records[i]), ex.mixture, ex.refs,
                                        ex.labels, opt));
  }
  return rows;
}

Outcome joint_vad() {
  const auto rows = overfit_rows(false);
  double emb = 0.0, energy = 0.0;
  for (const auto& r : rows) {
    emb += r.vad_accuracy;
    energy += r.energy_vad_accuracy;
  }
  emb /= static_cast<double>(rows.size());
  energy /= static_cast<double>(rows.size());
  return {emb >= 0.95 && emb >= energy,
          fmt("embedded accuracy %.3f (>= 0.95), energy VAD (T_a 0.3, T_s 0.25) %.3f", emb, energy)};
}

Outcome streaming_consistency() {
  const auto batch = overfit_rows(false);
  const auto streamed = overfit_rows(true);
  double worst = 0.0, mean = 0.0, bsum = 0.0, ssum = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (int k = 0; k < 2; ++k) {
      const double gap = std::abs(batch[i].output_si_sdr[k] - streamed[i].output_si_sdr[k]);
      worst = std::max(worst, gap);
      mean += gap;
      bsum += batch[i].output_si_sdr[k];
      ssum += streamed[i].output_si_sdr[k];
      ++n;
    }
  }
  return {worst <= 1.0, fmt("max per-channel gap %.3f dB (<= 1), mean gap %.3f dB", worst, mean / n) +
                            fmt("; batch %.2f dB vs online %.2f dB", bsum / n, ssum / n)};
}

// ---------------------------------------------------------------------------

int run_cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" SEPTFA_CLI_PATH "' " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = test::slurp(e.path().string());
  }
  return out;
}

Outcome cli_determinism() {
  std::vector<std::map<std::string, std::string>> runs;
  for (int k = 0; k < 2; ++k) {
    const fs::path d = test::fresh_dir("septfa_acceptance_cli_" + std::to_string(k));
    std::ofstream(d / "sim.json") << R"({"speech_pool": "pool", "out_dir": "data", "seed": 5, "sample_length": 2.0,
      "splits": [{"name": "train", "fraction": 0.6, "count": 2}, {"name": "test", "fraction": 0.4, "count": 2}]})";
    std::ofstream(d / "train.json") << R"({"model": {"bottleneck": 16, "hidden": 32, "repeats": 1, "blocks": 2},
      "steps": 5, "batch_size": 2, "checkpoint_every": 5})";
    const std::vector<std::string> cmds{
        "synth-pool --out-dir pool --seed 3 --speakers-per-gender 3 --utterances 2 --min-sec 2 --max-sec 3",
        "simulate --config sim.json",
        "train --manifest data/train.jsonl --out-dir run --config train.json --seed 4",
        "separate data/test/test_000000_mix.wav --checkpoint run/checkpoint.json --out-dir sep --vad --masks",
        "stream data/test/test_000000_mix.wav --checkpoint run/checkpoint.json --out-dir st --segment-sec 1 "
        "--lookahead-sec 0.5",
        "eval --manifest data/test.jsonl --checkpoint run/checkpoint.json --out-dir ev --format csv",
        "eval --manifest data/test.jsonl --checkpoint run/checkpoint.json --out-dir evj --format jsonl --stream "
        "--segment-sec 1 --lookahead-sec 0.5"};
    for (const auto& c : cmds) {
      if (const int code = run_cli(d, c); code != 0) return {false, "'" + c + "' exited with " + std::to_string(code)};
    }
    runs.push_back(snapshot(d));
  }
  int differ = 0;
  for (const auto& [name, bytes] : runs[0]) {
    auto it = runs[1].find(name);
    differ += it == runs[1].end() || it->second != bytes;
  }
  differ += static_cast<int>(runs[1].size() != runs[0].size());
  return {differ == 0, fmt("%.0f files compared across two runs of 6 commands, %.0f differ",
                           static_cast<double>(runs[0].size()), differ)};
}

}  // namespace
}  // namespace septfa

int main() {
  using namespace septfa;
  criterion("stft-round-trip", 10, stft_round_trip);
  criterion("gradient-suite", 120, gradient_suite);
  criterion("receptive-field", 30, receptive_field);
  criterion("upit-oracle", 10, upit_equivalence);
  criterion("si-sdr-properties", 1, si_sdr_properties);
  criterion("parameter-census", 1, census);
  criterion("simulator-physics", 120, physics);
  criterion("overfit-separation", 1800, overfit_separation);
  criterion("joint-vad", 120, joint_vad);
  criterion("streaming-consistency", 300, streaming_consistency);
  criterion("cli-determinism", 300, cli_determinism);
  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
