// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Command-line front end: simulate, train, separate, stream, eval, synth-pool.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "septfa/eval/report.hpp"
#include "septfa/separator/io.hpp"
#include "septfa/sim/dataset.hpp"
#include "septfa/sim/speech.hpp"
#include "septfa/stream/stream.hpp"
#include "septfa/train/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace septfa::cli {
namespace {

// Relative data paths resolve against $SEPTFA_DATA_ROOT when it is set.
std::string data_path(const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  const char* root = std::getenv("SEPTFA_DATA_ROOT");
  return root && *root ? (fs::path(root) / p).string() : p;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

void make_dir(const std::string& d) {
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw IoError("cannot create directory " + d + ": " + ec.message());
}

template <typename T>
T get(const json& j, const char* key, T fallback) {
  try {
    return j.value(key, fallback);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

std::array<double, 2> range(const json& j, const char* key, std::array<double, 2> fallback) {
  if (!j.contains(key)) return fallback;
  const auto v = get<std::vector<double>>(j, key, {});
  if (v.size() != 2) throw ConfigError(std::string("config key '") + key + "' must be [min, max]");
  return {v[0], v[1]};
}

SegmentPlan make_plan(double segment, double lookahead) {
  SegmentPlan p;
  p.segment_sec = segment;
  p.lookahead_sec = lookahead;
  return p;
}

Waveform read_input(const std::string& path, int model_rate) {
  Waveform w = wav::read(data_path(path));
  if (w.sample_rate != model_rate) {
    throw ConfigError(path + ": sample rate " + std::to_string(w.sample_rate) + " Hz does not match the model's " +
                      std::to_string(model_rate) + " Hz");
  }
  return w;
}

// ---------------------------------------------------------------------------
// synth-pool

struct SynthPoolArgs {
  std::string out_dir;
  std::uint64_t seed = 0;
  int speakers_per_gender = 4;
  int utterances = 3;
  int sample_rate = 8000;
  double min_seconds = 3.0, max_seconds = 6.0;
};

int cmd_synth_pool(const SynthPoolArgs& a) {
  sim::SyntheticPoolSpec s;
  s.speakers_per_gender = a.speakers_per_gender;
  s.utterances = a.utterances;
  s.sample_rate = a.sample_rate;
  s.min_seconds = a.min_seconds;
  s.max_seconds = a.max_seconds;
  s.seed = a.seed;
  if (s.speakers_per_gender < 1 || s.utterances < 1 || !(s.min_seconds > 0) || s.max_seconds < s.min_seconds) {
    throw ConfigError("synth-pool: bad pool size or duration range");
  }
  make_dir(a.out_dir);
  sim::write_synthetic_pool(a.out_dir, s);
  std::cout << "wrote " << 2 * s.speakers_per_gender << " speakers x " << s.utterances << " utterances to "
            << a.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// simulate
//
// {"speech_pool": dir, "noise_pool": dir (optional), "out_dir": dir,
//  "seed": n, "sample_rate": 8000, "sample_length": s, "format": "float32"|"pcm16",
//  "splits": [{"name": "train", "fraction": 0.8, "count": n}, ...],
//  "scene": {"t60": [lo, hi], "snr": [lo, hi], "overlaps": [...], ...}}

struct SimulateArgs {
  std::string config;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
};

sim::SceneConstraints constraints_from(const json& j, double sample_length) {
  sim::SceneConstraints c;
  c.length_xy = range(j, "length_xy", c.length_xy);
  c.height = range(j, "height", c.height);
  c.t60 = range(j, "t60", c.t60);
  c.snr = range(j, "snr", c.snr);
  c.overlaps = get(j, "overlaps", c.overlaps);
  c.wall_margin = get(j, "wall_margin", c.wall_margin);
  c.min_source_mic = get(j, "min_source_mic", c.min_source_mic);
  c.min_source_source = get(j, "min_source_source", c.min_source_source);
  c.sir = get(j, "sir", c.sir);
  c.max_draws = get(j, "max_draws", c.max_draws);
  c.sample_length = sample_length;
  c.validate();
  return c;
}

int cmd_simulate(const SimulateArgs& a) {
  const json cfg = read_json(a.config);
  const std::string pool_dir = data_path(get<std::string>(cfg, "speech_pool", ""));
  if (pool_dir.empty()) throw ConfigError("simulate: 'speech_pool' is required");
  const std::string noise_dir = data_path(get<std::string>(cfg, "noise_pool", ""));
  const std::string out_dir = a.out_dir ? *a.out_dir : get<std::string>(cfg, "out_dir", "");
  if (out_dir.empty()) throw ConfigError("simulate: no output directory (--out-dir or 'out_dir')");
  const std::uint64_t seed = a.seed ? *a.seed : get<std::uint64_t>(cfg, "seed", 0);
  const int fs_hz = get(cfg, "sample_rate", 8000);
  const double length = get(cfg, "sample_length", 10.0);
  const std::string format = get<std::string>(cfg, "format", "float32");
  if (format != "float32" && format != "pcm16") throw ConfigError("simulate: format must be float32 or pcm16");
  const auto constraints = constraints_from(cfg.value("scene", json::object()), length);
  if (!cfg.contains("splits") || !cfg["splits"].is_array() || cfg["splits"].empty()) {
    throw ConfigError("simulate: 'splits' must be a non-empty list");
  }
  std::vector<std::pair<std::string, double>> fractions;
  std::vector<int> counts;
  for (const auto& s : cfg["splits"]) {
    fractions.emplace_back(get<std::string>(s, "name", ""), get(s, "fraction", 0.0));
    counts.push_back(get(s, "count", 0));
    if (fractions.back().first.empty()) throw ConfigError("simulate: every split needs a name");
    if (counts.back() < 0) throw ConfigError("simulate: negative count");
  }

  const sim::SpeechPool pool = sim::SpeechPool::scan(pool_dir);
  const std::vector<std::string> noise = noise_dir.empty() ? std::vector<std::string>{} : sim::scan_noise(noise_dir);
  const auto splits = sim::assign_splits(pool, fractions, seed);
  make_dir(out_dir);
  double total_hours = 0.0;
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    sim::DatasetSpec spec;
    spec.split = fractions[k].first;
    spec.count = counts[k];
    spec.sample_rate = fs_hz;
    spec.seed = derive_seed(seed, k + 1);
    spec.constraints = constraints;
    spec.format = format == "pcm16" ? wav::SampleFormat::kPcm16 : wav::SampleFormat::kFloat32;
    const auto recs = sim::build_dataset(pool.subset(splits.at(spec.split)), noise, spec, out_dir);
    const double hours = static_cast<double>(recs.size()) * length / 3600.0;
    total_hours += hours;
    std::printf("%-8s %6zu mixtures %9.4f h  (%zu speakers)\n", spec.split.c_str(), recs.size(), hours,
                splits.at(spec.split).size());
  }
  std::printf("%-8s %6s          %9.4f h\n", "total", "", total_hours);
  return 0;
}

// ---------------------------------------------------------------------------
// train
//
// Config file (all keys optional):
// {"model": {separator keys}, "stft": {...}, "steps": n, "batch_size": n,
//  "learning_rate": x, "clip_norm": x, "crop_seconds": x, "checkpoint_every": n,
//  "threads": n}

struct TrainArgs {
  std::string manifest;
  std::string out_dir;
  std::optional<std::string> config;
  std::optional<std::string> variant;
  std::optional<double> lambda_vad;
  std::optional<long> steps;
  std::uint64_t seed = 0;
  std::optional<std::string> resume;
  int threads = 0;
};

std::vector<TrainingExample> load_training_set(const std::string& manifest, const StftConfig& stft, int& rate) {
  const auto recs = sim::read_manifest(data_path(manifest));
  if (recs.empty()) throw ConfigError("train: manifest " + manifest + " has no rows");
  rate = recs[0].sample_rate;
  std::vector<TrainingExample> out;
  for (const auto& r : recs) {
    if (r.sample_rate != rate) throw ConfigError("train: mixed sample rates in " + manifest);
    sim::LoadedSample s = sim::load_sample(r);
    out.push_back(prepare_example(r.id, std::move(s.mixture), std::move(s.refs), std::move(s.labels), stft));
  }
  return out;
}

// Drops log lines past `step` so a resumed run continues the log without gaps or repeats.
void truncate_log(const std::string& path, long step) {
  std::ifstream in(path);
  if (!in) return;
  std::string line, kept;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      if (json::parse(line).at("step").get<long>() > step) break;
    } catch (const json::exception&) {
      throw IoError(path + ": unreadable log line");
    }
    kept += line + "\n";
  }
  in.close();
  write_text(path, kept);
}

int cmd_train(const TrainArgs& a) {
  make_dir(a.out_dir);
  const std::string ckpt = (fs::path(a.out_dir) / "checkpoint.json").string();
  const std::string log_path = (fs::path(a.out_dir) / "train_log.jsonl").string();
  const std::string saved_cfg = (fs::path(a.out_dir) / "train_config.json").string();

  json cfg = json::object();
  if (a.config) {
    cfg = read_json(*a.config);
  } else if (a.resume && fs::exists(fs::path(*a.resume).parent_path() / "train_config.json")) {
    cfg = read_json((fs::path(*a.resume).parent_path() / "train_config.json").string());
  }
  // flags override the file; the effective settings are stored next to the checkpoint
  if (a.variant) cfg["model"]["variant"] = *a.variant;
  if (!cfg.contains("model") || !cfg["model"].contains("variant")) cfg["model"]["variant"] = "vad";
  if (a.lambda_vad) cfg["lambda_vad"] = *a.lambda_vad;
  if (a.steps) cfg["steps"] = *a.steps;
  if (!cfg.contains("seed") || !a.resume) cfg["seed"] = a.seed;

  TrainSchedule sched;
  sched.steps = get(cfg, "steps", 1000L);
  sched.batch_size = get(cfg, "batch_size", 16);
  sched.lambda_vad = get(cfg, "lambda_vad", 0.1);
  sched.adam.learning_rate = get(cfg, "learning_rate", sched.adam.learning_rate);
  sched.adam.clip_norm = get(cfg, "clip_norm", sched.adam.clip_norm);
  sched.crop_seconds = get(cfg, "crop_seconds", 0.0);
  sched.threads = a.threads ? a.threads : get(cfg, "threads", 0);
  sched.seed = get<std::uint64_t>(cfg, "seed", 0);
  const long every = get(cfg, "checkpoint_every", 100L);
  if (sched.steps < 0 || every < 1) throw ConfigError("train: steps must be >= 0 and checkpoint_every >= 1");
  if (!(sched.lambda_vad >= 0.0)) throw ConfigError("train: lambda_vad must be >= 0");

  std::unique_ptr<Separator> model;
  std::optional<nn::CheckpointData> resume_data;
  if (a.resume) {
    LoadedModel lm = load_model(*a.resume);
    model = std::move(lm.model);
    resume_data = std::move(lm.data);
  } else {
    const StftConfig stft = cfg.contains("stft") ? stft_config_from_json(cfg["stft"]) : StftConfig{};
    model = std::make_unique<Separator>(separator_config_from_json(cfg["model"]), sched.seed, stft);
  }
  int rate = 0;
  auto data = load_training_set(a.manifest, model->stft_config(), rate);
  if (resume_data && resume_data->config.value("sample_rate", rate) != rate) {
    throw ConfigError("train: checkpoint sample rate differs from the manifest");
  }
  write_text(saved_cfg, cfg.dump(2) + "\n");

  Trainer trainer(*model, std::move(data), sched);
  if (resume_data) {
    trainer.resume(*resume_data);
    truncate_log(log_path, trainer.steps_done());
  } else {
    write_text(log_path, "");
  }
  std::ofstream log(log_path, std::ios::app | std::ios::binary);
  if (!log) throw IoError("cannot open " + log_path);
  while (trainer.steps_done() < sched.steps) {
    const StepLog s = trainer.step();
    if (!std::isfinite(s.loss)) throw NumericError("train: non-finite loss at step " + std::to_string(s.step));
    log << s.to_json().dump() << "\n";
    log.flush();
    if (s.step % every == 0 || s.step == sched.steps) {
      trainer.save_checkpoint(ckpt, rate);
      std::printf("step %6ld  epoch %4ld  loss %9.4f  SI-SDRi %7.3f dB\n", s.step, s.epoch, s.loss, s.si_sdri);
      std::fflush(stdout);
    }
  }
  if (sched.steps == 0 || (resume_data && trainer.steps_done() == resume_data->extra.value("step", -1L))) {
    trainer.save_checkpoint(ckpt, rate);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// separate / stream

struct SeparateArgs {
  std::string input;
  std::string checkpoint;
  std::string out_dir;
  bool stream = false;
  double segment_sec = 3.0;
  double lookahead_sec = 1.0;
  std::size_t chunk = 160;
  bool write_vad = false;
  bool write_masks = false;
};

std::string mask_csv(const FeatureGrid& m) {
  std::ostringstream os;
  char buf[32];
  for (int k = 0; k < m.channels; ++k) {
    for (int l = 0; l < m.frames; ++l) {
      std::snprintf(buf, sizeof buf, "%s%.9g", l ? "," : "", m.at(k, l));
      os << buf;
    }
    os << "\n";
  }
  return os.str();
}

int cmd_separate(const SeparateArgs& a) {
  LoadedModel lm = load_model(a.checkpoint);
  const Waveform mix = read_input(a.input, lm.sample_rate);
  make_dir(a.out_dir);
  const fs::path out(a.out_dir);
  std::vector<Waveform> est;
  if (a.stream) {
    std::vector<PermutationEvent> events;
    est = stream_separate(*lm.model, mix, make_plan(a.segment_sec, a.lookahead_sec), a.chunk, &events);
    std::string text = "window,start_sample,perm,switched\n";
    for (const auto& e : events) {
      text += std::to_string(e.window) + "," + std::to_string(e.sample) + "," + std::to_string(e.perm[0]) + ";" +
              std::to_string(e.perm[1]) + "," + (e.switched ? "1" : "0") + "\n";
    }
    write_text((out / "permutation_log.csv").string(), text);
  }
  if (!a.stream || a.write_vad || a.write_masks) {
    SeparationResult r = lm.model->separate(mix);
    if (!a.stream) est = r.estimates;
    if (a.write_vad) write_labels((out / "vad.csv").string(), hard_decision(r.vad));
    if (a.write_masks) {
      for (std::size_t i = 0; i < r.masks.masks.size(); ++i) {
        write_text((out / ("mask_spk" + std::to_string(i + 1) + ".csv")).string(), mask_csv(r.masks.masks[i]));
      }
    }
  }
  for (std::size_t i = 0; i < est.size(); ++i) {
    for (double v : est[i].samples) {
      if (!std::isfinite(v)) throw NumericError("separate: non-finite output sample");
    }
    wav::write((out / ("out_spk" + std::to_string(i + 1) + ".wav")).string(), est[i]);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string manifest;
  std::string checkpoint;
  std::string out_dir;
  std::string format = "csv";
  bool stream = false;
  double segment_sec = 3.0;
  double lookahead_sec = 1.0;
  int threads = 0;
};

int cmd_eval(const EvalArgs& a) {
  const auto fmt = eval::parse_format(a.format);
  LoadedModel lm = load_model(a.checkpoint);
  const auto recs = sim::read_manifest(data_path(a.manifest));
  for (const auto& r : recs) {
    if (r.sample_rate != lm.sample_rate) {
      throw ConfigError("eval: row " + r.id + " is at " + std::to_string(r.sample_rate) + " Hz, model expects " +
                        std::to_string(lm.sample_rate) + " Hz");
    }
  }
  eval::EvalOptions opt;
  opt.stream = a.stream;
  opt.plan = make_plan(a.segment_sec, a.lookahead_sec);
  opt.threads = a.threads;
  const auto rows = eval::evaluate_manifest(*lm.model, recs, opt);
  const auto stats = eval::aggregate(rows);
  make_dir(a.out_dir);
  const auto [rp, sp] = eval::write_report(a.out_dir, rows, stats, fmt);
  std::cout << eval::format_table(stats) << "rows: " << rp << "\nsummary: " << sp << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

int run(int argc, char** argv) {
  CLI::App app{"septfa: time-frequency attention speech separation with embedded VAD"};
  app.require_subcommand(1);

  SynthPoolArgs pool;
  auto* c_pool = app.add_subcommand("synth-pool", "write a synthetic speech pool (for smoke tests)");
  c_pool->add_option("--out-dir", pool.out_dir, "pool directory")->required();
  c_pool->add_option("--seed", pool.seed, "random seed");
  c_pool->add_option("--speakers-per-gender", pool.speakers_per_gender);
  c_pool->add_option("--utterances", pool.utterances, "utterances per speaker");
  c_pool->add_option("--sample-rate", pool.sample_rate);
  c_pool->add_option("--min-sec", pool.min_seconds);
  c_pool->add_option("--max-sec", pool.max_seconds);

  SimulateArgs sim_args;
  auto* c_sim = app.add_subcommand("simulate", "render a reverberant two-talker dataset");
  c_sim->add_option("--config", sim_args.config, "JSON dataset config")->required();
  c_sim->add_option("--out-dir", sim_args.out_dir, "overrides 'out_dir'");
  c_sim->add_option("--seed", sim_args.seed, "overrides 'seed'");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "train a separator on a manifest");
  c_train->add_option("--manifest", tr.manifest, "training manifest (.jsonl)")->required();
  c_train->add_option("--out-dir", tr.out_dir, "checkpoint and log directory")->required();
  c_train->add_option("--config", tr.config, "JSON training config");
  c_train->add_option("--variant", tr.variant, "block variant")->check(CLI::IsMember({"plain", "vad"}));
  c_train->add_option("--lambda-vad", tr.lambda_vad, "VAD loss weight (0 disables the VAD term)");
  c_train->add_option("--steps", tr.steps, "total optimizer steps");
  c_train->add_option("--seed", tr.seed, "initialization and sampling seed");
  c_train->add_option("--resume", tr.resume, "checkpoint to continue from");
  c_train->add_option("--threads", tr.threads, "worker threads (0: all cores)");

  SeparateArgs sep;
  auto* c_sep = app.add_subcommand("separate", "separate one mixture");
  c_sep->add_option("input", sep.input, "mixture WAV")->required();
  c_sep->add_option("--checkpoint", sep.checkpoint)->required();
  c_sep->add_option("--out-dir", sep.out_dir)->required();
  c_sep->add_flag("--stream", sep.stream, "sliding-window online mode");
  c_sep->add_option("--segment-sec", sep.segment_sec);
  c_sep->add_option("--lookahead-sec", sep.lookahead_sec);
  c_sep->add_flag("--vad", sep.write_vad, "write vad.csv");
  c_sep->add_flag("--masks", sep.write_masks, "write mask_spk*.csv");

  SeparateArgs st;
  st.stream = true;
  auto* c_stream = app.add_subcommand("stream", "online separation with simulated real-time chunks");
  c_stream->add_option("input", st.input, "mixture WAV")->required();
  c_stream->add_option("--checkpoint", st.checkpoint)->required();
  c_stream->add_option("--out-dir", st.out_dir)->required();
  c_stream->add_option("--segment-sec", st.segment_sec);
  c_stream->add_option("--lookahead-sec", st.lookahead_sec);
  c_stream->add_option("--chunk", st.chunk, "samples per pushed chunk")->check(CLI::PositiveNumber);

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "score a checkpoint on a manifest");
  c_eval->add_option("--manifest", ev.manifest)->required();
  c_eval->add_option("--checkpoint", ev.checkpoint)->required();
  c_eval->add_option("--out-dir", ev.out_dir)->required();
  c_eval->add_option("--format", ev.format)->check(CLI::IsMember({"csv", "jsonl"}));
  c_eval->add_flag("--stream", ev.stream, "score online-mode output");
  c_eval->add_option("--segment-sec", ev.segment_sec);
  c_eval->add_option("--lookahead-sec", ev.lookahead_sec);
  c_eval->add_option("--threads", ev.threads, "worker threads (0: all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code_for(ErrorKind::kConfig);
  }

  try {
    if (*c_pool) return cmd_synth_pool(pool);
    if (*c_sim) return cmd_simulate(sim_args);
    if (*c_train) return cmd_train(tr);
    if (*c_sep) return cmd_separate(sep);
    if (*c_stream) return cmd_separate(st);
    if (*c_eval) return cmd_eval(ev);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(ErrorKind::kNumeric);
  }
  return 0;
}

}  // namespace
}  // namespace septfa::cli

int main(int argc, char** argv) { return septfa::cli::run(argc, argv); }
