// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "septfa/core/rng.hpp"
#include "septfa/signal/wav.hpp"
#include "septfa/sim/mixer.hpp"
#include "septfa/sim/scene.hpp"

namespace septfa::sim {

struct Speaker {
  std::string id;
  std::string gender = "U";
  std::vector<std::string> utterances;  // absolute paths, sorted
};

/// Speech pool: one directory per speaker holding WAVs, plus an optional
/// speakers.csv (speaker_id,gender).
struct SpeechPool {
  std::vector<Speaker> speakers;  // sorted by id

  static SpeechPool scan(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("speech pool not found: " + dir);
    std::map<std::string, std::string> genders;
    const fs::path table = fs::path(dir) / "speakers.csv";
    if (fs::exists(table)) {
      std::ifstream in(table);
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        genders[line.substr(0, comma)] = line.substr(comma + 1);
      }
    }
    SpeechPool pool;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_directory()) continue;
      Speaker s;
      s.id = entry.path().filename().string();
      if (auto it = genders.find(s.id); it != genders.end()) s.gender = it->second;
      for (const auto& f : fs::directory_iterator(entry.path())) {
        if (f.is_regular_file() && f.path().extension() == ".wav") s.utterances.push_back(fs::absolute(f.path()).string());
      }
      std::sort(s.utterances.begin(), s.utterances.end());
      if (!s.utterances.empty()) pool.speakers.push_back(std::move(s));
    }
    std::sort(pool.speakers.begin(), pool.speakers.end(), [](const Speaker& a, const Speaker& b) { return a.id < b.id; });
    return pool;
  }

  SpeechPool subset(const std::set<std::string>& ids) const {
    SpeechPool p;
    for (const auto& s : speakers) {
      if (ids.count(s.id)) p.speakers.push_back(s);
    }
    return p;
  }
};

/// Plain list of noise WAVs (sorted); empty means synthetic babble.
inline std::vector<std::string> scan_noise(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("noise pool not found: " + dir);
  std::vector<std::string> out;
  for (const auto& f : fs::recursive_directory_iterator(dir)) {
    if (f.is_regular_file() && f.path().extension() == ".wav") out.push_back(fs::absolute(f.path()).string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Speaker-disjoint split assignment. Speakers are shuffled with `seed` and
/// cut by the given fractions, in the given order; the last split takes the
/// remainder.
inline std::map<std::string, std::set<std::string>> assign_splits(
    const SpeechPool& pool, const std::vector<std::pair<std::string, double>>& fractions, std::uint64_t seed) {
  if (fractions.empty()) throw ConfigError("assign_splits: no splits");
  std::vector<std::string> ids;
  for (const auto& s : pool.speakers) ids.push_back(s.id);
  Rng rng(seed);
  shuffle(ids, rng);
  std::map<std::string, std::set<std::string>> out;
  double total = 0.0;
  for (const auto& f : fractions) {
    if (f.second < 0.0) throw ConfigError("assign_splits: negative fraction for " + f.first);
    total += f.second;
  }
  if (!(total > 0.0)) throw ConfigError("assign_splits: fractions sum to zero");
  std::size_t start = 0;
  double acc = 0.0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    acc += fractions[i].second / total;
    const std::size_t end = i + 1 == fractions.size() ? ids.size() : static_cast<std::size_t>(std::llround(acc * ids.size()));
    auto& dst = out[fractions[i].first];
    for (std::size_t k = start; k < std::max(start, end); ++k) dst.insert(ids[k]);
    start = std::max(start, end);
  }
  return out;
}

struct DatasetSpec {
  std::string split = "train";
  int count = 0;
  int sample_rate = 8000;
  std::uint64_t seed = 0;
  SceneConstraints constraints;
  wav::SampleFormat format = wav::SampleFormat::kFloat32;
  int babble_talkers = 6;
};

/// One manifest row.
struct ManifestRecord {
  std::string id;
  std::string split;
  std::string mixture_path;
  std::vector<std::string> ref_paths;
  std::string label_path;
  int sample_rate = 8000;
  SceneSpec scene;
  std::vector<std::string> speaker_ids;
  std::vector<std::string> genders;
  std::vector<double> distances;
  std::vector<std::string> source_paths;
  MixRecipe recipe;

  nlohmann::json to_json() const {
    nlohmann::json j = sim::to_json(scene);
    j["id"] = id;
    j["split"] = split;
    j["mixture_path"] = mixture_path;
    j["ref_paths"] = ref_paths;
    j["label_path"] = label_path;
    j["sample_rate"] = sample_rate;
    j["speaker_ids"] = speaker_ids;
    j["genders"] = genders;
    j["distances"] = distances;
    j["critical_distance"] = critical_distance(scene.room, scene.t60);
    j["source_paths"] = source_paths;
    j["mix"] = sim::to_json(recipe);
    return j;
  }

  static ManifestRecord from_json(const nlohmann::json& j) {
    ManifestRecord r;
    try {
      r.id = j.at("id");
      r.split = j.value("split", std::string());
      r.mixture_path = j.at("mixture_path");
      r.ref_paths = j.at("ref_paths").get<std::vector<std::string>>();
      r.label_path = j.at("label_path");
      r.sample_rate = j.at("sample_rate");
      r.scene = scene_from_json(j);
      r.speaker_ids = j.value("speaker_ids", std::vector<std::string>{});
      r.genders = j.value("genders", std::vector<std::string>{});
      r.distances = j.value("distances", std::vector<double>{});
      r.source_paths = j.value("source_paths", std::vector<std::string>{});
      if (j.contains("mix")) r.recipe = recipe_from_json(j.at("mix"));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("bad manifest record: ") + e.what());
    }
    return r;
  }
};

/// Reads a line-delimited manifest; relative paths resolve against its directory.
inline std::vector<ManifestRecord> read_manifest(const std::string& path) {
  namespace fs = std::filesystem;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && fs::path(p).is_relative()) p = (base / p).string();
  };
  std::vector<ManifestRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    ManifestRecord r = ManifestRecord::from_json(j);
    resolve(r.mixture_path);
    resolve(r.label_path);
    for (auto& p : r.ref_paths) resolve(p);
    for (auto& p : r.source_paths) resolve(p);
    for (auto& c : r.recipe.noise) resolve(c.path);
    out.push_back(std::move(r));
  }
  return out;
}

/// Audio and labels of one record.
struct LoadedSample {
  Waveform mixture;
  std::vector<Waveform> refs;
  VadLabels labels;
};

inline LoadedSample load_sample(const ManifestRecord& r) {
  auto read = [&](const std::string& p, const char* what) {
    try {
      return wav::read(p, r.sample_rate);
    } catch (const IoError& e) {
      throw IoError("record " + r.id + ": " + what + ": " + e.what());
    }
  };
  LoadedSample s;
  s.mixture = read(r.mixture_path, "mixture");
  for (const auto& p : r.ref_paths) s.refs.push_back(read(p, "reference"));
  try {
    s.labels = read_labels(r.label_path);
  } catch (const IoError& e) {
    throw IoError("record " + r.id + ": labels: " + e.what());
  }
  return s;
}

namespace detail {

inline Waveform read_source(const std::string& path, int fs) {
  try {
    return wav::read(path, fs);
  } catch (const IoError& e) {
    throw IoError(std::string("cannot ingest ") + path + ": " + e.what());
  }
}

inline Waveform noise_bed_for(const std::vector<NoiseComponent>& parts, std::size_t n, int fs) {
  std::vector<Waveform> src;
  for (const auto& c : parts) src.push_back(read_source(c.path, fs));
  return assemble_noise(src, parts, n, fs);
}

}  // namespace detail

/// Redoes the mix of a record from its dry sources and stored recipe.
inline MixtureSample rerender(const ManifestRecord& r) {
  std::vector<Waveform> dry;
  for (const auto& p : r.source_paths) dry.push_back(detail::read_source(p, r.sample_rate));
  const std::size_t n = static_cast<std::size_t>(std::llround(r.scene.sample_length * r.sample_rate));
  const Waveform bed = r.recipe.noise.empty() ? Waveform(n, r.sample_rate)
                                              : detail::noise_bed_for(r.recipe.noise, n, r.sample_rate);
  return mix_with_recipe(r.scene, dry, bed, r.recipe, r.sample_rate);
}

/// Generates `spec.count` mixtures into <out_dir>/<split>/ and writes
/// <out_dir>/<split>.jsonl (paths relative to out_dir). Row i draws from
/// Rng(derive_seed(seed, i)) only, so rows are independent of each other.
/// The returned records carry resolved paths.
inline std::vector<ManifestRecord> build_dataset(const SpeechPool& pool, const std::vector<std::string>& noise_files,
                                                 const DatasetSpec& spec, const std::string& out_dir) {
  namespace fs = std::filesystem;
  if (spec.count < 0) throw ConfigError("build_dataset: negative count");
  spec.constraints.validate();
  if (spec.count > 0 && pool.speakers.size() < 2) throw ConfigError("build_dataset: need at least two speakers in split " + spec.split);
  const fs::path root(out_dir);
  fs::create_directories(root);
  const std::string manifest = (root / (spec.split + ".jsonl")).string();
  std::vector<ManifestRecord> records;
  const int fs_hz = spec.sample_rate;
  for (int i = 0; i < spec.count; ++i) {
    const std::uint64_t row_seed = derive_seed(spec.seed, static_cast<std::uint64_t>(i));
    Rng rng(row_seed);
    SceneSpec scene = sample_scene(rng, spec.constraints);
    scene.seed = row_seed;
    const std::size_t n = static_cast<std::size_t>(std::llround(scene.sample_length * fs_hz));

    const std::size_t a = rng.index(pool.speakers.size());
    std::size_t b = rng.index(pool.speakers.size() - 1);
    if (b >= a) ++b;
    const Speaker* spk[2] = {&pool.speakers[a], &pool.speakers[b]};
    ManifestRecord rec;
    std::vector<Waveform> dry;
    for (const Speaker* s : spk) {
      rec.source_paths.push_back(s->utterances[rng.index(s->utterances.size())]);
      rec.speaker_ids.push_back(s->id);
      rec.genders.push_back(s->gender);
      dry.push_back(detail::read_source(rec.source_paths.back(), fs_hz));
    }

    std::vector<NoiseComponent> parts;
    if (!noise_files.empty()) {
      const std::string& path = noise_files[rng.index(noise_files.size())];
      const Waveform w = detail::read_source(path, fs_hz);
      parts.push_back({path, static_cast<std::size_t>(rng.index(std::max<std::size_t>(1, w.size()))), 1.0});
    } else {
      // babble from other talkers of the same split
      for (int k = 0; k < spec.babble_talkers; ++k) {
        const Speaker& s = pool.speakers[rng.index(pool.speakers.size())];
        const std::string& path = s.utterances[rng.index(s.utterances.size())];
        const Waveform w = detail::read_source(path, fs_hz);
        const double p = power(w.view());
        parts.push_back({path, static_cast<std::size_t>(rng.index(std::max<std::size_t>(1, w.size()))),
                         p > 0.0 ? 1.0 / std::sqrt(p) : 0.0});
      }
    }
    const Waveform bed = detail::noise_bed_for(parts, n, fs_hz);
    MixtureSample m = render_mixture(scene, dry, bed, rng, fs_hz);
    m.recipe.noise = parts;

    char id[64];
    std::snprintf(id, sizeof(id), "%s_%06d", spec.split.c_str(), i);
    rec.id = id;
    rec.split = spec.split;
    rec.sample_rate = fs_hz;
    rec.scene = m.scene;
    rec.distances = m.distances;
    rec.recipe = m.recipe;
    const fs::path dir = root / spec.split;
    fs::create_directories(dir);
    auto rel = [&](const std::string& name) { return (fs::path(spec.split) / name).string(); };
    rec.mixture_path = rel(rec.id + "_mix.wav");
    rec.ref_paths = {rel(rec.id + "_s1.wav"), rel(rec.id + "_s2.wav")};
    rec.label_path = rel(rec.id + "_vad.csv");
    wav::write((root / rec.mixture_path).string(), m.mixture, spec.format);
    for (int k = 0; k < 2; ++k) wav::write((root / rec.ref_paths[k]).string(), m.refs[k], spec.format);
    write_labels((root / rec.label_path).string(), m.labels);
    records.push_back(std::move(rec));
  }
  std::ofstream out(manifest, std::ios::binary);
  if (!out) throw IoError("cannot write manifest: " + manifest);
  // every path in the manifest is relative to out_dir, so datasets can move
  const fs::path base = fs::absolute(root).lexically_normal();
  auto portable = [&](const std::string& p) { return fs::absolute(p).lexically_normal().lexically_relative(base).string(); };
  for (const auto& r : records) {
    ManifestRecord row = r;
    for (auto& p : row.source_paths) p = portable(p);
    for (auto& c : row.recipe.noise) c.path = portable(c.path);
    out << row.to_json().dump() << '\n';
  }
  // callers get loadable paths, as read_manifest would give them
  for (auto& r : records) {
    r.mixture_path = (root / r.mixture_path).string();
    r.label_path = (root / r.label_path).string();
    for (auto& p : r.ref_paths) p = (root / p).string();
  }
  return records;
}

}  // namespace septfa::sim
