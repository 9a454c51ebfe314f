// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <json.hpp>

#include "septfa/core/error.hpp"
#include "septfa/core/rng.hpp"
#include "septfa/sim/rir.hpp"

namespace septfa::sim {

struct SceneSpec {
  Room room;
  double t60 = 0.4;
  std::vector<Point> sources;
  Point mic{2.0, 2.0, 1.5};
  double overlap = 1.0;
  double snr = 10.0;  // dB; +inf: no noise
  double sir = 0.0;   // dB
  double sample_length = 10.0;  // s
  std::uint64_t seed = 0;

  std::vector<double> distances() const {
    std::vector<double> d;
    for (const auto& s : sources) d.push_back(distance(s, mic));
    return d;
  }
};

struct SceneConstraints {
  std::array<double, 2> length_xy{4.5, 6.5};
  std::array<double, 2> height{2.5, 3.0};
  std::array<double, 2> t60{0.2, 0.6};
  std::array<double, 2> snr{0.0, 15.0};
  std::vector<double> overlaps{0.5, 0.75, 1.0};
  double wall_margin = 0.3;
  double min_source_mic = 0.5;
  double min_source_source = 0.5;
  int speakers = 2;
  double sir = 0.0;
  double sample_length = 10.0;
  int max_draws = 1000;

  void validate() const {
    auto ordered = [](const std::array<double, 2>& r) { return r[0] <= r[1]; };
    if (!ordered(length_xy) || !ordered(height) || !ordered(t60) || !ordered(snr)) {
      throw ConfigError("scene constraints: a range has min > max");
    }
    if (!(t60[0] > 0.0)) throw ConfigError("scene constraints: T60 must be positive");
    if (overlaps.empty()) throw ConfigError("scene constraints: no overlap values");
    for (double o : overlaps) {
      if (!(o > 0.0 && o <= 1.0)) throw ConfigError("scene constraints: overlap must lie in (0, 1]");
    }
    if (speakers != 2) throw ConfigError("scene constraints: exactly two speakers supported");
    if (!(sample_length > 0.0)) throw ConfigError("scene constraints: sample_length must be positive");
    if (wall_margin < 0.0) throw ConfigError("scene constraints: negative wall margin");
  }
};

/// Critical distance (m) of a room: 0.057 sqrt(V / T60).
inline double critical_distance(const Room& room, double t60) { return 0.057 * std::sqrt(room.volume() / t60); }

/// Rejection sampling of geometry; scalar fields are drawn once per scene.
inline SceneSpec sample_scene(Rng& rng, const SceneConstraints& c = {}) {
  c.validate();
  SceneSpec s;
  s.room.dims = {rng.uniform(c.length_xy[0], c.length_xy[1]), rng.uniform(c.length_xy[0], c.length_xy[1]),
                 rng.uniform(c.height[0], c.height[1])};
  s.t60 = rng.uniform(c.t60[0], c.t60[1]);
  s.overlap = c.overlaps[rng.index(c.overlaps.size())];
  s.snr = rng.uniform(c.snr[0], c.snr[1]);
  s.sir = c.sir;
  s.sample_length = c.sample_length;
  auto inside = [&] {
    Point p;
    for (int a = 0; a < 3; ++a) p[a] = rng.uniform(c.wall_margin, s.room.dims[a] - c.wall_margin);
    return p;
  };
  for (int draw = 0; draw < c.max_draws; ++draw) {
    s.mic = inside();
    s.sources.clear();
    for (int i = 0; i < c.speakers; ++i) s.sources.push_back(inside());
    bool ok = s.room.contains(s.mic, c.wall_margin);
    for (std::size_t i = 0; i < s.sources.size() && ok; ++i) {
      ok = s.room.contains(s.sources[i], c.wall_margin) && distance(s.sources[i], s.mic) >= c.min_source_mic;
      for (std::size_t j = 0; j < i && ok; ++j) ok = distance(s.sources[i], s.sources[j]) >= c.min_source_source;
    }
    if (ok) return s;
  }
  throw SamplingError("sample_scene: constraints not satisfied after " + std::to_string(c.max_draws) + " draws");
}

inline nlohmann::json to_json(const SceneSpec& s) {
  nlohmann::json src = nlohmann::json::array();
  for (const auto& p : s.sources) src.push_back(p);
  nlohmann::json j{{"room", s.room.dims}, {"t60", s.t60},   {"sources", src},
                   {"mic", s.mic},        {"overlap", s.overlap}, {"sir", s.sir},
                   {"sample_length", s.sample_length}, {"seed", s.seed}};
  j["snr"] = std::isinf(s.snr) ? nlohmann::json("inf") : nlohmann::json(s.snr);
  return j;
}

inline SceneSpec scene_from_json(const nlohmann::json& j) {
  SceneSpec s;
  try {
    s.room.dims = j.at("room").get<Point>();
    s.t60 = j.at("t60");
    s.sources.clear();
    for (const auto& p : j.at("sources")) s.sources.push_back(p.get<Point>());
    s.mic = j.at("mic").get<Point>();
    s.overlap = j.at("overlap");
    s.snr = j.at("snr").is_string() ? std::numeric_limits<double>::infinity() : j.at("snr").get<double>();
    s.sir = j.at("sir");
    s.sample_length = j.at("sample_length");
    s.seed = j.at("seed");
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad scene record: ") + e.what());
  }
  return s;
}

}  // namespace septfa::sim
