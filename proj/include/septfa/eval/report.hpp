// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "septfa/core/error.hpp"
#include "septfa/core/parallel.hpp"
#include "septfa/separator/model.hpp"
#include "septfa/sim/dataset.hpp"
#include "septfa/stream/stream.hpp"
#include "septfa/train/objectives.hpp"
#include "septfa/vad/vad.hpp"

namespace septfa::eval {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Scene facts a row is grouped by.
struct SampleMeta {
  std::string id;
  std::vector<std::string> genders;
  double snr = kNaN;
  double t60 = kNaN;
  std::vector<double> distances;
  double critical_distance = kNaN;
};

inline SampleMeta meta_from_record(const sim::ManifestRecord& r) {
  return {r.id, r.genders, r.scene.snr, r.scene.t60, r.distances, sim::critical_distance(r.scene.room, r.scene.t60)};
}

// ---------------------------------------------------------------------------
// Group keys. Buckets are half-open except the last of each family, which
// includes its upper edge. Rows outside every bucket land in "other".

inline std::string gender_pair(const std::vector<std::string>& g) {
  if (g.size() != 2) return "other";
  std::string a = g[0], b = g[1];
  for (const auto& x : {a, b}) {
    if (x != "M" && x != "F") return "other";
  }
  if (a == b) return a + b;
  return "MF";
}

inline std::string snr_bucket(double snr) {
  if (std::isinf(snr) && snr > 0) return "clean";
  if (snr >= 0 && snr < 5) return "0-5dB";
  if (snr >= 5 && snr < 10) return "5-10dB";
  if (snr >= 10 && snr <= 15) return "10-15dB";
  return "other";
}

inline std::string t60_bucket(double t60) {
  if (t60 >= 0.2 && t60 < 0.33) return "0.20-0.33s";
  if (t60 >= 0.33 && t60 < 0.47) return "0.33-0.47s";
  if (t60 >= 0.47 && t60 <= 0.6) return "0.47-0.60s";
  return "other";
}

/// "below_dc" when every talker is closer than the critical distance,
/// "above_dc" when none is, "mixed" otherwise.
inline std::string distance_class(const std::vector<double>& d, double dc) {
  if (d.empty() || !std::isfinite(dc)) return "other";
  const auto below = std::count_if(d.begin(), d.end(), [&](double x) { return x < dc; });
  if (below == static_cast<long>(d.size())) return "below_dc";
  if (below == 0) return "above_dc";
  return "mixed";
}

// ---------------------------------------------------------------------------

struct EvalRow {
  SampleMeta meta;
  std::vector<double> input_si_sdr;   // per reference: si_sdr(ref, mixture)
  std::vector<double> output_si_sdr;  // per reference, matched estimate
  std::vector<double> si_sdri;        // per reference
  std::vector<int> perm;              // estimate i carries reference perm[i]
  double mean_si_sdri = 0.0;
  double vad_accuracy = kNaN;         // embedded head
  double vad_recall = kNaN;
  double vad_precision = kNaN;
  double energy_vad_accuracy = kNaN;  // thresholded masks

  std::string gender_pair() const { return eval::gender_pair(meta.genders); }
  std::string snr_bucket() const { return eval::snr_bucket(meta.snr); }
  std::string t60_bucket() const { return eval::t60_bucket(meta.t60); }
  std::string distance_class() const { return eval::distance_class(meta.distances, meta.critical_distance); }
};

/// Scores one sample. `labels`, `vad` and `masks` are optional; VAD columns
/// stay NaN without them.
inline EvalRow evaluate_row(SampleMeta meta, const Waveform& mixture, const std::vector<Waveform>& refs,
                            const std::vector<Waveform>& ests, const VadLabels* labels = nullptr,
                            const VadProbs* vad = nullptr, const MaskSet* masks = nullptr,
                            const EnergyVadConfig& energy = {}) {
  if (refs.size() != ests.size() || refs.empty()) throw DimensionError("evaluate_row: " + meta.id + ": speaker count");
  EvalRow r;
  r.meta = std::move(meta);
  const LossReport rep = upit_loss(refs, ests);
  r.perm = rep.chosen_permutation;
  const std::size_t n = refs.size();
  r.input_si_sdr.resize(n);
  r.output_si_sdr.resize(n);
  r.si_sdri.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.input_si_sdr[i] = si_sdr(refs[i], mixture);
  for (std::size_t i = 0; i < n; ++i) r.output_si_sdr[static_cast<std::size_t>(r.perm[i])] = rep.si_sdr_per_speaker[i];
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    r.si_sdri[i] = r.output_si_sdr[i] - r.input_si_sdr[i];
    sum += r.si_sdri[i];
  }
  r.mean_si_sdri = sum / static_cast<double>(n);
  if (labels) {
    const VadLabels truth = permute_rows(*labels, r.perm);
    if (vad) {
      const VadMetrics m = vad_metrics(hard_decision(*vad), truth);
      r.vad_accuracy = m.accuracy;
      r.vad_recall = m.recall;
      r.vad_precision = m.precision;
    }
    if (masks) r.energy_vad_accuracy = vad_metrics(energy_vad(*masks, energy), truth).accuracy;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Aggregation

struct GroupStats {
  std::string family;  // all, gender, snr, t60, distance
  std::string key;
  long count = 0;
  double mean_input_si_sdr = 0.0;
  double mean_output_si_sdr = 0.0;
  double mean_si_sdri = 0.0;
  double median_si_sdri = 0.0;
  long vad_count = 0;
  double vad_accuracy = kNaN;
  double energy_vad_accuracy = kNaN;
};

namespace detail {

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline GroupStats summarize(const std::string& family, const std::string& key, const std::vector<const EvalRow*>& rows) {
  GroupStats g;
  g.family = family;
  g.key = key;
  g.count = static_cast<long>(rows.size());
  std::vector<double> in, out, imp, vad, energy;
  for (const EvalRow* r : rows) {
    in.push_back(mean_of(r->input_si_sdr));
    out.push_back(mean_of(r->output_si_sdr));
    imp.push_back(r->mean_si_sdri);
    if (!std::isnan(r->vad_accuracy)) vad.push_back(r->vad_accuracy);
    if (!std::isnan(r->energy_vad_accuracy)) energy.push_back(r->energy_vad_accuracy);
  }
  g.mean_input_si_sdr = mean_of(in);
  g.mean_output_si_sdr = mean_of(out);
  g.mean_si_sdri = mean_of(imp);
  g.median_si_sdri = median_of(imp);
  g.vad_count = static_cast<long>(vad.size());
  if (!vad.empty()) g.vad_accuracy = mean_of(vad);
  if (!energy.empty()) g.energy_vad_accuracy = mean_of(energy);
  return g;
}

}  // namespace detail

/// Overall statistics followed by each grouping, in a fixed key order;
/// empty groups are left out.
inline std::vector<GroupStats> aggregate(const std::vector<EvalRow>& rows) {
  std::vector<GroupStats> out;
  if (rows.empty()) return out;
  std::vector<const EvalRow*> all;
  for (const auto& r : rows) all.push_back(&r);
  out.push_back(detail::summarize("all", "all", all));
  auto family = [&](const std::string& name, const std::vector<std::string>& keys, auto key_of) {
    for (const auto& k : keys) {
      std::vector<const EvalRow*> sel;
      for (const auto& r : rows) {
        if (key_of(r) == k) sel.push_back(&r);
      }
      if (!sel.empty()) out.push_back(detail::summarize(name, k, sel));
    }
  };
  family("gender", {"MM", "FF", "MF", "other"}, [](const EvalRow& r) { return r.gender_pair(); });
  family("snr", {"0-5dB", "5-10dB", "10-15dB", "clean", "other"}, [](const EvalRow& r) { return r.snr_bucket(); });
  family("t60", {"0.20-0.33s", "0.33-0.47s", "0.47-0.60s", "other"}, [](const EvalRow& r) { return r.t60_bucket(); });
  family("distance", {"below_dc", "mixed", "above_dc", "other"}, [](const EvalRow& r) { return r.distance_class(); });
  return out;
}

// ---------------------------------------------------------------------------
// Serialization. Numbers are written with 17 significant digits so a
// re-aggregation from the row file reproduces the summary.

namespace detail {

inline nlohmann::json num(double x) {
  if (std::isnan(x)) return nullptr;
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

inline double num_from(const nlohmann::json& j) {
  if (j.is_null()) return kNaN;
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s.empty() || s == "nan") return kNaN;
    return std::stod(s);
  }
  return j.get<double>();
}

inline std::string fmt(double x) {
  if (std::isnan(x)) return "";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_num(const std::string& s) { return num_from(nlohmann::json(s)); }

}  // namespace detail

inline nlohmann::json to_json(const EvalRow& r) {
  using detail::num;
  nlohmann::json j;
  j["id"] = r.meta.id;
  auto arr = [](const std::vector<double>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (double x : v) a.push_back(num(x));
    return a;
  };
  j["input_si_sdr"] = arr(r.input_si_sdr);
  j["output_si_sdr"] = arr(r.output_si_sdr);
  j["si_sdri"] = arr(r.si_sdri);
  j["mean_si_sdri"] = num(r.mean_si_sdri);
  j["perm"] = r.perm;
  j["vad_accuracy"] = num(r.vad_accuracy);
  j["vad_recall"] = num(r.vad_recall);
  j["vad_precision"] = num(r.vad_precision);
  j["energy_vad_accuracy"] = num(r.energy_vad_accuracy);
  j["genders"] = r.meta.genders;
  j["snr"] = num(r.meta.snr);
  j["t60"] = num(r.meta.t60);
  j["distances"] = arr(r.meta.distances);
  j["critical_distance"] = num(r.meta.critical_distance);
  j["gender_pair"] = r.gender_pair();
  j["snr_bucket"] = r.snr_bucket();
  j["t60_bucket"] = r.t60_bucket();
  j["distance_class"] = r.distance_class();
  return j;
}

inline EvalRow row_from_json(const nlohmann::json& j) {
  using detail::num_from;
  EvalRow r;
  auto arr = [](const nlohmann::json& a) {
    std::vector<double> v;
    for (const auto& x : a) v.push_back(num_from(x));
    return v;
  };
  r.meta.id = j.at("id").get<std::string>();
  r.input_si_sdr = arr(j.at("input_si_sdr"));
  r.output_si_sdr = arr(j.at("output_si_sdr"));
  r.si_sdri = arr(j.at("si_sdri"));
  r.mean_si_sdri = num_from(j.at("mean_si_sdri"));
  r.perm = j.at("perm").get<std::vector<int>>();
  r.vad_accuracy = num_from(j.at("vad_accuracy"));
  r.vad_recall = num_from(j.at("vad_recall"));
  r.vad_precision = num_from(j.at("vad_precision"));
  r.energy_vad_accuracy = num_from(j.at("energy_vad_accuracy"));
  r.meta.genders = j.at("genders").get<std::vector<std::string>>();
  r.meta.snr = num_from(j.at("snr"));
  r.meta.t60 = num_from(j.at("t60"));
  r.meta.distances = arr(j.at("distances"));
  r.meta.critical_distance = num_from(j.at("critical_distance"));
  return r;
}

inline nlohmann::json to_json(const GroupStats& g) {
  using detail::num;
  return {{"group", g.family},
          {"key", g.key},
          {"count", g.count},
          {"mean_input_si_sdr", num(g.mean_input_si_sdr)},
          {"mean_output_si_sdr", num(g.mean_output_si_sdr)},
          {"mean_si_sdri", num(g.mean_si_sdri)},
          {"median_si_sdri", num(g.median_si_sdri)},
          {"vad_count", g.vad_count},
          {"vad_accuracy", num(g.vad_accuracy)},
          {"energy_vad_accuracy", num(g.energy_vad_accuracy)}};
}

// Row CSV: per-speaker columns for two talkers, lists joined with ';'.
inline constexpr const char* kRowCsvHeader =
    "id,input_si_sdr_1,input_si_sdr_2,output_si_sdr_1,output_si_sdr_2,si_sdri_1,si_sdri_2,mean_si_sdri,perm,"
    "vad_accuracy,vad_recall,vad_precision,energy_vad_accuracy,genders,snr,t60,distances,critical_distance,"
    "gender_pair,snr_bucket,t60_bucket,distance_class";

inline std::string rows_to_csv(const std::vector<EvalRow>& rows) {
  using detail::fmt;
  std::ostringstream os;
  os << kRowCsvHeader << "\n";
  auto join = [](const auto& v, auto f) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + f(v[i]);
    return s;
  };
  for (const auto& r : rows) {
    if (r.input_si_sdr.size() != 2) throw DimensionError("rows_to_csv: " + r.meta.id + ": CSV holds two talkers");
    os << r.meta.id;
    for (const auto* v : {&r.input_si_sdr, &r.output_si_sdr, &r.si_sdri}) os << "," << fmt((*v)[0]) << "," << fmt((*v)[1]);
    os << "," << fmt(r.mean_si_sdri) << "," << join(r.perm, [](int p) { return std::to_string(p); });
    for (double x : {r.vad_accuracy, r.vad_recall, r.vad_precision, r.energy_vad_accuracy}) os << "," << fmt(x);
    os << "," << join(r.meta.genders, [](const std::string& g) { return g; });
    os << "," << fmt(r.meta.snr) << "," << fmt(r.meta.t60);
    os << "," << join(r.meta.distances, [](double d) { return detail::fmt(d); });
    os << "," << fmt(r.meta.critical_distance);
    os << "," << r.gender_pair() << "," << r.snr_bucket() << "," << r.t60_bucket() << "," << r.distance_class() << "\n";
  }
  return os.str();
}

inline std::vector<EvalRow> rows_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kRowCsvHeader) throw IoError("eval rows: unexpected CSV header");
  std::vector<EvalRow> rows;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c = detail::split(line, ',');
    if (c.size() != 22) throw IoError("eval rows: wrong column count in row " + std::to_string(rows.size() + 1));
    using detail::parse_num;
    EvalRow r;
    r.meta.id = c[0];
    r.input_si_sdr = {parse_num(c[1]), parse_num(c[2])};
    r.output_si_sdr = {parse_num(c[3]), parse_num(c[4])};
    r.si_sdri = {parse_num(c[5]), parse_num(c[6])};
    r.mean_si_sdri = parse_num(c[7]);
    for (const auto& p : detail::split(c[8], ';')) r.perm.push_back(std::stoi(p));
    r.vad_accuracy = parse_num(c[9]);
    r.vad_recall = parse_num(c[10]);
    r.vad_precision = parse_num(c[11]);
    r.energy_vad_accuracy = parse_num(c[12]);
    if (!c[13].empty()) r.meta.genders = detail::split(c[13], ';');
    r.meta.snr = parse_num(c[14]);
    r.meta.t60 = parse_num(c[15]);
    if (!c[16].empty()) {
      for (const auto& d : detail::split(c[16], ';')) r.meta.distances.push_back(parse_num(d));
    }
    r.meta.critical_distance = parse_num(c[17]);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::string summary_to_csv(const std::vector<GroupStats>& stats) {
  using detail::fmt;
  std::ostringstream os;
  os << "group,key,count,mean_input_si_sdr,mean_output_si_sdr,mean_si_sdri,median_si_sdri,vad_count,vad_accuracy,"
        "energy_vad_accuracy\n";
  for (const auto& g : stats) {
    os << g.family << "," << g.key << "," << g.count << "," << fmt(g.mean_input_si_sdr) << ","
       << fmt(g.mean_output_si_sdr) << "," << fmt(g.mean_si_sdri) << "," << fmt(g.median_si_sdri) << ","
       << g.vad_count << "," << fmt(g.vad_accuracy) << "," << fmt(g.energy_vad_accuracy) << "\n";
  }
  return os.str();
}

/// Fixed-width console table.
inline std::string format_table(const std::vector<GroupStats>& stats) {
  std::ostringstream os;
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-9s %-12s %6s %9s %9s %9s %9s %8s %8s\n", "group", "key", "n", "in[dB]", "out[dB]",
                "SI-SDRi", "median", "VAD", "energy");
  os << buf;
  auto pct = [](double x) {
    if (std::isnan(x)) return std::string("-");
    char b[16];
    std::snprintf(b, sizeof b, "%.3f", x);
    return std::string(b);
  };
  for (const auto& g : stats) {
    std::snprintf(buf, sizeof buf, "%-9s %-12s %6ld %9.2f %9.2f %9.2f %9.2f %8s %8s\n", g.family.c_str(),
                  g.key.c_str(), g.count, g.mean_input_si_sdr, g.mean_output_si_sdr, g.mean_si_sdri,
                  g.median_si_sdri, pct(g.vad_accuracy).c_str(), pct(g.energy_vad_accuracy).c_str());
    os << buf;
  }
  return os.str();
}

enum class ReportFormat { kCsv, kJsonl };

inline ReportFormat parse_format(const std::string& s) {
  if (s == "csv") return ReportFormat::kCsv;
  if (s == "jsonl") return ReportFormat::kJsonl;
  throw ConfigError("unknown report format '" + s + "' (expected csv or jsonl)");
}

/// Writes <dir>/eval_rows.<ext> and <dir>/eval_summary.<ext>; returns the two paths.
inline std::pair<std::string, std::string> write_report(const std::string& dir, const std::vector<EvalRow>& rows,
                                                        const std::vector<GroupStats>& stats, ReportFormat f) {
  const std::string ext = f == ReportFormat::kCsv ? "csv" : "jsonl";
  const std::string rp = dir + "/eval_rows." + ext, sp = dir + "/eval_summary." + ext;
  auto put = [](const std::string& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw IoError("cannot write " + p);
    os << text;
    if (!os) throw IoError("write failed: " + p);
  };
  if (f == ReportFormat::kCsv) {
    put(rp, rows_to_csv(rows));
    put(sp, summary_to_csv(stats));
  } else {
    std::string a, b;
    for (const auto& r : rows) a += to_json(r).dump() + "\n";
    for (const auto& g : stats) b += to_json(g).dump() + "\n";
    put(rp, a);
    put(sp, b);
  }
  return {rp, sp};
}

inline std::vector<EvalRow> read_rows(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  const std::string text = ss.str();
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") return rows_from_csv(text);
  std::vector<EvalRow> rows;
  std::istringstream ls(text);
  std::string line;
  while (std::getline(ls, line)) {
    if (line.empty()) continue;
    try {
      rows.push_back(row_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path + ": bad row " + std::to_string(rows.size() + 1) + ": " + e.what());
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Model evaluation over a manifest

struct EvalOptions {
  bool stream = false;
  SegmentPlan plan;
  std::size_t stream_chunk = 1600;
  int threads = 0;
  EnergyVadConfig energy;
};

inline EvalRow evaluate_sample(const Separator& model, const SampleMeta& meta, const Waveform& mixture,
                               const std::vector<Waveform>& refs, const VadLabels& labels, const EvalOptions& opt) {
  SeparationResult batch = model.separate(mixture);
  if (!opt.stream) return evaluate_row(meta, mixture, refs, batch.estimates, &labels, &batch.vad, &batch.masks, opt.energy);
  // streamed audio is scored; VAD columns come from the batch pass
  auto streamed = stream_separate(model, mixture, opt.plan, opt.stream_chunk);
  EvalRow r = evaluate_row(meta, mixture, refs, streamed);
  const EvalRow b = evaluate_row(meta, mixture, refs, batch.estimates, &labels, &batch.vad, &batch.masks, opt.energy);
  r.vad_accuracy = b.vad_accuracy;
  r.vad_recall = b.vad_recall;
  r.vad_precision = b.vad_precision;
  r.energy_vad_accuracy = b.energy_vad_accuracy;
  return r;
}

/// Rows come back in manifest order whatever the thread count.
inline std::vector<EvalRow> evaluate_manifest(const Separator& model, const std::vector<sim::ManifestRecord>& records,
                                              const EvalOptions& opt) {
  std::vector<EvalRow> rows(records.size());
  parallel_for(records.size(), opt.threads, [&](std::size_t i) {
    const auto& rec = records[i];
    sim::LoadedSample s = sim::load_sample(rec);
    rows[i] = evaluate_sample(model, meta_from_record(rec), s.mixture, s.refs, s.labels, opt);
  });
  return rows;
}

}  // namespace septfa::eval
