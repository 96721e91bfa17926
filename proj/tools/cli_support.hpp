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
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "press2dyn/errors.hpp"
#include "press2dyn/ingest.hpp"
#include "press2dyn/io.hpp"

namespace press2dyn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline std::string flag_name(const std::string& key) {
  std::string f = key;
  std::replace(f.begin(), f.end(), '_', '-');
  return "--" + f;
}

// Options of one subcommand, each also settable through a same-named key of
// the subcommand's config object. A flag given on the command line wins.
class Section {
 public:
  Section(CLI::App* app, std::string name) : app_(app), name_(std::move(name)) {}

  CLI::App* app() const { return app_; }
  const std::string& name() const { return name_; }

  template <class T>
  CLI::Option* add(const std::string& key, T& var, const std::string& help) {
    CLI::Option* opt = app_->add_option(flag_name(key), var, help);
    if constexpr (!std::is_same_v<T, std::string>) opt->capture_default_str();
    else if (!var.empty()) opt->capture_default_str();
    entries_.push_back({key, opt,
                        [&var, key, this](const json& j) {
                          try {
                            var = j.get<T>();
                          } catch (const json::exception&) {
                            throw UsageError("config " + name_ + "." + key + ": wrong value type");
                          }
                        },
                        [&var] { return json(var); }});
    return opt;
  }

  CLI::Option* flag(const std::string& key, bool& var, const std::string& help) {
    CLI::Option* opt = app_->add_flag(flag_name(key), var, help);
    entries_.push_back({key, opt,
                        [&var, key, this](const json& j) {
                          if (!j.is_boolean()) throw UsageError("config " + name_ + "." + key + ": expected a boolean");
                          var = j.get<bool>();
                        },
                        [&var] { return json(var); }});
    return opt;
  }

  // Applies config values for keys not given as flags; unknown keys are rejected.
  void apply(const json& cfg) {
    if (cfg.is_null()) return;
    if (!cfg.is_object()) throw UsageError("config section '" + name_ + "' must be an object");
    for (const auto& [key, value] : cfg.items()) {
      Entry* e = find(key);
      if (!e) throw UsageError("config section '" + name_ + "': unknown key '" + key + "'");
      if (e->opt->count() > 0) continue;
      e->set(value);
      e->from_config = true;
    }
  }

  bool given(const std::string& key) const {
    for (const auto& e : entries_)
      if (e.key == key) return e.opt->count() > 0 || e.from_config;
    return false;
  }

  json resolved() const {
    json j = json::object();
    for (const auto& e : entries_) j[e.key] = e.get();
    return j;
  }

 private:
  struct Entry {
    std::string key;
    CLI::Option* opt;
    std::function<void(const json&)> set;
    std::function<json()> get;
    bool from_config = false;
  };

  Entry* find(const std::string& key) {
    for (auto& e : entries_)
      if (e.key == key) return &e;
    return nullptr;
  }

  CLI::App* app_;
  std::string name_;
  std::vector<Entry> entries_;
};

// Options shared by every subcommand.
struct Common {
  std::string config;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::string out;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* jobs_opt = nullptr;
};

inline void add_common(CLI::App* sub, Common& c, const std::string& name) {
  c.out = "runs/" + name;
  sub->add_option("--config", c.config, "JSON run configuration");
  c.seed_opt = sub->add_option("--seed", c.seed, "Random seed");
  c.jobs_opt = sub->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

inline const std::set<std::string>& subcommand_names() {
  static const std::set<std::string> names = {"synth", "ingest",    "preprocess", "train", "predict",
                                              "knn",   "eval",      "stability",  "sweep", "report"};
  return names;
}

// Resolves seed (flag, then PRESS2DYN_SEED, then config, then 0), jobs and the
// subcommand's section; returns the resolved configuration. Every section of
// the file is checked for unknown keys.
inline json resolve(Common& c, Section& s, const std::vector<Section*>& all) {
  json cfg = json::object();
  if (!c.config.empty()) {
    cfg = io::read_json(c.config);
    if (!cfg.is_object()) throw UsageError(c.config + ": config must be a JSON object");
    for (const auto& [key, value] : cfg.items()) {
      (void)value;
      if (key != "seed" && key != "jobs" && !subcommand_names().count(key))
        throw UsageError(c.config + ": unknown key '" + key + "'");
    }
  }
  if (c.seed_opt->count() == 0) {
    if (const char* env = std::getenv("PRESS2DYN_SEED")) {
      try {
        c.seed = static_cast<std::uint64_t>(io::parse_int(env, "PRESS2DYN_SEED"));
      } catch (const DataError& e) {
        throw UsageError(e.what());
      }
    } else if (cfg.contains("seed")) {
      if (!cfg["seed"].is_number_unsigned()) throw UsageError("config seed must be a non-negative integer");
      c.seed = cfg["seed"].get<std::uint64_t>();
    }
  }
  if (c.jobs_opt->count() == 0 && cfg.contains("jobs")) {
    if (!cfg["jobs"].is_number_unsigned() || cfg["jobs"].get<unsigned>() < 1)
      throw UsageError("config jobs must be a positive integer");
    c.jobs = cfg["jobs"].get<unsigned>();
  }
  for (Section* other : all)
    if (other != &s && cfg.contains(other->name())) other->apply(cfg[other->name()]);
  if (cfg.contains(s.name())) s.apply(cfg[s.name()]);
  return {{"seed", c.seed}, {"jobs", c.jobs}, {s.name(), s.resolved()}};
}

// ---------------------------------------------------------------------------
// Run directory and manifest

inline std::string generic(const fs::path& p) { return p.lexically_normal().generic_string(); }

class Run {
 public:
  Run(std::string command, const Common& c, json resolved)
      : command_(std::move(command)), seed_(c.seed), out_(c.out), resolved_(std::move(resolved)) {
    fs::create_directories(out_);
  }

  const fs::path& out() const { return out_; }
  fs::path path(const fs::path& rel) const { return out_ / rel; }

  // Hashes a file, or every regular file below a directory.
  void input(const fs::path& p) {
    if (fs::is_regular_file(p)) {
      inputs_[generic(p)] = io::hash_file(p);
      return;
    }
    if (!fs::is_directory(p)) throw DataError(p.string() + ": no such file or directory");
    const fs::path out_abs = fs::weakly_canonical(out_);
    for (const auto& e : fs::recursive_directory_iterator(p)) {
      if (!e.is_regular_file()) continue;
      const fs::path abs = fs::weakly_canonical(e.path());
      if (std::mismatch(out_abs.begin(), out_abs.end(), abs.begin(), abs.end()).first == out_abs.end()) continue;
      inputs_[generic(e.path())] = io::hash_file(e.path());
    }
  }

  void finish() const {
    io::write_json(out_ / "config.json", resolved_);
    json outputs = json::object();
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(out_))
      if (e.is_regular_file()) files.push_back(e.path());
    std::map<std::string, std::string> sorted;
    for (const auto& f : files) {
      const std::string rel = fs::relative(f, out_).generic_string();
      if (rel == "manifest.json") continue;
      sorted[rel] = io::hash_file(f);
    }
    for (const auto& [k, v] : sorted) outputs[k] = v;
    json inputs = json::object();
    for (const auto& [k, v] : inputs_) inputs[k] = v;
    io::write_json(out_ / "manifest.json", {{"tool", "press2dyn"},
                                            {"version", PRESS2DYN_VERSION},
                                            {"command", command_},
                                            {"seed", seed_},
                                            {"hash", "fnv1a64"},
                                            {"inputs", inputs},
                                            {"outputs", outputs}});
  }

 private:
  std::string command_;
  std::uint64_t seed_;
  fs::path out_;
  json resolved_;
  std::map<std::string, std::string> inputs_;
};

// ---------------------------------------------------------------------------
// Locating takes and predictions

inline constexpr const char* kPredFile = "pred.prsm";

struct NamedTake {
  std::string name;
  fs::path dir;
  Take take;
};

// A take directory, a pressure file inside one, or a cohort root.
inline std::vector<NamedTake> load_gt(const fs::path& p) {
  fs::path root = p;
  if (fs::is_regular_file(p)) {
    root = p.parent_path();
    if (root.empty()) root = ".";
    if (!fs::exists(root / "take.json"))
      throw DataError(p.string() + ": ground truth must sit inside a synchronized take directory");
  }
  std::vector<NamedTake> out;
  for (const auto& d : list_take_dirs(root)) {
    Take t = load_take_dir(d);
    const fs::path norm = fs::weakly_canonical(d);
    out.push_back({norm.filename().string(), d, std::move(t)});
  }
  // A pressure file given directly replaces the take's own stream.
  if (fs::is_regular_file(p)) {
    Take& t = out.front().take;
    const auto frames = read_pressure(p);
    if (frames.size() != t.size())
      throw DataError(p.string() + ": " + std::to_string(frames.size()) + " frames for a take of " +
                      std::to_string(t.size()));
    for (std::size_t i = 0; i < frames.size(); ++i) t.pressures[i] = sanitize_pressure(frames[i], t.footmask);
  }
  return out;
}

// A prediction file, a directory holding pred.prsm, or a root with one
// subdirectory per ground-truth take.
inline std::vector<std::vector<PressureFrame>> load_predictions(const fs::path& p, const std::vector<NamedTake>& gt) {
  std::vector<std::vector<PressureFrame>> out;
  if (fs::is_regular_file(p) || fs::exists(p / kPredFile)) {
    if (gt.size() != 1)
      throw DataError(p.string() + ": a single prediction needs a single ground-truth take, got " +
                      std::to_string(gt.size()));
    out.push_back(read_pressure(fs::is_regular_file(p) ? p : p / kPredFile));
  } else {
    if (!fs::is_directory(p)) throw DataError(p.string() + ": no such prediction file or directory");
    for (const auto& t : gt) {
      const fs::path f = p / t.name / kPredFile;
      if (!fs::exists(f)) throw DataError("no prediction for take " + t.name + " (expected " + f.string() + ")");
      out.push_back(read_pressure(f));
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out[i].size() != gt[i].take.size())
      throw DataError("take " + gt[i].name + ": " + std::to_string(out[i].size()) + " predicted frames for " +
                      std::to_string(gt[i].take.size()) + " ground-truth frames");
  return out;
}

}  // namespace press2dyn::cli
