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
#include <cstdio>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cli_support.hpp"
#include "press2dyn/core.hpp"
#include "press2dyn/ingest.hpp"
#include "press2dyn/knn.hpp"
#include "press2dyn/metrics.hpp"
#include "press2dyn/models.hpp"
#include "press2dyn/pipeline.hpp"
#include "press2dyn/preprocess.hpp"
#include "press2dyn/report.hpp"
#include "press2dyn/stability.hpp"

namespace {

using namespace press2dyn;
using namespace press2dyn::cli;

json stats_json(const AggregateStats& a) {
  return {{"n", a.n}, {"mean", a.mean}, {"std", a.std}, {"min", a.min}, {"median", a.median}, {"max", a.max}};
}

// Mean over non-degenerate values; null when every frame is degenerate.
json metric_mean(const std::vector<FrameError>& frames, MetricValue FrameError::*field) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& f : frames) {
    const MetricValue& v = f.*field;
    if (v.degenerate) continue;
    sum += v.value;
    ++n;
  }
  return {{"frames", n}, {"mean", n ? json(sum / static_cast<double>(n)) : json(nullptr)}};
}

std::vector<double> parse_thresholds(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
  if (parts.size() != 3) throw UsageError("thresholds must read first:last:step, got '" + spec + "'");
  try {
    return threshold_range(io::parse_double(parts[0], "thresholds"), io::parse_double(parts[1], "thresholds"),
                           io::parse_double(parts[2], "thresholds"));
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
}

std::vector<FootPlacement> concat_placements(const std::vector<NamedTake>& gt) {
  std::vector<FootPlacement> out;
  for (const auto& t : gt) {
    const auto& p = require_placements(t.take);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<PressureFrame> concat_gt(const std::vector<NamedTake>& gt) {
  std::vector<PressureFrame> out;
  for (const auto& t : gt) out.insert(out.end(), t.take.pressures.begin(), t.take.pressures.end());
  return out;
}

std::vector<PressureFrame> concat(const std::vector<std::vector<PressureFrame>>& v) {
  std::vector<PressureFrame> out;
  for (const auto& x : v) out.insert(out.end(), x.begin(), x.end());
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name, const std::string& source) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw DataError(source + ": missing column '" + name + "'");
  }
};

CsvTable read_csv(const fs::path& path) {
  std::istringstream in(io::read_file(path));
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty CSV");
  for (auto c : io::split_csv(line)) t.header.emplace_back(c);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> row;
    for (auto c : io::split_csv(line)) row.emplace_back(c);
    if (row.size() != t.header.size()) throw DataError(path.string() + ": ragged row");
    t.rows.push_back(std::move(row));
  }
  return t;
}

fs::path in_dir_or_file(const fs::path& p, const char* file) { return fs::is_directory(p) ? p / file : p; }

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::size_t frames = 1000;
  std::size_t subjects = 3;
  bool raw = false;
  double pixels_per_mm = SynthOptions{}.pixels_per_mm;
  double camera_distance_mm = SynthOptions{}.camera_distance_mm;
  double pose_noise_px = SynthOptions{}.pose_noise_px;
  double joint_dropout = SynthOptions{}.joint_dropout;
};

void cmd_synth(Run& run, const Common& c, const SynthArgs& a) {
  if (a.subjects < 1) throw UsageError("synth: --subjects must be >= 1");
  SynthOptions opt;
  opt.pixels_per_mm = a.pixels_per_mm;
  opt.camera_distance_mm = a.camera_distance_mm;
  opt.pose_noise_px = a.pose_noise_px;
  opt.joint_dropout = a.joint_dropout;
  const auto takes = generate_synthetic_cohort(c.seed, a.frames, a.subjects, opt);
  json names = json::array();
  for (const auto& t : takes) {
    names.push_back(t.subject.id);
    if (a.raw) save_raw(run.path(t.subject.id), expand_to_raw(t));
    else save_take(run.path(t.subject.id), t);
  }
  if (!a.raw) io::write_json(run.path("cohort.json"), {{"takes", names}});
}

struct IngestArgs {
  std::string input;
  std::int64_t offset_frames = 0;
};

void cmd_ingest(Run& run, const IngestArgs& a) {
  run.input(a.input);
  save_take(run.out(), synchronize(load_raw_dir(a.input), a.offset_frames));
}

struct PreprocessArgs {
  std::string data;
  std::string scaling = "max";
  std::string test_subject;
  double validation_fraction = 0.1;
};

LooSplit choose_split(const std::vector<Take>& takes, const std::string& test_subject, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw UsageError("validation fraction must be in (0,1)");
  if (test_subject.empty()) return all_subjects_split(takes, {fraction});
  return find_split(make_loo_splits(takes, {fraction}), test_subject);
}

void cmd_preprocess(Run& run, const PreprocessArgs& a) {
  run.input(a.data);
  const auto takes = load_cohort(a.data);
  const auto scaling = parse_pressure_scaling(a.scaling);
  const LooSplit split = choose_split(takes, a.test_subject, a.validation_fraction);
  save_normalizers(run.path("normalizers.json"), fit_normalizers(takes, split.train, scaling));
  io::write_json(run.path("preprocess.json"), {{"test_subject", split.test_subject},
                                               {"scaling", to_string(scaling)},
                                               {"train_frames", split.train.size()},
                                               {"validation_frames", split.validation.size()},
                                               {"test_frames", split.test.size()},
                                               {"valid_prexels", takes.front().footmask.count()}});
}

struct TrainArgs {
  std::string data;
  std::string arch = "pns";
  std::size_t depth = PnsConfig{}.depth;
  std::size_t width = PnsConfig{}.width;
  double dropout = 0.5;
  std::size_t base_channels = PnConfig{}.base_channels;
  std::size_t block_fc_rank = PnConfig{}.block_fc_rank;
  int epochs = 40;
  std::size_t batch_size = 128;
  double lr = 1e-4;
  double decay_factor = 0.25;
  int decay_every = 7;
  std::size_t max_steps = 0;
  double target_mse = 0.0;
  std::string scaling = "max";
  std::string test_subject;
  double validation_fraction = 0.1;
};

void cmd_train(Run& run, const Common& c, const Section& s, TrainArgs a) {
  run.input(a.data);
  const Arch arch = parse_arch(a.arch);
  const TrainConfig paper = paper_train_config(arch);
  TrainConfig cfg;
  cfg.epochs = s.given("epochs") ? a.epochs : paper.epochs;
  cfg.batch_size = s.given("batch_size") ? a.batch_size : paper.batch_size;
  cfg.schedule.base_lr = s.given("lr") ? a.lr : paper.schedule.base_lr;
  cfg.schedule.decay_factor = s.given("decay_factor") ? a.decay_factor : paper.schedule.decay_factor;
  cfg.schedule.decay_every = s.given("decay_every") ? a.decay_every : paper.schedule.decay_every;
  cfg.max_steps = a.max_steps;
  cfg.target_mse = a.target_mse;
  cfg.seed = c.seed;
  Model model;
  if (arch == Arch::kPressNetSimple) {
    PnsConfig pc;
    pc.depth = a.depth;
    pc.width = a.width;
    pc.dropout = a.dropout;
    pc.validate();
    model = build_pressnet_simple(pc, c.seed);
  } else {
    PnConfig pc;
    pc.base_channels = a.base_channels;
    pc.block_fc_rank = a.block_fc_rank;
    pc.spatial_dropout = a.dropout;
    pc.validate();
    model = build_pressnet(pc, c.seed);
  }
  const auto takes = load_cohort(a.data);
  const LooSplit split = choose_split(takes, a.test_subject, a.validation_fraction);
  std::string log = "epoch,lr,train_mse,val_mse\n";
  auto trained = train_on_split(std::move(model), takes, split, cfg, parse_pressure_scaling(a.scaling),
                                [&](const EpochLog& e) {
                                  log += std::to_string(e.epoch) + ',' + io::format_double(e.lr) + ',' +
                                         io::format_double(e.train_mse) + ',' + io::format_double(e.val_mse) + '\n';
                                  std::fprintf(stderr, "epoch %d  train %.6g  val %.6g\n", e.epoch, e.train_mse,
                                               e.val_mse);
                                });
  save_model(run.path("model.json"), trained.model,
             {{"best_epoch", trained.result.best_epoch},
              {"best_val_mse", trained.result.best_val_mse},
              {"steps", trained.result.steps}});
  save_normalizers(run.path("normalizers.json"), trained.norm);
  io::write_json(run.path("baseline.json"), {{"distribution", trained.baseline}});
  io::write_file(run.path("train_log.csv"), log);
  io::write_json(run.path("split.json"), {{"test_subject", split.test_subject},
                                          {"train_frames", split.train.size()},
                                          {"validation_frames", split.validation.size()},
                                          {"test_frames", split.test.size()},
                                          {"epochs", cfg.epochs},
                                          {"batch_size", cfg.batch_size},
                                          {"lr", cfg.schedule.base_lr},
                                          {"decay_factor", cfg.schedule.decay_factor},
                                          {"decay_every", cfg.schedule.decay_every}});
}

void write_predictions(Run& run, const std::vector<NamedTake>& takes,
                       const std::vector<std::vector<PressureFrame>>& preds) {
  json names = json::array();
  for (std::size_t i = 0; i < takes.size(); ++i) {
    write_pressure(run.path(fs::path(takes[i].name) / kPredFile), preds[i], takes[i].take.footmask);
    names.push_back(takes[i].name);
  }
  io::write_json(run.path("predictions.json"), {{"takes", names}});
}

std::vector<NamedTake> select_subject(std::vector<NamedTake> takes, const std::string& subject) {
  if (subject.empty()) return takes;
  std::vector<NamedTake> out;
  for (auto& t : takes)
    if (t.take.subject.id == subject) out.push_back(std::move(t));
  if (out.empty()) throw DataError("no takes of subject '" + subject + "'");
  return out;
}

struct PredictArgs {
  std::string model;
  std::string data;
  std::string subject;
};

void cmd_predict(Run& run, const PredictArgs& a) {
  run.input(a.model);
  run.input(a.data);
  Model m = load_model(fs::path(a.model) / "model.json");
  const Normalizers norm = load_normalizers(fs::path(a.model) / "normalizers.json");
  const auto takes = select_subject(load_gt(a.data), a.subject);
  std::vector<std::vector<PressureFrame>> preds;
  for (const auto& t : takes) preds.push_back(predict_take(m, norm, t.take));
  write_predictions(run, takes, preds);
}

struct KnnArgs {
  std::string data;
  std::size_t k = 2;
  bool raw_coords = false;
  std::string test_subject;
};

void cmd_knn(Run& run, const Common& c, const KnnArgs& a) {
  run.input(a.data);
  auto named = load_gt(a.data);
  std::vector<Take> takes;
  for (const auto& t : named) takes.push_back(t.take);
  std::vector<FrameRef> refs;
  for (std::uint32_t t = 0; t < takes.size(); ++t)
    if (takes[t].subject.id != a.test_subject)
      for (auto r : take_refs(takes, t)) refs.push_back(r);
  const KnnModel knn = build_knn(takes, refs, a.k, a.raw_coords);
  const auto test = select_subject(std::move(named), a.test_subject);
  std::vector<std::vector<PressureFrame>> preds;
  for (const auto& t : test) preds.push_back(knn_predict_take(knn, t.take, c.jobs));
  write_predictions(run, test, preds);
}

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::size_t joints = 0;
  std::string baseline;
  std::string pred_b;
  double eps = MetricOptions{}.eps;
  double activity_threshold = MetricOptions{}.activity_threshold_kpa;
};

GridD load_baseline(const fs::path& p) {
  const auto j = io::read_json(in_dir_or_file(p, "baseline.json"));
  try {
    return j.at("distribution").get<GridD>();
  } catch (const json::exception& e) {
    throw DataError(p.string() + ": " + e.what());
  }
}

std::vector<FrameError> evaluate_all(const std::vector<NamedTake>& gt, const std::vector<std::vector<PressureFrame>>& pred,
                                     const GridD& baseline, const MetricOptions& opt) {
  std::vector<FrameError> out;
  for (std::uint32_t t = 0; t < gt.size(); ++t) {
    auto e = evaluate_take(gt[t].take, t, pred[t], baseline, opt);
    out.insert(out.end(), e.begin(), e.end());
  }
  return out;
}

void cmd_eval(Run& run, const EvalArgs& a) {
  if (a.joints > kNumJoints) throw UsageError("eval: --joints must be in [0, 25]");
  run.input(a.pred);
  run.input(a.gt);
  const auto gt = load_gt(a.gt);
  const auto pred = load_predictions(a.pred, gt);
  MetricOptions opt;
  opt.eps = a.eps;
  opt.activity_threshold_kpa = a.activity_threshold;
  GridD baseline;
  if (!a.baseline.empty()) {
    run.input(a.baseline);
    baseline = load_baseline(a.baseline);
  } else {
    baseline = baseline_distribution(concat_gt(gt), gt.front().take.footmask);
  }
  const auto all = evaluate_all(gt, pred, baseline, opt);
  const auto frames = filter_min_joints(all, a.joints);
  io::write_file(run.path("frame_errors.csv"), frame_errors_csv(frames));

  std::vector<std::string> subjects;
  std::vector<SubjectMeta> metas;
  for (const auto& t : gt)
    if (std::find(subjects.begin(), subjects.end(), t.take.subject.id) == subjects.end()) {
      subjects.push_back(t.take.subject.id);
      metas.push_back(t.take.subject);
    }
  std::vector<SubjectStats> by_subject;
  std::vector<double> all_mae;
  for (const auto& s : subjects) {
    std::vector<double> v;
    for (const auto& f : frames)
      if (gt[f.ref.take].take.subject.id == s) v.push_back(f.mae);
    by_subject.push_back({s, aggregate(v)});
  }
  for (const auto& f : frames) all_mae.push_back(f.mae);
  auto summary = by_subject;
  summary.push_back({"all", aggregate(all_mae)});
  io::write_file(run.path("summary.csv"), subject_stats_csv(summary));
  io::write_file(run.path("sensitivity.csv"), sensitivity_csv(joint_count_sensitivity(all)));
  for (const char* mode : {"mass", "height", "both"})
    io::write_file(run.path(std::string("normalized_") + mode + ".csv"),
                   subject_stats_csv(normalized_mae(by_subject, metas, parse_mass_height_mode(mode))));

  json names = json::array();
  for (const auto& t : gt) names.push_back(t.name);
  io::write_json(run.path("eval.json"), {{"takes", names},
                                         {"min_valid_joints", a.joints},
                                         {"frames_total", all.size()},
                                         {"frames", frames.size()},
                                         {"baseline", a.baseline.empty() ? "ground_truth_mean" : "file"},
                                         {"mae_kpa", stats_json(aggregate(all_mae))},
                                         {"sim", metric_mean(frames, &FrameError::sim)},
                                         {"kld", metric_mean(frames, &FrameError::kld)},
                                         {"ig_bits", metric_mean(frames, &FrameError::ig)}});

  if (!a.pred_b.empty()) {
    run.input(a.pred_b);
    const auto frames_b = filter_min_joints(evaluate_all(gt, load_predictions(a.pred_b, gt), baseline, opt), a.joints);
    std::vector<double> mae_a, mae_b;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      mae_a.push_back(frames[i].mae);
      mae_b.push_back(frames_b[i].mae);
    }
    auto result = [&](bool population) {
      const TTestResult r = paired_t_test(mae_a, mae_b, population);
      return json{{"n", r.n}, {"mean_diff", r.mean_diff}, {"t", r.t}, {"p", r.p}};
    };
    io::write_json(run.path("ttest.json"), {{"difference", "mae(pred) - mae(pred_b)"},
                                            {"sample_std", result(false)},
                                            {"population_std", result(true)}});
  }
}

struct StabilityArgs {
  std::string pred;
  std::string gt;
  double threshold = kDefaultActivityKpa;
};

void cmd_stability(Run& run, const Common& c, const StabilityArgs& a) {
  run.input(a.pred);
  run.input(a.gt);
  const auto gt = load_gt(a.gt);
  const auto pred = concat(load_predictions(a.pred, gt));
  const auto frames = analyze_stability(concat_gt(gt), pred, concat_placements(gt), a.threshold, c.jobs);
  io::write_file(run.path("stability_frames.csv"), stability_frames_csv(frames));
  const StabilitySummary s = summarize(frames, a.threshold);
  std::vector<CoP2D> g, p;
  for (const auto& f : frames) {
    g.push_back(f.gt_cop);
    p.push_back(f.pred_cop);
  }
  json names = json::array();
  for (const auto& t : gt) names.push_back(t.name);
  io::write_json(run.path("stability.json"),
                 {{"takes", names},
                  {"threshold_kpa", a.threshold},
                  {"frames", s.frames},
                  {"cop_pairs", s.cop_pairs},
                  {"bos_pairs", s.bos_pairs},
                  {"bos_mean_iou", s.bos_pairs ? json(s.mean_iou) : json(nullptr)},
                  {"cop_mean", s.cop_pairs ? to_json(cop_offset_stats(g, p)) : json(nullptr)},
                  {"cop_robust", s.cop_pairs ? to_json(cop_robust_stats(g, p)) : json(nullptr)}});
}

struct SweepArgs {
  std::string pred;
  std::string gt;
  std::string metric = "all";
  std::string thresholds = "1:31:3";
};

void cmd_sweep(Run& run, const Common& c, const SweepArgs& a) {
  if (a.metric != "cop" && a.metric != "bos" && a.metric != "all")
    throw UsageError("sweep: --metric must be cop, bos or all");
  const auto thresholds = parse_thresholds(a.thresholds);
  run.input(a.pred);
  run.input(a.gt);
  const auto gt = load_gt(a.gt);
  const auto rows = threshold_sweep(concat_gt(gt), concat(load_predictions(a.pred, gt)), concat_placements(gt),
                                    thresholds, c.jobs);
  if (a.metric == "all") {
    io::write_file(run.path("sweep.csv"), sweep_csv(rows));
    return;
  }
  const bool cop = a.metric == "cop";
  std::string out = cop ? "threshold_kpa,frames,cop_pairs,cop_d_mean_mm\n" : "threshold_kpa,frames,bos_pairs,bos_mean_iou\n";
  for (const auto& r : rows)
    out += io::format_double(r.threshold) + ',' + std::to_string(r.frames) + ',' +
           std::to_string(cop ? r.cop_pairs : r.bos_pairs) + ',' + stability_detail::num(cop ? r.d_mean : r.mean_iou) +
           '\n';
  io::write_file(run.path("sweep.csv"), out);
}

struct ReportArgs {
  std::string stability;
  std::vector<std::string> sensitivity;
};

double cell(const std::string& s, const std::string& what) { return io::parse_double(s, what); }

void cmd_report(Run& run, const ReportArgs& a) {
  if (a.stability.empty() && a.sensitivity.empty())
    throw UsageError("report: give --stability and/or --sensitivity");
  if (!a.stability.empty()) {
    const fs::path p = in_dir_or_file(a.stability, "stability_frames.csv");
    run.input(p);
    const CsvTable t = read_csv(p);
    const std::size_t gx = t.column("gt_cop_x", p.string()), gy = t.column("gt_cop_y", p.string());
    const std::size_t px = t.column("pred_cop_x", p.string()), py = t.column("pred_cop_y", p.string());
    std::vector<CoP2D> g, q;
    for (const auto& r : t.rows) {
      if (r[gx].empty() || r[gy].empty() || r[px].empty() || r[py].empty()) continue;
      g.push_back({{cell(r[gx], "gt_cop_x"), cell(r[gy], "gt_cop_y")}, true});
      q.push_back({{cell(r[px], "pred_cop_x"), cell(r[py], "pred_cop_y")}, true});
    }
    if (g.empty()) throw DataError(p.string() + ": no frame with both centres of pressure");
    const auto offsets = paired_offsets(g, q);
    const OffsetStats ms = cop_offset_stats(g, q);
    const RobustOffsetStats rs = cop_robust_stats(g, q);
    const std::vector<svg::Circle> circles = {
        {{ms.dx_mean, ms.dy_mean}, ms.d_std, "#d62728", "mean, radius std (D " + svg::num(ms.d_mean) + " mm)"},
        {{rs.dx_median, rs.dy_median}, rs.d_rstd, "#2ca02c", "median, radius rStd (D " + svg::num(rs.d_median) + " mm)"}};
    io::write_file(run.path("offsets.svg"), svg::offset_scatter(offsets, circles, "CoP offset, prediction minus ground truth"));
  }
  if (!a.sensitivity.empty()) {
    static const std::vector<std::string> colours = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"};
    std::vector<svg::Series> series;
    for (std::size_t i = 0; i < a.sensitivity.size(); ++i) {
      const fs::path p = in_dir_or_file(a.sensitivity[i], "sensitivity.csv");
      run.input(p);
      const CsvTable t = read_csv(p);
      const std::size_t jc = t.column("min_valid_joints", p.string()), fc = t.column("frames", p.string()),
                        mc = t.column("mean", p.string());
      svg::Series s;
      s.colour = colours[i % colours.size()];
      s.label = generic(a.sensitivity[i]);
      for (const auto& r : t.rows) {
        if (r[mc].empty() || cell(r[fc], "frames") == 0.0) continue;
        s.points.push_back({cell(r[jc], "min_valid_joints"), cell(r[mc], "mean")});
      }
      std::sort(s.points.begin(), s.points.end(), [](Point2 x, Point2 y) { return x.x < y.x; });
      series.push_back(std::move(s));
    }
    io::write_file(run.path("sensitivity.svg"),
                   svg::line_chart(series, "MAE against minimum valid joints", "minimum valid joints", "mean MAE (kPa)"));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"press2dyn: foot pressure from body pose, with stability analytics"};
  app.set_version_flag("--version", PRESS2DYN_VERSION);
  app.require_subcommand(1);

  struct Sub {
    CLI::App* app;
    Common common;
    std::unique_ptr<Section> section;
  };
  std::map<std::string, Sub> subs;
  auto make = [&](const std::string& name, const std::string& help) -> Sub& {
    Sub& s = subs[name];
    s.app = app.add_subcommand(name, help);
    add_common(s.app, s.common, name);
    s.section = std::make_unique<Section>(s.app, name);
    return s;
  };

  SynthArgs synth;
  {
    Section& s = *make("synth", "Generate a synthetic cohort").section;
    s.add("frames", synth.frames, "Frames per subject at 10 Hz");
    s.add("subjects", synth.subjects, "Number of subjects");
    s.flag("raw", synth.raw, "Write 50/100 Hz raw streams instead of synchronized takes");
    s.add("pixels_per_mm", synth.pixels_per_mm, "Image scale at the reference depth");
    s.add("camera_distance_mm", synth.camera_distance_mm, "Camera depth; 0 for orthographic");
    s.add("pose_noise_px", synth.pose_noise_px, "Keypoint noise standard deviation");
    s.add("joint_dropout", synth.joint_dropout, "Per-joint detection failure rate");
  }
  IngestArgs ingest;
  {
    Section& s = *make("ingest", "Synchronize a raw recording to 10 Hz").section;
    s.add("input", ingest.input, "Raw take directory");
    s.add("offset_frames", ingest.offset_frames, "Pose frame offset added before pairing");
  }
  PreprocessArgs prep;
  {
    Section& s = *make("preprocess", "Fit pose and pressure normalizers").section;
    s.add("data", prep.data, "Cohort root or take directory");
    s.add("scaling", prep.scaling, "Pressure scaling: max or mass_area");
    s.add("test_subject", prep.test_subject, "Held-out subject; empty fits on every subject");
    s.add("validation_fraction", prep.validation_fraction, "Trailing validation share of the pool");
  }
  TrainArgs tr;
  {
    Section& s = *make("train", "Train PressNet-Simple (pns) or PressNet (pn)").section;
    s.add("data", tr.data, "Cohort root");
    s.add("arch", tr.arch, "pns or pn");
    s.add("depth", tr.depth, "pns residual blocks");
    s.add("width", tr.width, "pns hidden width");
    s.add("dropout", tr.dropout, "Dropout rate");
    s.add("base_channels", tr.base_channels, "pn channels of the seed map");
    s.add("block_fc_rank", tr.block_fc_rank, "pn rank of the per-block dense branch");
    s.add("epochs", tr.epochs, "Epochs (architecture default when absent)");
    s.add("batch_size", tr.batch_size, "Mini-batch size (architecture default when absent)");
    s.add("lr", tr.lr, "Base learning rate (architecture default when absent)");
    s.add("decay_factor", tr.decay_factor, "Step decay factor (architecture default when absent)");
    s.add("decay_every", tr.decay_every, "Epochs between decays (architecture default when absent)");
    s.add("max_steps", tr.max_steps, "Stop after this many optimizer steps; 0 disables");
    s.add("target_mse", tr.target_mse, "Stop once validation MSE falls below; 0 disables");
    s.add("scaling", tr.scaling, "Pressure scaling: max or mass_area");
    s.add("test_subject", tr.test_subject, "Held-out subject; empty trains on every subject");
    s.add("validation_fraction", tr.validation_fraction, "Trailing validation share of the pool");
  }
  PredictArgs pr;
  {
    Section& s = *make("predict", "Predict pressure with a trained model").section;
    s.add("model", pr.model, "Train run directory");
    s.add("data", pr.data, "Cohort root or take directory");
    s.add("subject", pr.subject, "Only predict takes of this subject");
  }
  KnnArgs kn;
  {
    Section& s = *make("knn", "Weighted KNN prediction for a held-out subject").section;
    s.add("data", kn.data, "Cohort root");
    s.add("k", kn.k, "Neighbours");
    s.flag("raw_coords", kn.raw_coords, "Search on centred pixel coordinates instead of z-scores");
    s.add("test_subject", kn.test_subject, "Held-out subject (required)");
  }
  EvalArgs ev;
  {
    Section& s = *make("eval", "Per-frame pressure metrics and aggregates").section;
    s.add("pred", ev.pred, "Prediction file, directory or root");
    s.add("gt", ev.gt, "Ground-truth take, pressure file inside a take, or cohort root");
    s.add("joints", ev.joints, "Keep frames with at least this many valid joints; 0 keeps all");
    s.add("baseline", ev.baseline, "Baseline distribution file or train run directory");
    s.add("pred_b", ev.pred_b, "Second prediction set for a paired t-test");
    s.add("eps", ev.eps, "Distribution regularizer");
    s.add("activity_threshold", ev.activity_threshold, "Fixation threshold for information gain (kPa)");
  }
  StabilityArgs st;
  {
    Section& s = *make("stability", "Centre of pressure and base of support analysis").section;
    s.add("pred", st.pred, "Prediction file, directory or root");
    s.add("gt", st.gt, "Ground-truth take or cohort root");
    s.add("threshold", st.threshold, "Activity threshold (kPa)");
  }
  SweepArgs sw;
  {
    Section& s = *make("sweep", "Stability metrics across activity thresholds").section;
    s.add("pred", sw.pred, "Prediction file, directory or root");
    s.add("gt", sw.gt, "Ground-truth take or cohort root");
    s.add("metric", sw.metric, "cop, bos or all");
    s.add("thresholds", sw.thresholds, "first:last:step in kPa");
  }
  ReportArgs rp;
  {
    Section& s = *make("report", "Render SVG figures from earlier runs").section;
    s.add("stability", rp.stability, "Stability run directory or frames CSV");
    s.add("sensitivity", rp.sensitivity, "Eval run directories or sensitivity CSVs");
  }
  for (auto& [name, s] : subs) s.section->add("out", s.common.out, "Run output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  std::vector<Section*> sections;
  for (auto& [name, s] : subs) sections.push_back(s.section.get());
  try {
    for (auto& [name, s] : subs) {
      if (!s.app->parsed()) continue;
      const json resolved = resolve(s.common, *s.section, sections);
      auto require = [&](const std::string& v, const char* flag) {
        if (v.empty()) throw UsageError(name + ": " + flag + " is required");
      };
      if (name == "ingest") require(ingest.input, "--input");
      if (name == "preprocess") require(prep.data, "--data");
      if (name == "train") require(tr.data, "--data");
      if (name == "predict") require(pr.model, "--model"), require(pr.data, "--data");
      if (name == "knn") require(kn.data, "--data"), require(kn.test_subject, "--test-subject");
      if (name == "eval") require(ev.pred, "--pred"), require(ev.gt, "--gt");
      if (name == "stability") require(st.pred, "--pred"), require(st.gt, "--gt");
      if (name == "sweep") require(sw.pred, "--pred"), require(sw.gt, "--gt");
      Run run(name, s.common, resolved);
      if (name == "synth") cmd_synth(run, s.common, synth);
      else if (name == "ingest") cmd_ingest(run, ingest);
      else if (name == "preprocess") cmd_preprocess(run, prep);
      else if (name == "train") cmd_train(run, s.common, *s.section, tr);
      else if (name == "predict") cmd_predict(run, pr);
      else if (name == "knn") cmd_knn(run, s.common, kn);
      else if (name == "eval") cmd_eval(run, ev);
      else if (name == "stability") cmd_stability(run, s.common, st);
      else if (name == "sweep") cmd_sweep(run, s.common, sw);
      else if (name == "report") cmd_report(run, rp);
      run.finish();
      std::cout << run.out().string() << '\n';
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
