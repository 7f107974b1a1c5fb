// Copyright 2026 The qsit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef QSIT_CLI_HPP
#define QSIT_CLI_HPP

#include <algorithm>
#include <cctype>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qsit/config.hpp"
#include "qsit/controller.hpp"
#include "qsit/datasets.hpp"
#include "qsit/error.hpp"
#include "qsit/levels.hpp"
#include "qsit/metrics.hpp"
#include "qsit/mixopt.hpp"
#include "qsit/runrecord.hpp"
#include "qsit/scoring.hpp"
#include "qsit/version.hpp"

namespace qsit::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitOracle = 3;

namespace detail {

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  return out;
}

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<double> parse_number_list(const std::string& text, char sep) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("'" + text + "' is not a '" + std::string(1, sep) + "'-separated number list");
    }
  }
  return out;
}

struct Recorder {
  RunRecord record;
  std::vector<std::string> settings;
  std::vector<std::string> inputs;

  Recorder(std::string command, std::uint64_t seed) {
    record.command = std::move(command);
    record.seed = seed;
    record.started = timestamp_now();
  }
  void set(const std::string& key, const std::string& value) { settings.push_back(key + "=" + value); }
  void input(const std::string& path) {
    if (!path.empty()) inputs.push_back(path);
  }
  void finish(const std::vector<std::string>& outputs) {
    record.outputs = outputs;
    record.config_hash = config_hash(record.command, settings, inputs);
    record.finished = timestamp_now();
    write_run_record(record, outputs.front());
  }
};

struct Format {
  std::string value = "text";
};

inline void add_format(CLI::App* sub, Format& f) {
  sub->add_option("--format", f.value, "Report format on stdout")
      ->check(CLI::IsMember({"text", "json"}))
      ->envname("QSIT_FORMAT")
      ->capture_default_str();
}

}  // namespace detail

/// Binds every subcommand to `app`. Handlers run from the parse callbacks
/// and report through `out` / `err`.
class Cli {
 public:
  Cli(std::ostream& out, std::ostream& err) : out_(out), err_(err) {
    app_.name("qsit");
    app_.description("Rating-level IQA scoring, evaluation, and data-mixture search");
    app_.set_version_flag("--version", kVersion);
    app_.require_subcommand(1);
    add_convert();
    add_score();
    add_eval_iqa();
    add_eval_mcq();
    add_eval_desc();
    add_subsample();
    add_mix_search();
    add_mix_adjust();
    add_sample();
    bind_env();
  }

  int run(std::vector<std::string> args) {
    std::reverse(args.begin(), args.end());
    try {
      app_.parse(std::move(args));
    } catch (const CLI::CallForHelp&) {
      out_ << (active_ ? active_->help() : app_.help());
      return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
      out_ << app_.help("", CLI::AppFormatMode::All);
      return kExitOk;
    } catch (const CLI::CallForVersion&) {
      out_ << kVersion << '\n';
      return kExitOk;
    } catch (const CLI::Success&) {
      out_ << app_.help();
      return kExitOk;
    } catch (const CLI::ParseError& e) {
      err_ << "qsit: " << e.what() << '\n';
      return kExitConfig;
    } catch (const OracleError& e) {
      err_ << "qsit: oracle failure: " << e.what() << '\n';
      return kExitOracle;
    } catch (const Error& e) {
      err_ << "qsit: " << e.what() << '\n';
      return e.exit_code();
    } catch (const std::exception& e) {
      err_ << "qsit: " << e.what() << '\n';
      return kExitData;
    }
    return status_;
  }

 private:
  static std::string env_token(std::string s) {
    for (char& c : s) c = c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
  }

  // Options shared by several commands carry QSIT_<OPTION>; the rest get
  // QSIT_<COMMAND>_<OPTION>.
  void bind_env() {
    for (auto* sub : app_.get_subcommands({})) {
      for (auto* opt : sub->get_options()) {
        if (!opt->get_envname().empty() || opt->get_lnames().empty()) continue;
        if (opt->get_lnames().front() == "help") continue;
        opt->envname("QSIT_" + env_token(sub->get_name()) + "_" + env_token(opt->get_lnames().front()));
      }
    }
  }

  template <typename F>
  void on_run(CLI::App* sub, F body) {
    sub->parse_complete_callback([this, sub] { active_ = sub; });
    sub->callback([this, body] { status_ = body(); });
  }

  // convert ---------------------------------------------------------------
  void add_convert() {
    auto* sub = app_.add_subcommand("convert", "Convert a MOS table into D1 scoring instruction pairs");
    sub->add_option("--mos", convert_.mos, "MOS table with image_id and mos columns")->required();
    sub->add_option("--min", convert_.min, "Lowest score of the dataset scale")->required();
    sub->add_option("--max", convert_.max, "Highest score of the dataset scale")->required();
    sub->add_option("--delimiter", convert_.delim, "Column delimiter")->capture_default_str();
    sub->add_flag("--lenient", convert_.lenient, "Skip out-of-scale rows instead of failing");
    sub->add_flag("--inline-system", convert_.inline_system,
                  "Fold the system prefix into the question turn");
    sub->add_option("--out", convert_.out, "Output instruction-pair file (JSON lines)")->required();
    on_run(sub, [this] { return cmd_convert(); });
  }

  int cmd_convert() {
    const LevelScale scale(convert_.min, convert_.max);
    if (convert_.delim.size() != 1) throw ConfigError("delimiter must be one character");
    detail::Recorder rec("convert", 0);
    rec.set("min", detail::fmt_double(convert_.min));
    rec.set("max", detail::fmt_double(convert_.max));
    rec.set("delimiter", convert_.delim);
    rec.set("lenient", convert_.lenient ? "1" : "0");
    rec.set("inline_system", convert_.inline_system ? "1" : "0");
    rec.input(convert_.mos);

    auto in = detail::open_input(convert_.mos);
    auto ingest = ingest_mos(in, scale, {convert_.delim[0], !convert_.lenient});
    for (const auto& d : ingest.diagnostics) err_ << "warning: " << d << '\n';
    if (ingest.records.empty()) throw DataError("'" + convert_.mos + "' holds no MOS records");

    const auto pairs = emit_d1_pairs(ingest.records, scale);
    {
      auto out = detail::open_output(convert_.out);
      write_pairs(out, pairs, convert_.inline_system);
    }
    std::array<std::size_t, 5> hist{};
    for (const auto& r : ingest.records) ++hist[static_cast<std::size_t>(score_to_level(r.mos, scale).index - 1)];
    out_ << "converted " << pairs.size() << " records (mean " << ingest.stats.mean << ", std "
         << ingest.stats.stddev << ")\n";
    for (std::size_t i = 0; i < hist.size(); ++i) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "  %-10s %zu\n", std::string(kItuLabels[i]).c_str(), hist[i]);
      out_ << buf;
    }
    rec.finish({convert_.out});
    return kExitOk;
  }

  // score -----------------------------------------------------------------
  void add_score() {
    auto* sub = app_.add_subcommand("score", "Turn level-token logits into predicted quality scores");
    sub->add_option("--logits", score_.logits, "Logits file (JSON lines)")->required();
    sub->add_option("--mode", score_.mode, "five-level or binary")
        ->check(CLI::IsMember({"five-level", "binary"}))
        ->capture_default_str();
    sub->add_flag("--strict", score_.strict, "Abort on the first malformed record");
    sub->add_option("--rescale-min", score_.rescale_min, "Map scores affinely onto [min, max]");
    sub->add_option("--rescale-max", score_.rescale_max, "Upper end of the rescale range");
    sub->add_option("--out", score_.out, "Output scores file (JSON lines)")->required();
    on_run(sub, [this] { return cmd_score(); });
  }

  int cmd_score() {
    BatchOptions opts;
    opts.mode = score_.mode == "binary" ? ScoreMode::kBinary : ScoreMode::kFiveLevel;
    opts.strict = score_.strict;
    if (score_.rescale_min || score_.rescale_max) {
      if (!score_.rescale_min || !score_.rescale_max) {
        throw ConfigError("--rescale-min and --rescale-max go together");
      }
      opts.rescale.emplace(*score_.rescale_min, *score_.rescale_max);
    }
    detail::Recorder rec("score", 0);
    rec.set("mode", score_.mode);
    rec.set("strict", score_.strict ? "1" : "0");
    if (opts.rescale) {
      rec.set("rescale", detail::fmt_double(opts.rescale->min_score()) + "," +
                             detail::fmt_double(opts.rescale->max_score()));
    }
    rec.input(score_.logits);

    auto in = detail::open_input(score_.logits);
    const auto result = score_batch(in, opts);
    for (const auto& d : result.diagnostics) {
      err_ << "warning: line " << d.line << ": " << d.message << '\n';
    }
    {
      auto out = detail::open_output(score_.out);
      write_scores(out, result.scores);
    }
    out_ << "scored " << result.scores.size() << " records, " << result.diagnostics.size()
         << " malformed\n";
    rec.finish({score_.out});
    return kExitOk;
  }

  // eval-iqa --------------------------------------------------------------
  void add_eval_iqa() {
    auto* sub = app_.add_subcommand("eval-iqa", "SRCC, PLCC and their mean against MOS");
    sub->add_option("--scores", iqa_.scores, "Scores file (JSON lines with id, score)")->required();
    sub->add_option("--mos", iqa_.mos, "MOS table with image_id and mos columns")->required();
    sub->add_option("--delimiter", iqa_.delim, "MOS column delimiter")->capture_default_str();
    sub->add_flag("--logistic", iqa_.logistic, "Fit a 4-parameter logistic before PLCC");
    sub->add_option("--report", iqa_.report, "Also write the JSON report to this file");
    detail::add_format(sub, iqa_.format);
    on_run(sub, [this] { return cmd_eval_iqa(); });
  }

  int cmd_eval_iqa() {
    if (iqa_.delim.size() != 1) throw ConfigError("delimiter must be one character");
    std::unordered_map<std::string, double> scores;
    std::size_t duplicates = 0;
    {
      auto in = detail::open_input(iqa_.scores);
      std::string line;
      std::size_t lineno = 0;
      while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
          const auto j = nlohmann::json::parse(line);
          const auto id = j.at("id").get<std::string>();
          const double s = j.at("score").get<double>();
          if (!scores.emplace(id, s).second) ++duplicates;
        } catch (const nlohmann::json::exception& e) {
          throw ParseError(iqa_.scores + " line " + std::to_string(lineno) + ": " + e.what(), lineno);
        }
      }
    }
    auto in = detail::open_input(iqa_.mos);
    const auto table = read_mos_table(in, {iqa_.delim[0], true});

    std::vector<double> pred, gt;
    std::size_t unmatched_mos = 0;
    std::unordered_map<std::string, bool> used;
    for (const auto& r : table.records) {
      auto it = scores.find(r.image_id);
      if (it == scores.end()) {
        ++unmatched_mos;
        continue;
      }
      pred.push_back(it->second);
      gt.push_back(r.mos);
      used[r.image_id] = true;
    }
    const std::size_t unmatched_scores = scores.size() - used.size();
    if (pred.empty()) throw DataError("scores and MOS table share no ids");
    if (unmatched_mos || unmatched_scores) {
      err_ << "warning: " << unmatched_scores << " scored ids without MOS, " << unmatched_mos
           << " MOS rows without a score\n";
    }
    if (duplicates) err_ << "warning: " << duplicates << " duplicate score ids ignored\n";

    const PairedSample sample{pred, gt};
    const double s = srcc(sample);
    const double p = plcc(sample, {iqa_.logistic});
    nlohmann::ordered_json rep{{"n", pred.size()},
                               {"srcc", s},
                               {"plcc", p},
                               {"avg", 0.5 * (s + p)},
                               {"plcc_mapping", iqa_.logistic ? "logistic4" : "none"},
                               {"unmatched_scores", unmatched_scores},
                               {"unmatched_mos", unmatched_mos}};
    if (iqa_.format.value == "json") {
      out_ << rep.dump(2) << '\n';
    } else {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%-8s %8s %8s %8s\n%-8zu %8.4f %8.4f %8.4f\n", "n", "SRCC",
                    "PLCC", "avg", pred.size(), s, p, 0.5 * (s + p));
      out_ << buf;
    }
    if (!iqa_.report.empty()) {
      auto out = detail::open_output(iqa_.report);
      out << rep.dump(2) << '\n';
    }
    return kExitOk;
  }

  // eval-mcq / eval-desc ----------------------------------------------------
  void add_eval_mcq() {
    auto* sub = app_.add_subcommand("eval-mcq", "Multiple-choice accuracy by question type and quadrant");
    sub->add_option("--answers", mcq_.input, "Answers file (JSON lines)")->required();
    sub->add_option("--report", mcq_.report, "Also write the JSON report to this file");
    detail::add_format(sub, mcq_.format);
    on_run(sub, [this] { return cmd_eval_mcq(); });
  }

  template <typename Parse>
  static auto read_jsonl(const std::string& path, Parse parse) {
    std::vector<decltype(parse(nlohmann::json{}))> out;
    auto in = detail::open_input(path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        out.push_back(parse(nlohmann::json::parse(line)));
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + " line " + std::to_string(lineno) + ": " + e.what(), lineno);
      } catch (const DataError& e) {
        throw ParseError(path + " line " + std::to_string(lineno) + ": " + e.what(), lineno);
      }
    }
    return out;
  }

  void emit_report(const nlohmann::ordered_json& doc, const std::string& text,
                   const std::string& format, const std::string& report_path) {
    out_ << (format == "json" ? doc.dump(2) + "\n" : text);
    if (!report_path.empty()) {
      auto out = detail::open_output(report_path);
      out << doc.dump(2) << '\n';
    }
  }

  int cmd_eval_mcq() {
    const auto records = read_jsonl(mcq_.input, parse_mcq_record);
    const auto rep = mcq_report(records);
    emit_report(to_json(rep), to_text(rep), mcq_.format.value, mcq_.report);
    return kExitOk;
  }

  void add_eval_desc() {
    auto* sub = app_.add_subcommand("eval-desc", "Aggregate 0/1/2 description ratings per dimension");
    sub->add_option("--ratings", desc_.input, "Ratings file (JSON lines)")->required();
    sub->add_option("--report", desc_.report, "Also write the JSON report to this file");
    detail::add_format(sub, desc_.format);
    on_run(sub, [this] { return cmd_eval_desc(); });
  }

  int cmd_eval_desc() {
    const auto ratings = read_jsonl(desc_.input, parse_description_rating);
    const auto rep = description_report(ratings);
    emit_report(to_json(rep), to_text(rep), desc_.format.value, desc_.report);
    return kExitOk;
  }

  // subsample -------------------------------------------------------------
  void add_subsample() {
    auto* sub = app_.add_subcommand("subsample", "Draw a MOS-balanced subset of a MOS table");
    sub->add_option("--mos", sub_.mos, "MOS table with image_id and mos columns")->required();
    sub->add_option("--target", sub_.target, "Number of records to keep")->required();
    sub->add_option("--bins", sub_.bins, "Equal-width MOS bins")->capture_default_str();
    sub->add_option("--seed", sub_.seed, "Random seed")->envname("QSIT_SEED")->capture_default_str();
    sub->add_option("--delimiter", sub_.delim, "Column delimiter")->capture_default_str();
    sub->add_option("--out", sub_.out, "Output MOS table")->required();
    on_run(sub, [this] { return cmd_subsample(); });
  }

  int cmd_subsample() {
    if (sub_.delim.size() != 1) throw ConfigError("delimiter must be one character");
    detail::Recorder rec("subsample", sub_.seed);
    rec.set("target", std::to_string(sub_.target));
    rec.set("bins", std::to_string(sub_.bins));
    rec.set("seed", std::to_string(sub_.seed));
    rec.set("delimiter", sub_.delim);
    rec.input(sub_.mos);

    auto in = detail::open_input(sub_.mos);
    const auto table = read_mos_table(in, {sub_.delim[0], true});
    const auto picked = subsample_balanced(table.records, sub_.target, sub_.bins, sub_.seed);
    {
      auto out = detail::open_output(sub_.out);
      write_mos(out, picked, sub_.delim[0]);
    }
    const auto after = pool_stats(picked);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-9s %8s %10s %10s\n%-9s %8zu %10.4f %10.4f\n%-9s %8zu %10.4f %10.4f\n",
                  "", "size", "mean", "std", "original", table.stats.size, table.stats.mean,
                  table.stats.stddev, "sampled", after.size, after.mean, after.stddev);
    out_ << buf;
    rec.finish({sub_.out});
    return kExitOk;
  }

  // mix-search / mix-adjust / sample ---------------------------------------
  struct PipelineFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::optional<int> repeats;
    std::string work_dir;
    std::string out;
  };

  void add_pipeline_flags(CLI::App* sub, PipelineFlags& f, bool sweep) {
    sub->add_option("--config", f.config, "Pipeline configuration (YAML)")->required()->envname("QSIT_CONFIG");
    sub->add_option("--seed", f.seed, "Random seed (overrides config)")->envname("QSIT_SEED");
    sub->add_option("--work-dir", f.work_dir, "Directory for manifests (overrides config)")
        ->envname("QSIT_WORK_DIR");
    if (sweep) {
      sub->add_option("--jobs", f.jobs, "Concurrent oracle calls during sweeps")->envname("QSIT_JOBS");
      sub->add_option("--repeats", f.repeats, "Oracle calls per grid point")->envname("QSIT_REPEATS");
    }
  }

  struct Resolved {
    PipelineConfig cfg;
    std::uint64_t seed = 0;
    std::string work_dir;
    std::array<Pool, 3> pools;
  };

  Resolved resolve(const PipelineFlags& f, bool need_pools) {
    Resolved r;
    r.cfg = load_config(f.config);
    r.seed = f.seed ? *f.seed : r.cfg.seed.value_or(0);
    r.work_dir = !f.work_dir.empty() ? f.work_dir : r.cfg.work_dir.value_or("qsit-work");
    if (f.jobs) r.cfg.jobs = *f.jobs;
    if (f.repeats) r.cfg.repeats = *f.repeats;
    if (need_pools) {
      for (PoolTag t : kPoolTags) {
        const auto k = static_cast<std::size_t>(t);
        r.pools[k] = load_pool_file(t, r.cfg.pool_paths[k]);
        if (r.pools[k].size() == 0) err_ << "warning: pool " << to_string(t) << " is empty\n";
      }
    }
    return r;
  }

  static void record_common(detail::Recorder& rec, const PipelineFlags& f, const Resolved& r) {
    rec.input(f.config);
    for (const auto& p : r.cfg.pool_paths) rec.input(p);
    rec.set("seed", std::to_string(r.seed));
    rec.set("work_dir", r.work_dir);
  }

  void add_mix_search() {
    auto* sub = app_.add_subcommand("mix-search", "Coarse two-stage mixture-ratio search");
    add_pipeline_flags(sub, search_, true);
    sub->add_option("--out", search_.out, "Coarse result file (JSON)")->required();
    on_run(sub, [this] { return cmd_mix_search(); });
  }

  int cmd_mix_search() {
    auto r = resolve(search_, true);
    detail::Recorder rec("mix-search", r.seed);
    record_common(rec, search_, r);
    rec.set("jobs", std::to_string(r.cfg.jobs.value_or(1)));
    rec.set("repeats", std::to_string(r.cfg.repeats.value_or(3)));

    CoarseSearchConfig sc;
    sc.seed = r.seed;
    sc.repeats = r.cfg.repeats.value_or(3);
    sc.jobs = r.cfg.jobs.value_or(1);
    sc.axis = r.cfg.axis;
    if (r.cfg.stage1_ratios) sc.stage1_ratios = *r.cfg.stage1_ratios;
    if (r.cfg.stage2_ratios) sc.stage2_ratios = *r.cfg.stage2_ratios;
    sc.stage1_scoring_weight = r.cfg.stage1_scoring_weight;
    sc.stage2_scoring_weight = r.cfg.stage2_scoring_weight;
    sc.base_d1 = r.cfg.base_d1;
    sc.work_dir = r.work_dir;
    sc.record_path = search_.out;

    const auto oracle = make_oracle(r.cfg);
    CoarseResult res;
    try {
      res = coarse_search(*oracle, r.pools, sc);
    } catch (...) {
      rec.finish({search_.out});
      throw;
    }
    for (const auto& w : res.warnings) err_ << "warning: " << w << '\n';
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "D2:D3 = %.4f\n|D2+D3|:D1 = %.4f\nD1:D2:D3 = %.2f:%.2f:%.2f\nlambda_loss = %.6g\n",
                  res.d2_to_d3, res.mixed_to_d1, res.ratio.d1, res.ratio.d2, res.ratio.d3,
                  res.lambda_loss);
    out_ << buf;
    rec.finish({search_.out});
    return kExitOk;
  }

  void add_mix_adjust() {
    auto* sub = app_.add_subcommand("mix-adjust", "Per-epoch loss-ratio mixture adjustment");
    add_pipeline_flags(sub, adjust_, false);
    sub->add_option("--coarse", adjust_coarse_, "Coarse result written by mix-search")->required();
    sub->add_option("--max-epochs", adjust_max_epochs_, "Epoch limit (overrides config)")
        ->envname("QSIT_MAX_EPOCHS");
    sub->add_option("--tolerance", adjust_tolerance_, "Relative hold band (overrides config)")
        ->envname("QSIT_TOLERANCE");
    sub->add_option("--factor", adjust_factor_, "Increase factor (overrides config)")
        ->envname("QSIT_FACTOR");
    sub->add_option("--out", adjust_.out, "Trajectory file (JSON lines)")->required();
    on_run(sub, [this] { return cmd_mix_adjust(); });
  }

  int cmd_mix_adjust() {
    auto r = resolve(adjust_, true);
    const auto coarse_text = read_text_file(adjust_coarse_, ErrorKind::kData);
    nlohmann::json coarse_json;
    try {
      coarse_json = nlohmann::json::parse(coarse_text);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("coarse result '" + adjust_coarse_ + "' is not JSON: " + e.what());
    }
    const auto coarse = coarse_summary_from_json(coarse_json);

    ControllerConfig cc;
    cc.seed = r.seed;
    cc.max_epochs = adjust_max_epochs_.value_or(r.cfg.max_epochs);
    cc.tolerance = adjust_tolerance_.value_or(r.cfg.tolerance);
    cc.factor = adjust_factor_.value_or(r.cfg.factor);
    cc.base_d1 = r.cfg.base_d1;
    cc.work_dir = r.work_dir;
    cc.trajectory_path = adjust_.out;
    Sha256 h;
    h.update(coarse_text);
    cc.coarse_reference = adjust_coarse_ + "#sha256:" + h.hex();

    detail::Recorder rec("mix-adjust", r.seed);
    record_common(rec, adjust_, r);
    rec.input(adjust_coarse_);
    rec.set("max_epochs", std::to_string(cc.max_epochs));
    rec.set("tolerance", detail::fmt_double(cc.tolerance));
    rec.set("factor", detail::fmt_double(cc.factor));

    const auto oracle = make_oracle(r.cfg);
    Trajectory traj;
    try {
      traj = run_loop(*oracle, coarse, r.pools, cc);
    } catch (...) {
      rec.finish({adjust_.out});
      throw;
    }
    for (const auto& w : traj.warnings) err_ << "warning: " << w << '\n';
    for (const auto& e : traj.epochs) {
      char buf[200];
      std::snprintf(buf, sizeof buf, "epoch %d  D1 %zu  D2 %zu  D3 %zu  ratio %.6f  %s\n", e.epoch,
                    e.counts[0], e.counts[1], e.counts[2], e.decision.loss_ratio,
                    std::string(to_string(e.decision.action)).c_str());
      out_ << buf;
    }
    rec.finish({adjust_.out});
    return kExitOk;
  }

  void add_sample() {
    auto* sub = app_.add_subcommand("sample", "Write a training manifest for a mixture ratio");
    add_pipeline_flags(sub, sample_, false);
    auto* ratio = sub->add_option("--ratio", sample_ratio_, "D1:D2:D3 weights, e.g. 1:2.5:1.04");
    auto* counts = sub->add_option("--counts", sample_counts_, "Exact per-pool counts, e.g. 16000,40000,16640");
    ratio->excludes(counts);
    sub->add_option("--base-d1", sample_base_, "D1 count the ratio is scaled to (default: |D1|)");
    sub->add_flag("--replace", sample_replace_, "Sample with replacement when a count exceeds its pool");
    sub->add_option("--out", sample_.out, "Manifest file (JSON lines)")->required();
    on_run(sub, [this] { return cmd_sample(); });
  }

  int cmd_sample() {
    auto r = resolve(sample_, true);
    PoolCounts counts{};
    if (!sample_counts_.empty()) {
      const auto v = detail::parse_number_list(sample_counts_, ',');
      if (v.size() != 3) throw ConfigError("--counts needs three values");
      for (std::size_t i = 0; i < 3; ++i) {
        if (v[i] < 0 || v[i] != std::floor(v[i])) throw ConfigError("--counts must be whole numbers");
        counts[i] = static_cast<std::size_t>(v[i]);
      }
    } else if (!sample_ratio_.empty()) {
      const auto v = detail::parse_number_list(sample_ratio_, ':');
      if (v.size() != 3 || !(v[0] > 0) || v[1] < 0 || v[2] < 0) {
        throw ConfigError("--ratio needs three weights with a positive D1 weight");
      }
      const double base = static_cast<double>(sample_base_.value_or(r.pools[0].size()));
      for (std::size_t i = 0; i < 3; ++i) counts[i] = round_half_up(base * v[i] / v[0]);
    } else {
      throw ConfigError("sample needs --ratio or --counts");
    }

    detail::Recorder rec("sample", r.seed);
    record_common(rec, sample_, r);
    rec.set("counts", std::to_string(counts[0]) + "," + std::to_string(counts[1]) + "," +
                          std::to_string(counts[2]));
    rec.set("replace", sample_replace_ ? "1" : "0");

    const Manifest m = sample_mixture(r.pools, counts, r.seed, sample_replace_);
    auto out = detail::open_output(sample_.out);
    write_manifest(out, m);
    out.close();
    out_ << "sampled " << total(counts) << " pairs (D1 " << counts[0] << ", D2 " << counts[1]
         << ", D3 " << counts[2] << ")\n";
    rec.finish({sample_.out});
    return kExitOk;
  }

  std::ostream& out_;
  std::ostream& err_;
  CLI::App app_;
  CLI::App* active_ = nullptr;
  int status_ = kExitOk;

  struct {
    std::string mos, delim = ",", out;
    double min = 0, max = 0;
    bool lenient = false, inline_system = false;
  } convert_;
  struct {
    std::string logits, mode = "five-level", out;
    bool strict = false;
    std::optional<double> rescale_min, rescale_max;
  } score_;
  struct {
    std::string scores, mos, delim = ",", report;
    bool logistic = false;
    detail::Format format;
  } iqa_;
  struct {
    std::string input, report;
    detail::Format format;
  } mcq_, desc_;
  struct {
    std::string mos, delim = ",", out;
    std::size_t target = 0;
    int bins = 10;
    std::uint64_t seed = 0;
  } sub_;
  PipelineFlags search_, adjust_, sample_;
  std::string adjust_coarse_;
  std::optional<int> adjust_max_epochs_;
  std::optional<double> adjust_tolerance_, adjust_factor_;
  std::string sample_ratio_, sample_counts_;
  std::optional<std::size_t> sample_base_;
  bool sample_replace_ = false;
};

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  Cli cli(out, err);
  return cli.run(args);
}

}  // namespace qsit::cli

#endif  // QSIT_CLI_HPP
