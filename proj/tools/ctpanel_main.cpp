#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ctpanel/config.hpp"
#include "ctpanel/featurize.hpp"
#include "ctpanel/io.hpp"
#include "ctpanel/sim.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace ctpanel;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

ordered_json rules_to_json(const RuleSet& rules) {
  ordered_json arr = ordered_json::array();
  for (const auto& rule : rules.rules) {
    ordered_json item;
    item["name"] = rule.name;
    item["required"] = rule.required;
    item["forbidden"] = rule.forbidden;
    arr.push_back(std::move(item));
  }
  return arr;
}

int cmd_featurize(const std::vector<std::string>& session_dirs, const std::string& out_dir,
                  const FeaturizeConfig& config, const std::string& rules_path) {
  fs::create_directories(out_dir);

  ordered_json manifest;
  manifest["schema_version"] = kSchemaVersion;
  manifest["tool_version"] = kVersion;
  ordered_json settings;
  settings["slice_len"] = config.slice_len;
  settings["min_confidence"] = config.min_confidence;
  settings["affect_mode"] = config.affect_dominant_one_hot ? "dominant" : "any_fire";
  settings["alpha_in"] = config.turn.alpha_in;
  settings["alpha_out"] = config.turn.alpha_out;
  settings["turn_epsilon"] = config.turn.epsilon;
  settings["gap_silence"] = config.turn.use_gap_silence;
  settings["min_raters"] = config.rating.min_raters;
  settings["time_sd_k"] = config.rating.time_sd_k;
  settings["rules_file"] = rules_path.empty() ? "<builtin>" : rules_path;
  settings["rules"] =
      rules_to_json(config.rules.rules.empty() ? default_rule_set() : config.rules);
  manifest["settings"] = std::move(settings);
  ordered_json channel_order = ordered_json::array();
  for (int c = 0; c < kNumChannels; ++c) channel_order.push_back(channel_name(c));
  manifest["channel_order"] = std::move(channel_order);
  manifest["sessions"] = ordered_json::array();

  bool any_failed = false;
  for (const auto& dir : session_dirs) {
    ordered_json entry;
    entry["dir"] = dir;
    try {
      const SessionLog session = read_session_dir(dir);
      const auto result = featurize_session(session, config);
      const auto report = validate_panel(result.panel);
      if (!report.ok())
        throw DataError(fmt::format("panel validation failed: {}", report.violations[0]));

      const std::string panel_path =
          (fs::path(out_dir) / fmt::format("{}.panel.jsonl", session.group_id)).string();
      const std::vector<BehaviorPanel> panels = {result.panel};
      write_panels_jsonl(panels, panel_path);

      entry["group_id"] = session.group_id;
      entry["members"] = session.members;
      entry["n_slices"] = result.grid.size();
      entry["panel_file"] = panel_path;
      entry["retained_raters"] = result.curiosity.retained_raters;
      ordered_json subsets;
      for (const auto& [key, subset] : result.curiosity.subsets) {
        ordered_json s;
        s["raters"] = subset.raters;
        s["icc"] = std::isnan(subset.icc) ? ordered_json() : ordered_json(subset.icc);
        subsets[key] = std::move(s);
      }
      entry["rater_subsets"] = std::move(subsets);
      entry["status"] = "ok";
      std::cout << fmt::format("featurized {} -> {}\n", dir, panel_path);
    } catch (const std::exception& e) {
      entry["status"] = "failed";
      entry["error"] = e.what();
      std::cerr << fmt::format("error: session '{}': {}\n", dir, e.what());
      any_failed = true;
    }
    manifest["sessions"].push_back(std::move(entry));
  }

  std::ofstream out(fs::path(out_dir) / "featurize_manifest.json");
  out << manifest.dump(2) << "\n";
  return any_failed ? kExitData : kExitOk;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

int cmd_rate(const std::string& ratings_path, const std::string& out_path,
             const RatingConfig& config) {
  std::vector<RaterScore> ratings;
  std::ifstream in(ratings_path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", ratings_path));
  std::string line;
  if (!std::getline(in, line) ||
      split_fields(line) !=
          std::vector<std::string>({"slice", "member", "rater", "score", "hit_duration"}))
    throw DataError(fmt::format(
        "{}: expected header 'slice,member,rater,score,hit_duration'", ratings_path));
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 5)
      throw DataError(fmt::format("{}:{}: expected 5 fields", ratings_path, line_no));
    try {
      RaterScore r;
      r.slice_index = std::stoi(fields[0]);
      r.member = fields[1];
      r.rater_id = fields[2];
      r.score = std::stoi(fields[3]);
      r.hit_duration = std::stod(fields[4]);
      ratings.push_back(std::move(r));
    } catch (const std::exception&) {
      throw DataError(fmt::format("{}:{}: malformed numeric field", ratings_path, line_no));
    }
  }
  if (ratings.empty()) throw DataError("no ratings found");
  int n_slices = 0;
  for (const auto& r : ratings) n_slices = std::max(n_slices, r.slice_index + 1);

  const auto derived = derive_curiosity(ratings, n_slices, config);
  std::ofstream out(out_path);
  if (!out) throw DataError(fmt::format("cannot write '{}'", out_path));
  out << "member,slice,score,subset_icc\n";
  for (const auto& s : derived.scores) {
    const std::string key =
        config.group_by == RatingConfig::GroupBy::Member ? s.member : std::string("*");
    const auto& subset = derived.subsets.at(key);
    out << s.member << "," << s.slice_index << "," << static_cast<int>(s.score) << ",";
    if (!std::isnan(subset.icc)) out << format_double(subset.icc);
    out << "\n";
  }
  std::cout << fmt::format("wrote {} scores to {}\n", derived.scores.size(), out_path);
  return kExitOk;
}

int cmd_turns(const std::string& turns_path, double slice_len, double session_length,
              const std::string& out_path, const TurnMetricConfig& config) {
  std::vector<TurnEvent> turns;
  std::ifstream in(turns_path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", turns_path));
  std::string line;
  if (!std::getline(in, line) ||
      split_fields(line) != std::vector<std::string>({"speaker", "start", "end"}))
    throw DataError(fmt::format("{}: expected header 'speaker,start,end'", turns_path));
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 3)
      throw DataError(fmt::format("{}:{}: expected 3 fields", turns_path, line_no));
    try {
      turns.push_back({fields[0], std::stod(fields[1]), std::stod(fields[2])});
    } catch (const std::exception&) {
      throw DataError(fmt::format("{}:{}: malformed numeric field", turns_path, line_no));
    }
  }
  if (turns.empty()) throw DataError("no turns found");

  double length = session_length;
  if (length <= 0.0)
    for (const auto& t : turns) length = std::max(length, t.end);

  const auto grid = build_slice_grid(length, slice_len);
  std::vector<MemberId> members;
  for (const auto& t : turns)
    if (std::find(members.begin(), members.end(), t.speaker) == members.end())
      members.push_back(t.speaker);
  std::sort(members.begin(), members.end());

  const auto metrics = slice_turn_metrics(turns, grid, members, config);
  std::ofstream out(out_path);
  if (!out) throw DataError(fmt::format("cannot write '{}'", out_path));
  out << "member,slice,indegree,outdegree\n";
  for (const auto& slice : grid)
    for (const auto& m : members) {
      const auto& v = metrics.at({m, slice.index});
      out << m << "," << slice.index << ",";
      if (v.indegree) out << format_double(*v.indegree);
      out << ",";
      if (v.outdegree) out << format_double(*v.outdegree);
      out << "\n";
    }
  std::cout << fmt::format("wrote turn metrics for {} slices to {}\n", grid.size(),
                           out_path);
  return kExitOk;
}

std::vector<BehaviorPanel> load_panels(const std::vector<std::string>& paths) {
  std::vector<BehaviorPanel> panels;
  for (const auto& path : paths) {
    auto read = read_panels_jsonl(path);
    for (auto& p : read) panels.push_back(std::move(p));
  }
  if (panels.empty()) throw DataError("no panel records found");
  return panels;
}

int cmd_fit(const std::vector<std::string>& panel_paths, const std::string& config_path,
            const std::string& mode, const std::string& out_path, int threads_override,
            long seed_override, int starts_override) {
  ModelConfig config;
  if (config_path.empty()) {
    config.spec = default_model_spec();
  } else {
    config = load_model_config(config_path);
  }
  if (!mode.empty()) config.fit.mode_override = grouping_from_string(mode);
  if (threads_override > 0) config.fit.threads = threads_override;
  if (seed_override >= 0) config.fit.seed = static_cast<std::uint64_t>(seed_override);
  if (starts_override > 0) config.fit.starts = starts_override;

  const auto panels = load_panels(panel_paths);
  const auto data = extract_dataset(panels, config.spec);
  const auto result = fit(config.spec, data, config.fit);
  write_fit_json(result, out_path);
  std::cout << fmt::format(
      "mode={} loglik={:.4f} k={} AIC={:.4f} converged={} -> {}\n",
      to_string(result.mode), result.loglik, result.n_free_params, result.aic,
      result.converged, out_path);
  if (!result.converged) std::cerr << "warning: optimizer did not converge\n";
  return kExitOk;
}

int cmd_compare(const std::string& path_a, const std::string& path_b) {
  const FitResult a = read_fit_json(path_a);
  const FitResult b = read_fit_json(path_b);
  std::cout << fmt::format("{:<28}{:>14}{:>8}{:>14}{:>14}\n", "model", "loglik", "k",
                           "AIC", "dAIC");
  const double best = std::min(a.aic, b.aic);
  std::cout << fmt::format("{:<28}{:>14.4f}{:>8}{:>14.4f}{:>14.4f}\n", path_a, a.loglik,
                           a.n_free_params, a.aic, a.aic - best);
  std::cout << fmt::format("{:<28}{:>14.4f}{:>8}{:>14.4f}{:>14.4f}\n", path_b, b.loglik,
                           b.n_free_params, b.aic, b.aic - best);
  std::cout << fmt::format("delta AIC (B - A): {:.4f}\n", b.aic - a.aic);
  if (a.aic > 0.0 && b.aic > 0.0) {
    const double ratio = std::max(a.aic, b.aic) / std::min(a.aic, b.aic);
    std::cout << fmt::format("AIC ratio (worse/better): {:.2f}x\n", ratio);
  }
  return kExitOk;
}

int cmd_simulate(const std::string& design_path, const std::string& out_dir) {
  const SimDesign design = load_sim_design(design_path);
  const auto panels = simulate(design);
  fs::create_directories(out_dir);
  const std::string panel_path = (fs::path(out_dir) / "panels.jsonl").string();
  write_panels_jsonl(panels, panel_path);

  ordered_json manifest;
  manifest["schema_version"] = kSchemaVersion;
  manifest["tool_version"] = kVersion;
  manifest["design_file"] = design_path;
  manifest["seed"] = design.seed;
  manifest["n_groups"] = design.n_groups;
  manifest["members_per_group"] = design.members_per_group;
  manifest["n_slices"] = design.n_slices;
  manifest["slice_len"] = design.slice_len;
  manifest["ordinal_manifest"] = design.ordinal_manifest;
  manifest["panel_file"] = panel_path;
  std::ofstream out(fs::path(out_dir) / "sim_manifest.json");
  out << manifest.dump(2) << "\n";
  std::cout << fmt::format("simulated {} groups x {} members x {} slices -> {}\n",
                           design.n_groups, design.members_per_group, design.n_slices,
                           panel_path);
  return kExitOk;
}

int cmd_recover(const std::string& design_path, int reps, const std::string& out_path,
                bool fit_free, int threads, int starts, int workers) {
  const SimDesign design = load_sim_design(design_path);
  RecoveryOptions options;
  options.fit.starts = starts;
  options.fit.threads = threads;
  options.fit_free = fit_free;
  options.replicate_threads = workers;
  const auto report = recovery_experiment(design, reps, options);

  ordered_json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["tool_version"] = kVersion;
  doc["design_file"] = design_path;
  doc["n_replicates"] = report.n_replicates;
  doc["n_converged"] = report.n_converged;
  doc["mae_drift"] = report.mae_drift;
  doc["mae_loadings"] = report.mae_loadings;
  doc["mae_effects"] = report.mae_effects;
  doc["sign_rate_drift"] = report.sign_rate_drift;
  doc["sign_rate_loadings"] = report.sign_rate_loadings;
  doc["constrained_win_rate"] = report.constrained_win_rate
                                    ? ordered_json(*report.constrained_win_rate)
                                    : ordered_json();
  ordered_json reps_json = ordered_json::array();
  for (const auto& r : report.replicates) {
    ordered_json item;
    item["replicate"] = r.replicate;
    item["converged"] = r.converged;
    item["loglik"] = r.loglik;
    item["mae_drift"] = r.mae_drift;
    item["mae_loadings"] = r.mae_loadings;
    item["mae_effects"] = r.mae_effects;
    item["sign_rate_drift"] = r.sign_rate_drift;
    item["sign_rate_loadings"] = r.sign_rate_loadings;
    item["aic_constrained"] =
        r.aic_constrained ? ordered_json(*r.aic_constrained) : ordered_json();
    item["aic_free"] = r.aic_free ? ordered_json(*r.aic_free) : ordered_json();
    item["constrained_won"] =
        r.constrained_won ? ordered_json(*r.constrained_won) : ordered_json();
    reps_json.push_back(std::move(item));
  }
  doc["replicates"] = std::move(reps_json);
  std::ofstream out(out_path);
  if (!out) throw DataError(fmt::format("cannot write '{}'", out_path));
  out << doc.dump(2) << "\n";

  std::cout << fmt::format(
      "recovery: {}/{} converged, MAE drift {:.4f}, MAE loadings {:.4f}, "
      "sign rates {:.3f}/{:.3f}\n",
      report.n_converged, report.n_replicates, report.mae_drift, report.mae_loadings,
      report.sign_rate_drift, report.sign_rate_loadings);
  if (report.constrained_win_rate)
    std::cout << fmt::format("constrained model won in {:.0f}% of replicates\n",
                             100.0 * *report.constrained_win_rate);
  return kExitOk;
}

int cmd_report(const std::string& fit_path, const std::string& out_path, int top_k) {
  const FitResult result = read_fit_json(fit_path);
  const LinkReport report = rank_links(result.standardized, top_k);
  if (!out_path.empty()) write_links_csv(report, out_path);
  for (const auto& e : report.edges) {
    if (e.latent_to_manifest)
      std::cout << fmt::format("{} -> {}: {:.3f} +/- {:.3f}  (rank {})\n", e.source,
                               e.target, e.estimate, e.sd, e.rank);
    else
      std::cout << fmt::format("{} -> {}: {:.3f}  (rank {})\n", e.source, e.target,
                               e.estimate, e.rank);
  }
  for (const auto& w : result.standardized.warnings)
    std::cerr << "warning: " << w << "\n";
  if (!out_path.empty()) std::cout << fmt::format("wrote {}\n", out_path);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ctpanel: behavior panels and continuous-time latent-variable fits"};
  app.set_version_flag("--version",
                       fmt::format("ctpanel {} (schema {})", kVersion, kSchemaVersion));
  app.require_subcommand(1);

  auto* featurize_cmd =
      app.add_subcommand("featurize", "Build behavior panels from session directories");
  std::vector<std::string> session_dirs;
  std::string out_dir = "out";
  FeaturizeConfig feat_config;
  std::string rules_path;
  std::string affect_mode = "dominant";
  featurize_cmd->add_option("--session", session_dirs, "Session directory (repeatable)")
      ->required();
  featurize_cmd->add_option("--out", out_dir, "Output directory")->required();
  featurize_cmd->add_option("--slice", feat_config.slice_len, "Slice length (s)");
  featurize_cmd->add_option("--min-confidence", feat_config.min_confidence,
                            "Face-tracking confidence gate");
  featurize_cmd->add_option("--rules", rules_path, "Affect rules JSON file");
  featurize_cmd->add_option("--affect-mode", affect_mode,
                            "dominant (one-hot) or any (per-affect binary)");
  featurize_cmd->add_option("--time-sd", feat_config.rating.time_sd_k,
                            "Rater time filter, in population sds");
  featurize_cmd->add_option("--min-raters", feat_config.rating.min_raters,
                            "Minimum rater subset size");
  featurize_cmd->add_flag("--gap-silence", feat_config.turn.use_gap_silence,
                          "Use inter-turn gaps as silence instead of floor time");

  auto* rate_cmd = app.add_subcommand("rate", "Derive curiosity scores from ratings");
  std::string ratings_path, rate_out = "curiosity.csv";
  RatingConfig rating_config;
  rate_cmd->add_option("--ratings", ratings_path, "ratings.csv")->required();
  rate_cmd->add_option("--out", rate_out, "Output CSV");
  rate_cmd->add_option("--min-raters", rating_config.min_raters, "Minimum subset size");
  rate_cmd->add_option("--time-sd", rating_config.time_sd_k, "Time filter k");

  auto* turns_cmd = app.add_subcommand("turns", "Per-slice turn-taking metrics");
  std::string turns_path, turns_out = "turn_metrics.csv";
  double turns_slice = 10.0, turns_session_length = 0.0;
  TurnMetricConfig turn_config;
  turns_cmd->add_option("--turns", turns_path, "turns.csv")->required();
  turns_cmd->add_option("--slice", turns_slice, "Slice length (s)");
  turns_cmd->add_option("--session-length", turns_session_length,
                        "Session length (default: max turn end)");
  turns_cmd->add_option("--out", turns_out, "Output CSV");
  turns_cmd->add_flag("--gap-silence", turn_config.use_gap_silence,
                      "Use inter-turn gaps as silence");

  auto* fit_cmd = app.add_subcommand("fit", "Fit the continuous-time latent model");
  std::vector<std::string> panel_paths;
  std::string model_config_path, fit_mode, fit_out = "fit.json";
  int fit_threads = 0, fit_starts = 0;
  long fit_seed = -1;
  fit_cmd->add_option("--panel", panel_paths, "panel.jsonl (repeatable)")->required();
  fit_cmd->add_option("--config", model_config_path, "model.toml");
  fit_cmd->add_option("--mode", fit_mode, "constrained|free (overrides config)");
  fit_cmd->add_option("--out", fit_out, "Output fit.json");
  fit_cmd->add_option("--threads", fit_threads, "Worker threads");
  fit_cmd->add_option("--seed", fit_seed, "Optimizer seed");
  fit_cmd->add_option("--starts", fit_starts, "Multi-start count");

  auto* compare_cmd = app.add_subcommand("compare", "Compare two fits by AIC");
  std::string cmp_a, cmp_b;
  compare_cmd->add_option("fit_a", cmp_a, "first fit.json")->required();
  compare_cmd->add_option("fit_b", cmp_b, "second fit.json")->required();

  auto* sim_cmd = app.add_subcommand("simulate", "Simulate panels from a design");
  std::string design_path, sim_out = "sims";
  sim_cmd->add_option("--design", design_path, "design.toml")->required();
  sim_cmd->add_option("--out", sim_out, "Output directory");

  auto* recover_cmd =
      app.add_subcommand("recover", "Parameter-recovery experiment from a design");
  std::string rec_design, rec_out = "recovery.json";
  int rec_reps = 20, rec_threads = 0, rec_starts = 1, rec_workers = 1;
  bool rec_no_free = false;
  recover_cmd->add_option("--design", rec_design, "design.toml")->required();
  recover_cmd->add_option("--reps", rec_reps, "Replicates");
  recover_cmd->add_option("--out", rec_out, "Output JSON");
  recover_cmd->add_option("--threads", rec_threads, "Worker threads per fit");
  recover_cmd->add_option("--starts", rec_starts, "Multi-start count per fit");
  recover_cmd->add_option("--workers", rec_workers, "Parallel replicates");
  recover_cmd->add_flag("--no-free", rec_no_free, "Skip the free-model comparison fit");

  auto* report_cmd = app.add_subcommand("report", "Ranked standardized links from a fit");
  std::string report_fit, report_out;
  int report_top_k = 1;
  report_cmd->add_option("--fit", report_fit, "fit.json")->required();
  report_cmd->add_option("--out", report_out, "links.csv");
  report_cmd->add_option("--top-k", report_top_k, "Behavior edges kept per latent");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (featurize_cmd->parsed()) {
      if (affect_mode == "any")
        feat_config.affect_dominant_one_hot = false;
      else if (affect_mode != "dominant")
        throw ConfigError("--affect-mode must be 'dominant' or 'any'");
      if (!rules_path.empty()) feat_config.rules = load_rule_set(rules_path);
      return cmd_featurize(session_dirs, out_dir, feat_config, rules_path);
    }
    if (rate_cmd->parsed()) return cmd_rate(ratings_path, rate_out, rating_config);
    if (turns_cmd->parsed())
      return cmd_turns(turns_path, turns_slice, turns_session_length, turns_out,
                       turn_config);
    if (fit_cmd->parsed())
      return cmd_fit(panel_paths, model_config_path, fit_mode, fit_out, fit_threads,
                     fit_seed, fit_starts);
    if (compare_cmd->parsed()) return cmd_compare(cmp_a, cmp_b);
    if (sim_cmd->parsed()) return cmd_simulate(design_path, sim_out);
    if (recover_cmd->parsed())
      return cmd_recover(rec_design, rec_reps, rec_out, !rec_no_free, rec_threads,
                         rec_starts, rec_workers);
    if (report_cmd->parsed()) return cmd_report(report_fit, report_out, report_top_k);
    std::cerr << "no subcommand\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitData;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}
