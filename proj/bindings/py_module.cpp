#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctpanel/affect.hpp"
#include "ctpanel/config.hpp"
#include "ctpanel/featurize.hpp"
#include "ctpanel/io.hpp"
#include "ctpanel/sim.hpp"
#include "ctpanel/turns.hpp"

namespace py = pybind11;
using namespace ctpanel;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

RatingMatrix matrix_from_numpy(const Eigen::Ref<const MatrixXd>& cells,
                               std::vector<std::string> raters) {
  RatingMatrix m;
  if (raters.empty())
    for (Eigen::Index j = 0; j < cells.cols(); ++j)
      raters.push_back("r" + std::to_string(j));
  if (static_cast<Eigen::Index>(raters.size()) != cells.cols())
    throw DataError("rater name count does not match the matrix width");
  m.raters = std::move(raters);
  for (Eigen::Index i = 0; i < cells.rows(); ++i) {
    std::vector<std::optional<int>> row;
    for (Eigen::Index j = 0; j < cells.cols(); ++j) {
      const double v = cells(i, j);
      if (std::isnan(v)) {
        row.push_back(std::nullopt);
      } else {
        row.push_back(static_cast<int>(v));
      }
    }
    m.cells.push_back(std::move(row));
  }
  return m;
}

CtGroupParams group_params_from_dict(const py::dict& d) {
  CtGroupParams g;
  g.drift = d["drift"].cast<MatrixXd>();
  const auto n = g.drift.rows();
  g.cont_intercept = d.contains("cont_intercept")
                         ? d["cont_intercept"].cast<VectorXd>()
                         : VectorXd(VectorXd::Zero(n));
  g.diffusion_chol = d.contains("diffusion_chol")
                         ? d["diffusion_chol"].cast<MatrixXd>()
                         : MatrixXd(MatrixXd::Identity(n, n));
  g.predictor_effects = d["predictor_effects"].cast<MatrixXd>();
  g.loadings = d["loadings"].cast<MatrixXd>();
  g.manifest_intercept = d["manifest_intercept"].cast<VectorXd>();
  g.manifest_error_var = d["manifest_error_var"].cast<VectorXd>();
  if (d.contains("init_mean")) g.init_mean = d["init_mean"].cast<VectorXd>();
  if (d.contains("init_cov")) g.init_cov = d["init_cov"].cast<MatrixXd>();
  return g;
}

py::dict fit_result_to_dict(const FitResult& result) {
  py::dict out;
  out["mode"] = to_string(result.mode);
  out["loglik"] = result.loglik;
  out["n_free_params"] = result.n_free_params;
  out["aic"] = result.aic;
  out["converged"] = result.converged;
  out["iterations"] = result.iterations;
  out["groups"] = result.group_ids;
  py::list params;
  for (const auto& p : result.parameters) {
    py::dict item;
    item["name"] = p.name;
    item["estimate"] = p.estimate;
    if (p.std_error)
      item["se"] = *p.std_error;
    else
      item["se"] = py::none();
    params.append(item);
  }
  out["parameters"] = params;
  py::list group_params;
  for (const auto& g : result.params.groups) {
    py::dict item;
    item["drift"] = g.drift;
    item["predictor_effects"] = g.predictor_effects;
    item["loadings"] = g.loadings;
    item["manifest_intercept"] = g.manifest_intercept;
    item["manifest_error_var"] = g.manifest_error_var;
    group_params.append(item);
  }
  out["group_params"] = group_params;
  py::list effects;
  for (const auto& e : result.standardized.effects) {
    py::dict item;
    item["source"] = e.source;
    item["target"] = e.target;
    item["latent_to_manifest"] = e.latent_to_manifest;
    if (e.mean)
      item["estimate"] = *e.mean;
    else
      item["estimate"] = py::none();
    item["sd"] = e.sd;
    effects.append(item);
  }
  out["standardized"] = effects;
  return out;
}

}  // namespace

PYBIND11_MODULE(_ctpanel, m) {
  m.doc() = "Behavior panels and continuous-time latent-variable model fitting";
  m.attr("__version__") = kVersion;
  m.attr("SCHEMA_VERSION") = kSchemaVersion;
  {
    std::vector<std::string> names;
    for (int c = 0; c < kNumChannels; ++c) names.push_back(channel_name(c));
    m.attr("CHANNELS") = names;
  }

  py::register_exception<DataError>(m, "DataError");
  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<NumericalError>(m, "NumericalError");
  py::register_exception<DegenerateInputError>(m, "DegenerateInputError");

  m.def(
      "build_slice_grid",
      [](double session_length, double slice_len) {
        std::vector<std::tuple<int, double, double>> out;
        for (const auto& s : build_slice_grid(session_length, slice_len))
          out.emplace_back(s.index, s.start, s.end);
        return out;
      },
      py::arg("session_length"), py::arg("slice_len") = 10.0,
      "Contiguous slices covering the session; partial tails of at least half "
      "a slice are kept.");

  // Reliability
  m.def(
      "icc",
      [](const Eigen::Ref<const MatrixXd>& cells, std::vector<std::string> raters) {
        return icc(matrix_from_numpy(cells, std::move(raters)));
      },
      py::arg("matrix"), py::arg("raters") = std::vector<std::string>{},
      "ICC(2,1) of a units x raters matrix; NaN cells drop their unit.");
  m.def(
      "krippendorff_alpha",
      [](const Eigen::Ref<const MatrixXd>& cells, const std::string& level,
         std::vector<std::string> raters) {
        if (level != "ordinal" && level != "nominal")
          throw ConfigError("level must be 'nominal' or 'ordinal'");
        const auto l = level == "ordinal" ? AlphaLevel::Ordinal : AlphaLevel::Nominal;
        return krippendorff_alpha(matrix_from_numpy(cells, std::move(raters)), l);
      },
      py::arg("matrix"), py::arg("level") = "nominal",
      py::arg("raters") = std::vector<std::string>{});
  m.def(
      "best_rater_subset",
      [](const Eigen::Ref<const MatrixXd>& cells, std::size_t min_size,
         std::vector<std::string> raters) {
        const auto r =
            best_rater_subset(matrix_from_numpy(cells, std::move(raters)), min_size);
        return std::make_pair(r.raters, r.icc);
      },
      py::arg("matrix"), py::arg("min_size") = 2,
      py::arg("raters") = std::vector<std::string>{});
  m.def(
      "filter_raters_by_time",
      [](const std::map<std::string, double>& durations, double k) {
        std::vector<RaterProfile> profiles;
        for (const auto& [id, dur] : durations) {
          RaterProfile p;
          p.rater_id = id;
          p.mean_hit_duration = dur;
          p.n_ratings = 1;
          profiles.push_back(std::move(p));
        }
        return filter_raters_by_time(profiles, k);
      },
      py::arg("mean_durations"), py::arg("k") = 1.5);
  m.def(
      "inverse_bias_correct",
      [](const std::map<std::string, int>& votes,
         const std::map<std::string, std::array<double, 3>>& marginals) {
        std::vector<RaterProfile> profiles;
        for (const auto& [id, marg] : marginals) {
          RaterProfile p;
          p.rater_id = id;
          p.label_marginals = marg;
          p.n_ratings = 1;
          profiles.push_back(std::move(p));
        }
        return inverse_bias_correct(votes, profiles);
      },
      py::arg("votes"), py::arg("marginals"));

  // Affect rules
  m.def(
      "evaluate_rules",
      [](const std::vector<int>& active_aus) {
        FaceFrame frame;
        frame.confidence = 1.0;
        for (int code : active_aus) frame.set_au(code, true);
        std::vector<std::string> names;
        const auto& rules = default_rule_set();
        for (std::size_t i : evaluate_rules(frame, rules))
          names.push_back(rules.rules[i].name);
        return names;
      },
      py::arg("active_aus"),
      "Names of the stock affect rules fired by a set of active AUs.");
  m.def(
      "dominant_affect",
      [](const std::vector<std::pair<std::vector<int>, double>>& frames,
         double min_confidence) {
        std::vector<FaceFrame> converted;
        for (const auto& [aus, conf] : frames) {
          FaceFrame f;
          f.confidence = conf;
          for (int code : aus) f.set_au(code, true);
          converted.push_back(f);
        }
        const auto& rules = default_rule_set();
        const auto d = dominant_affect(converted, rules, min_confidence);
        py::dict counts;
        for (std::size_t i = 0; i < rules.rules.size(); ++i)
          counts[py::str(rules.rules[i].name)] = d.frame_counts[i];
        py::object name = py::none();
        if (d.dominant) name = py::str(rules.rules[*d.dominant].name);
        return py::make_tuple(name, counts);
      },
      py::arg("frames"), py::arg("min_confidence") = 0.8,
      "frames: list of (active_au_list, confidence).");
  m.def(
      "head_motion_variance",
      [](const std::vector<double>& pitch, const std::vector<double>& yaw,
         const std::vector<double>& roll, const std::vector<double>& confidence,
         double min_confidence) {
        if (pitch.size() != yaw.size() || yaw.size() != roll.size() ||
            roll.size() != confidence.size())
          throw DataError("angle/confidence arrays must have equal length");
        std::vector<FaceFrame> frames(pitch.size());
        for (std::size_t i = 0; i < pitch.size(); ++i) {
          frames[i].pitch = pitch[i];
          frames[i].yaw = yaw[i];
          frames[i].roll = roll[i];
          frames[i].confidence = confidence[i];
        }
        const auto h = head_motion_variance(frames, min_confidence);
        py::dict out;
        out["nod_var"] = h.nod_var ? py::object(py::float_(*h.nod_var)) : py::none();
        out["turn_var"] = h.turn_var ? py::object(py::float_(*h.turn_var)) : py::none();
        out["incline_var"] =
            h.incline_var ? py::object(py::float_(*h.incline_var)) : py::none();
        return out;
      },
      py::arg("pitch"), py::arg("yaw"), py::arg("roll"), py::arg("confidence"),
      py::arg("min_confidence") = 0.8);

  // Turn taking
  m.def(
      "turn_metrics",
      [](const std::vector<std::tuple<std::string, double, double>>& turns,
         std::pair<double, double> window, double alpha_in, double alpha_out,
         double epsilon, bool gap_silence) {
        std::vector<TurnEvent> events;
        for (const auto& [speaker, start, end] : turns)
          events.push_back({speaker, start, end});
        TurnMetricConfig config;
        config.alpha_in = alpha_in;
        config.alpha_out = alpha_out;
        config.epsilon = epsilon;
        config.use_gap_silence = gap_silence;
        const auto graph = build_turn_graph(events, window.first, window.second);
        py::dict out;
        for (const auto& node : graph.nodes) {
          const auto in = turn_indegree(node, graph, config);
          const auto outdeg = turn_outdegree(node, graph, config);
          out[py::str(node)] =
              py::make_tuple(in ? py::object(py::float_(*in)) : py::none(),
                             outdeg ? py::object(py::float_(*outdeg)) : py::none());
        }
        return out;
      },
      py::arg("turns"), py::arg("window"), py::arg("alpha_in") = -0.5,
      py::arg("alpha_out") = 0.5, py::arg("epsilon") = 0.1,
      py::arg("gap_silence") = false,
      "Per-member (indegree, outdegree) over one window of (speaker, start, end) "
      "turns.");

  // CTSEM core
  m.def(
      "discretize_dynamics",
      [](const MatrixXd& drift, const VectorXd& cont_intercept, const MatrixXd& q_cont,
         double dt) {
        const auto d = discretize_dynamics(drift, cont_intercept, q_cont, dt);
        return py::make_tuple(d.A_d, d.b_d, d.Q_d);
      },
      py::arg("drift"), py::arg("cont_intercept"), py::arg("diffusion_cov"),
      py::arg("dt"));
  m.def(
      "stationary_covariance",
      [](const MatrixXd& drift, const MatrixXd& q_cont) {
        return stationary_covariance(drift, q_cont);
      },
      py::arg("drift"), py::arg("diffusion_cov"));
  m.def(
      "kalman_loglik",
      [](const py::dict& params, const VectorXd& times, const MatrixXd& predictors,
         const MatrixXd& manifest) {
        SubjectData subject;
        subject.member = "py";
        subject.times = times;
        subject.predictors = predictors;
        subject.manifest = manifest;
        return kalman_loglik(group_params_from_dict(params), subject).loglik;
      },
      py::arg("params"), py::arg("times"), py::arg("predictors"), py::arg("manifest"),
      "Log likelihood of one member series; NaNs in `manifest` mark missing "
      "observations.");
  m.def("aic", &aic, py::arg("loglik"), py::arg("n_free_params"));

  // File-level pipeline
  m.def(
      "featurize_dir",
      [](const std::string& session_dir, const std::string& out_panel) {
        const SessionLog session = read_session_dir(session_dir);
        const auto result = featurize_session(session, {});
        const std::vector<BehaviorPanel> panels = {result.panel};
        write_panels_jsonl(panels, out_panel);
        py::dict out;
        out["group_id"] = session.group_id;
        out["members"] = session.members;
        out["n_slices"] = result.grid.size();
        out["retained_raters"] = result.curiosity.retained_raters;
        return out;
      },
      py::arg("session_dir"), py::arg("out_panel"),
      "Featurize one session directory into a panel.jsonl with default settings.");
  m.def(
      "fit_panels",
      [](const std::vector<std::string>& panel_paths, const std::string& model_toml,
         const std::string& mode, const std::string& out_json) {
        ModelConfig config;
        if (model_toml.empty()) {
          config.spec = default_model_spec();
        } else {
          config = load_model_config(model_toml);
        }
        if (!mode.empty()) config.fit.mode_override = grouping_from_string(mode);
        std::vector<BehaviorPanel> panels;
        for (const auto& path : panel_paths)
          for (auto& p : read_panels_jsonl(path)) panels.push_back(std::move(p));
        const auto data = extract_dataset(panels, config.spec);
        const auto result = fit(config.spec, data, config.fit);
        if (!out_json.empty()) write_fit_json(result, out_json);
        return fit_result_to_dict(result);
      },
      py::arg("panel_paths"), py::arg("model_toml") = std::string(),
      py::arg("mode") = std::string(), py::arg("out_json") = std::string());
  m.def(
      "simulate_design",
      [](const std::string& design_toml, const std::string& out_panel) {
        const SimDesign design = load_sim_design(design_toml);
        const auto panels = simulate(design);
        if (!out_panel.empty()) write_panels_jsonl(panels, out_panel);
        py::dict out;
        out["n_groups"] = design.n_groups;
        out["members_per_group"] = design.members_per_group;
        out["n_slices"] = design.n_slices;
        out["seed"] = design.seed;
        return out;
      },
      py::arg("design_toml"), py::arg("out_panel") = std::string());
}
