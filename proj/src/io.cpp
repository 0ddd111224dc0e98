#include "ctpanel/io.hpp"

#include <fmt/format.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace ctpanel {

std::string format_double(double v) { return fmt::format("{}", v); }

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else if (c != '\r') {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  return fields;
}

double parse_number(const std::string& s, const std::string& context) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw DataError(fmt::format("{}: cannot parse number '{}'", context, s));
  return v;
}

long parse_integer(const std::string& s, const std::string& context) {
  const double v = parse_number(s, context);
  const long n = static_cast<long>(v);
  if (static_cast<double>(n) != v)
    throw DataError(fmt::format("{}: expected integer, got '{}'", context, s));
  return n;
}

struct CsvReader {
  std::ifstream in;
  std::string path;
  std::size_t line_no = 0;

  CsvReader(const std::string& p, const std::vector<std::string>& header) : path(p) {
    in.open(p);
    if (!in) throw DataError(fmt::format("cannot open '{}'", p));
    std::string line;
    if (!std::getline(in, line))
      throw DataError(fmt::format("{}: empty file, expected header", p));
    ++line_no;
    const auto fields = split_csv_line(line);
    if (fields != header) {
      std::string expected;
      for (std::size_t i = 0; i < header.size(); ++i)
        expected += (i ? "," : "") + header[i];
      throw DataError(fmt::format("{}: bad header '{}', expected '{}'", p, line, expected));
    }
  }

  std::optional<std::vector<std::string>> next(std::size_t n_fields) {
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line == "\r") continue;
      auto fields = split_csv_line(line);
      if (fields.size() != n_fields)
        throw DataError(fmt::format("{}:{}: expected {} fields, got {}", path, line_no,
                                    n_fields, fields.size()));
      return fields;
    }
    return std::nullopt;
  }

  std::string context() const { return fmt::format("{}:{}", path, line_no); }
};

}  // namespace

SessionLog read_session_dir(const std::string& dir) {
  const fs::path base(dir);
  const std::vector<std::string> required = {"session.json", "turns.csv", "frames.jsonl",
                                             "verbal.csv", "ratings.csv"};
  std::vector<std::string> missing;
  for (const auto& name : required)
    if (!fs::exists(base / name)) missing.push_back(name);
  if (!missing.empty())
    throw DataError(fmt::format("session directory '{}' is missing: {}", dir,
                                fmt::join(missing, ", ")));

  SessionLog session;
  {
    std::ifstream in(base / "session.json");
    ordered_json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(fmt::format("{}: {}", (base / "session.json").string(), e.what()));
    }
    try {
      session.group_id = doc.at("group_id").get<std::string>();
      session.members = doc.at("members").get<std::vector<std::string>>();
      session.session_length = doc.at("session_length").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(fmt::format("{}: {}", (base / "session.json").string(), e.what()));
    }
  }

  {
    CsvReader turns((base / "turns.csv").string(), {"speaker", "start", "end"});
    while (auto row = turns.next(3)) {
      TurnEvent t;
      t.speaker = (*row)[0];
      t.start = parse_number((*row)[1], turns.context());
      t.end = parse_number((*row)[2], turns.context());
      session.turns.push_back(std::move(t));
    }
  }

  {
    std::ifstream in(base / "frames.jsonl");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      ordered_json doc;
      try {
        doc = ordered_json::parse(line);
        FaceFrame frame;
        frame.timestamp = doc.at("timestamp").get<double>();
        frame.confidence = doc.at("confidence").get<double>();
        frame.pitch = doc.at("pitch").get<double>();
        frame.yaw = doc.at("yaw").get<double>();
        frame.roll = doc.at("roll").get<double>();
        for (const auto& code : doc.at("aus")) frame.set_au(code.get<int>(), true);
        session.frames[doc.at("member").get<std::string>()].push_back(frame);
      } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("{}:{}: {}", (base / "frames.jsonl").string(),
                                    line_no, e.what()));
      }
    }
  }

  {
    CsvReader verbal((base / "verbal.csv").string(),
                     {"slice", "member", "channel", "count"});
    while (auto row = verbal.next(4)) {
      VerbalLabel label;
      label.slice_index = static_cast<int>(parse_integer((*row)[0], verbal.context()));
      label.member = (*row)[1];
      const auto idx = channel_index((*row)[2]);
      if (!idx || *idx >= kNumVerbalChannels)
        throw DataError(
            fmt::format("{}: unknown verbal channel '{}'", verbal.context(), (*row)[2]));
      label.channel = *idx;
      label.count = parse_integer((*row)[3], verbal.context());
      session.verbal_labels.push_back(std::move(label));
    }
  }

  {
    CsvReader ratings((base / "ratings.csv").string(),
                      {"slice", "member", "rater", "score", "hit_duration"});
    while (auto row = ratings.next(5)) {
      RaterScore score;
      score.slice_index = static_cast<int>(parse_integer((*row)[0], ratings.context()));
      score.member = (*row)[1];
      score.rater_id = (*row)[2];
      score.score = static_cast<int>(parse_integer((*row)[3], ratings.context()));
      score.hit_duration = parse_number((*row)[4], ratings.context());
      session.ratings.push_back(std::move(score));
    }
  }

  validate_session(session);
  return session;
}

// ---------------------------------------------------------------------------
// panel.jsonl
// ---------------------------------------------------------------------------

void write_panels_jsonl(std::span<const BehaviorPanel> panels, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path));
  for (const auto& panel : panels) {
    for (const auto& series : panel.members) {
      for (const auto& rec : series.records) {
        ordered_json doc;
        doc["group"] = panel.group_id;
        doc["member"] = series.member;
        doc["slice"] = rec.slice_index;
        doc["time"] = rec.time;
        ordered_json channels;
        for (int c = 0; c < kNumChannels; ++c) {
          if (rec.channels[c])
            channels[channel_name(c)] = *rec.channels[c];
          else
            channels[channel_name(c)] = nullptr;
        }
        doc["channels"] = std::move(channels);
        if (rec.curiosity)
          doc["curiosity"] = *rec.curiosity;
        else
          doc["curiosity"] = nullptr;
        out << doc.dump() << "\n";
      }
    }
  }
}

std::vector<BehaviorPanel> read_panels_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path));
  std::vector<BehaviorPanel> panels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json doc;
    try {
      doc = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(fmt::format("{}:{}: {}", path, line_no, e.what()));
    }
    try {
      const std::string group = doc.at("group").get<std::string>();
      const std::string member = doc.at("member").get<std::string>();
      BehaviorPanel* panel = nullptr;
      for (auto& p : panels)
        if (p.group_id == group) panel = &p;
      if (!panel) {
        panels.push_back({});
        panels.back().group_id = group;
        panel = &panels.back();
      }
      MemberSeries* series = nullptr;
      for (auto& s : panel->members)
        if (s.member == member) series = &s;
      if (!series) {
        panel->members.push_back({});
        panel->members.back().member = member;
        series = &panel->members.back();
      }
      PanelRecord rec;
      rec.slice_index = doc.at("slice").get<int>();
      rec.time = doc.at("time").get<double>();
      const auto& channels = doc.at("channels");
      if (channels.size() != static_cast<std::size_t>(kNumChannels))
        throw DataError(fmt::format("{}:{}: expected {} channels, got {}", path, line_no,
                                    kNumChannels, channels.size()));
      for (int c = 0; c < kNumChannels; ++c) {
        const auto& v = channels.at(channel_name(c));
        if (!v.is_null()) rec.channels[c] = v.get<double>();
      }
      const auto& cur = doc.at("curiosity");
      if (!cur.is_null()) rec.curiosity = cur.get<double>();
      series->records.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(fmt::format("{}:{}: {}", path, line_no, e.what()));
    }
  }
  return panels;
}

// ---------------------------------------------------------------------------
// fit.json
// ---------------------------------------------------------------------------

namespace {

ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

ordered_json vector_to_json(const Eigen::VectorXd& v) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::MatrixXd matrix_from_json(const ordered_json& doc) {
  const auto rows = doc.size();
  const auto cols = rows == 0 ? 0 : doc.at(0).size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    if (doc.at(i).size() != cols) throw DataError("ragged matrix in fit.json");
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          doc.at(i).at(j).get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from_json(const ordered_json& doc) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(doc.size()));
  for (std::size_t i = 0; i < doc.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = doc.at(i).get<double>();
  return v;
}

}  // namespace

void write_fit_json(const FitResult& result, const std::string& path) {
  ordered_json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["tool_version"] = kVersion;

  ordered_json model;
  model["latents"] = result.spec.latent_names;
  model["manifests"] = result.spec.manifest_names;
  model["predictors"] = result.spec.predictor_channels;
  model["drift"] = to_string(result.spec.drift_form);
  model["grouping"] = to_string(result.spec.grouping);
  model["loadings_per_group"] = result.spec.loadings_per_group;
  model["free_cint"] = result.spec.free_cint;
  model["free_initial"] = result.spec.free_initial;
  doc["model"] = std::move(model);

  ordered_json fit_info;
  fit_info["mode"] = to_string(result.mode);
  fit_info["loglik"] = result.loglik;
  fit_info["n_free_params"] = result.n_free_params;
  fit_info["aic"] = result.aic;
  fit_info["converged"] = result.converged;
  fit_info["iterations"] = result.iterations;
  fit_info["n_evaluations"] = result.n_evaluations;
  fit_info["cov_floor_events"] = result.cov_floor_events;
  fit_info["seed"] = result.seed;
  fit_info["starts"] = result.starts;
  fit_info["groups"] = result.group_ids;
  doc["fit"] = std::move(fit_info);

  ordered_json parameters = ordered_json::array();
  for (const auto& p : result.parameters) {
    ordered_json item;
    item["name"] = p.name;
    item["estimate"] = p.estimate;
    if (p.std_error)
      item["se"] = *p.std_error;
    else
      item["se"] = nullptr;
    parameters.push_back(std::move(item));
  }
  doc["parameters"] = std::move(parameters);

  ordered_json groups = ordered_json::array();
  for (std::size_t g = 0; g < result.params.groups.size(); ++g) {
    const auto& gp = result.params.groups[g];
    ordered_json item;
    item["group"] = g < result.group_ids.size() ? result.group_ids[g]
                                                : fmt::format("g{}", g + 1);
    item["drift"] = matrix_to_json(gp.drift);
    item["cont_intercept"] = vector_to_json(gp.cont_intercept);
    item["diffusion_chol"] = matrix_to_json(gp.diffusion_chol);
    item["predictor_effects"] = matrix_to_json(gp.predictor_effects);
    item["loadings"] = matrix_to_json(gp.loadings);
    item["manifest_intercept"] = vector_to_json(gp.manifest_intercept);
    item["manifest_error_var"] = vector_to_json(gp.manifest_error_var);
    item["init_mean"] = gp.init_mean ? vector_to_json(*gp.init_mean) : ordered_json();
    item["init_cov"] = gp.init_cov ? matrix_to_json(*gp.init_cov) : ordered_json();
    groups.push_back(std::move(item));
  }
  doc["groups"] = std::move(groups);

  ordered_json std_table;
  ordered_json effects = ordered_json::array();
  for (const auto& e : result.standardized.effects) {
    ordered_json item;
    item["source"] = e.source;
    item["target"] = e.target;
    item["kind"] = e.latent_to_manifest ? "latent_to_manifest" : "behavior_to_latent";
    item["per_group"] = e.per_group;
    item["mean"] = e.mean ? ordered_json(*e.mean) : ordered_json();
    item["sd"] = e.sd;
    item["flagged"] = e.flagged;
    effects.push_back(std::move(item));
  }
  std_table["effects"] = std::move(effects);
  std_table["warnings"] = result.standardized.warnings;
  doc["standardized"] = std::move(std_table);

  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path));
  out << doc.dump(2) << "\n";
}

FitResult read_fit_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path));
  ordered_json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("{}: {}", path, e.what()));
  }

  try {
    if (doc.at("schema_version").get<int>() != kSchemaVersion)
      throw DataError(fmt::format("{}: unsupported schema_version {}", path,
                                  doc.at("schema_version").get<int>()));
    FitResult result;
    const auto& model = doc.at("model");
    result.spec.latent_names = model.at("latents").get<std::vector<std::string>>();
    result.spec.manifest_names = model.at("manifests").get<std::vector<std::string>>();
    result.spec.predictor_channels =
        model.at("predictors").get<std::vector<std::string>>();
    result.spec.n_latent = static_cast<int>(result.spec.latent_names.size());
    result.spec.n_manifest = static_cast<int>(result.spec.manifest_names.size());
    result.spec.drift_form = drift_form_from_string(model.at("drift").get<std::string>());
    result.spec.grouping = grouping_from_string(model.at("grouping").get<std::string>());
    result.spec.loadings_per_group = model.at("loadings_per_group").get<bool>();
    result.spec.free_cint = model.at("free_cint").get<bool>();
    result.spec.free_initial = model.at("free_initial").get<bool>();

    const auto& fit_info = doc.at("fit");
    result.mode = grouping_from_string(fit_info.at("mode").get<std::string>());
    result.loglik = fit_info.at("loglik").get<double>();
    result.n_free_params = fit_info.at("n_free_params").get<int>();
    result.aic = fit_info.at("aic").get<double>();
    result.converged = fit_info.at("converged").get<bool>();
    result.iterations = fit_info.at("iterations").get<int>();
    result.n_evaluations = fit_info.at("n_evaluations").get<long>();
    result.cov_floor_events = fit_info.at("cov_floor_events").get<long>();
    result.seed = fit_info.at("seed").get<std::uint64_t>();
    result.starts = fit_info.at("starts").get<int>();
    result.group_ids = fit_info.at("groups").get<std::vector<std::string>>();

    for (const auto& item : doc.at("parameters")) {
      ParamSummary p;
      p.name = item.at("name").get<std::string>();
      p.estimate = item.at("estimate").get<double>();
      if (!item.at("se").is_null()) p.std_error = item.at("se").get<double>();
      result.parameters.push_back(std::move(p));
    }

    for (const auto& item : doc.at("groups")) {
      CtGroupParams gp;
      gp.drift = matrix_from_json(item.at("drift"));
      gp.cont_intercept = vector_from_json(item.at("cont_intercept"));
      gp.diffusion_chol = matrix_from_json(item.at("diffusion_chol"));
      gp.predictor_effects = matrix_from_json(item.at("predictor_effects"));
      gp.loadings = matrix_from_json(item.at("loadings"));
      gp.manifest_intercept = vector_from_json(item.at("manifest_intercept"));
      gp.manifest_error_var = vector_from_json(item.at("manifest_error_var"));
      if (!item.at("init_mean").is_null())
        gp.init_mean = vector_from_json(item.at("init_mean"));
      if (!item.at("init_cov").is_null())
        gp.init_cov = matrix_from_json(item.at("init_cov"));
      result.params.groups.push_back(std::move(gp));
    }

    const auto& std_table = doc.at("standardized");
    for (const auto& item : std_table.at("effects")) {
      StdEffect e;
      e.source = item.at("source").get<std::string>();
      e.target = item.at("target").get<std::string>();
      e.latent_to_manifest = item.at("kind").get<std::string>() == "latent_to_manifest";
      e.per_group = item.at("per_group").get<std::vector<double>>();
      if (!item.at("mean").is_null()) e.mean = item.at("mean").get<double>();
      e.sd = item.at("sd").get<double>();
      e.flagged = item.at("flagged").get<bool>();
      result.standardized.effects.push_back(std::move(e));
    }
    result.standardized.warnings =
        std_table.at("warnings").get<std::vector<std::string>>();
    return result;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("{}: {}", path, e.what()));
  }
}

void write_links_csv(const LinkReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path));
  out << "target,source,kind,estimate,sd,rank\n";
  for (const auto& e : report.edges) {
    out << e.target << "," << e.source << ","
        << (e.latent_to_manifest ? "latent_to_manifest" : "behavior_to_latent") << ","
        << format_double(e.estimate) << "," << format_double(e.sd) << "," << e.rank
        << "\n";
  }
}

}  // namespace ctpanel
