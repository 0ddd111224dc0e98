#include "ctpanel/affect.hpp"

#include <fmt/format.h>

#include <fstream>
#include <set>

#include "json.hpp"

namespace ctpanel {

namespace {

std::uint64_t mask_of(const std::vector<int>& codes) {
  std::uint64_t m = 0;
  for (int c : codes) {
    if (c < 0 || c > 63) throw ConfigError(fmt::format("AU code {} out of range", c));
    m |= (std::uint64_t{1} << c);
  }
  return m;
}

}  // namespace

std::uint64_t AffectRule::required_mask() const { return mask_of(required); }
std::uint64_t AffectRule::forbidden_mask() const { return mask_of(forbidden); }

void RuleSet::validate() const {
  std::set<std::string> names;
  for (const auto& rule : rules) {
    if (rule.name.empty()) throw ConfigError("affect rule with empty name");
    if (!names.insert(rule.name).second)
      throw ConfigError(fmt::format("duplicate affect rule name '{}'", rule.name));
    if (rule.required_mask() & rule.forbidden_mask())
      throw ConfigError(
          fmt::format("rule '{}' has overlapping required/forbidden AUs", rule.name));
  }
}

const RuleSet& default_rule_set() {
  static const RuleSet rules = [] {
    RuleSet rs;
    rs.rules = {
        {"joy", {6, 12}, {}},
        {"delight", {7, 12, 25, 26}, {45}},
        {"surprise", {1, 2, 5, 26}, {}},
        {"confusion", {4, 7}, {12}},
        {"flow", {23, 5, 7}, {15, 45, 2}},
    };
    rs.validate();
    return rs;
  }();
  return rules;
}

RuleSet load_rule_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open rules file '{}'", path));
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("rules file '{}': {}", path, e.what()));
  }
  RuleSet rs;
  if (!doc.contains("rules") || !doc["rules"].is_array())
    throw ConfigError(fmt::format("rules file '{}': missing 'rules' array", path));
  for (const auto& item : doc["rules"]) {
    AffectRule rule;
    rule.name = item.at("name").get<std::string>();
    for (const auto& c : item.value("required", nlohmann::json::array()))
      rule.required.push_back(c.get<int>());
    for (const auto& c : item.value("forbidden", nlohmann::json::array()))
      rule.forbidden.push_back(c.get<int>());
    rs.rules.push_back(std::move(rule));
  }
  rs.validate();
  return rs;
}

void save_rule_set(const RuleSet& rules, const std::string& path) {
  nlohmann::ordered_json doc;
  doc["rules"] = nlohmann::ordered_json::array();
  for (const auto& rule : rules.rules) {
    nlohmann::ordered_json item;
    item["name"] = rule.name;
    item["required"] = rule.required;
    item["forbidden"] = rule.forbidden;
    doc["rules"].push_back(item);
  }
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot write rules file '{}'", path));
  out << doc.dump(2) << "\n";
}

std::vector<std::size_t> evaluate_rules(const FaceFrame& frame, const RuleSet& rules) {
  std::vector<std::size_t> fired;
  for (std::size_t i = 0; i < rules.rules.size(); ++i) {
    const auto req = rules.rules[i].required_mask();
    const auto forb = rules.rules[i].forbidden_mask();
    if ((frame.au_mask & req) == req && (frame.au_mask & forb) == 0)
      fired.push_back(i);
  }
  return fired;
}

DominantAffect dominant_affect(std::span<const FaceFrame> frames, const RuleSet& rules,
                               double min_confidence) {
  if (min_confidence < 0.0 || min_confidence > 1.0)
    throw ConfigError("min_confidence must be in [0,1]");
  DominantAffect out;
  out.frame_counts.assign(rules.rules.size(), 0);
  for (const auto& frame : frames) {
    if (frame.confidence < min_confidence) continue;
    ++out.n_qualifying_frames;
    for (std::size_t i : evaluate_rules(frame, rules)) ++out.frame_counts[i];
  }
  long best = 0;
  for (std::size_t i = 0; i < out.frame_counts.size(); ++i) {
    if (out.frame_counts[i] > best) {
      best = out.frame_counts[i];
      out.dominant = i;
    }
  }
  return out;
}

HeadMotionFeatures head_motion_variance(std::span<const FaceFrame> frames,
                                        double min_confidence) {
  double sum_p = 0, sum_y = 0, sum_r = 0;
  std::size_t n = 0;
  for (const auto& f : frames) {
    if (f.confidence < min_confidence) continue;
    sum_p += f.pitch;
    sum_y += f.yaw;
    sum_r += f.roll;
    ++n;
  }
  HeadMotionFeatures out;
  if (n < 2) return out;
  const double mp = sum_p / n, my = sum_y / n, mr = sum_r / n;
  double vp = 0, vy = 0, vr = 0;
  for (const auto& f : frames) {
    if (f.confidence < min_confidence) continue;
    vp += (f.pitch - mp) * (f.pitch - mp);
    vy += (f.yaw - my) * (f.yaw - my);
    vr += (f.roll - mr) * (f.roll - mr);
  }
  // Population variance: a slice is the whole population of its frames.
  out.nod_var = vp / n;
  out.turn_var = vy / n;
  out.incline_var = vr / n;
  return out;
}

}  // namespace ctpanel
