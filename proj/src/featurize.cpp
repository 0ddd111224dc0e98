#include "ctpanel/featurize.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <map>

namespace ctpanel {

namespace {

// The five affect rules map onto the canonical affect_<name> channels.
int affect_channel(const std::string& rule_name) {
  const auto idx = channel_index("affect_" + rule_name);
  if (!idx)
    throw ConfigError(fmt::format(
        "affect rule '{}' has no matching panel channel; rules must be named "
        "joy, delight, surprise, confusion or flow",
        rule_name));
  return *idx;
}

}  // namespace

FeaturizeResult featurize_session(const SessionLog& session,
                                  const FeaturizeConfig& config) {
  validate_session(session);
  const RuleSet& rules = config.rules.rules.empty() ? default_rule_set() : config.rules;
  rules.validate();
  std::vector<int> rule_channels;
  for (const auto& rule : rules.rules) rule_channels.push_back(affect_channel(rule.name));

  FeaturizeResult result;
  result.grid = build_slice_grid(session.session_length, config.slice_len);
  const int n_slices = static_cast<int>(result.grid.size());

  std::vector<ChannelValue> features;

  // Verbal counts come through as-is; duplicates surface in assemble_panel.
  for (const auto& label : session.verbal_labels) {
    if (label.slice_index < 0 || label.slice_index >= n_slices)
      throw DataError(fmt::format("verbal label slice {} outside grid [0,{})",
                                  label.slice_index, n_slices));
    features.push_back({label.member, label.slice_index, label.channel,
                        static_cast<double>(label.count)});
  }

  // Affect indicators and head-motion variances per (member, slice).
  for (const auto& member : session.members) {
    const auto frames_it = session.frames.find(member);
    if (frames_it == session.frames.end()) continue;
    const auto& frames = frames_it->second;
    for (const auto& slice : result.grid) {
      std::vector<FaceFrame> in_slice;
      for (const auto& f : frames)
        if (f.timestamp >= slice.start && f.timestamp < slice.end)
          in_slice.push_back(f);
      if (in_slice.empty()) continue;

      const auto dominant = dominant_affect(in_slice, rules, config.min_confidence);
      for (std::size_t r = 0; r < rules.rules.size(); ++r) {
        double value = 0.0;
        if (config.affect_dominant_one_hot) {
          value = (dominant.dominant && *dominant.dominant == r) ? 1.0 : 0.0;
        } else {
          value = dominant.frame_counts[r] > 0 ? 1.0 : 0.0;
        }
        features.push_back({member, slice.index, rule_channels[r], value});
      }

      const auto head = head_motion_variance(in_slice, config.min_confidence);
      const auto push_var = [&](const char* name, const std::optional<double>& v) {
        if (v) features.push_back({member, slice.index, *channel_index(name), *v});
      };
      push_var("head_nod_var", head.nod_var);
      push_var("head_turn_var", head.turn_var);
      push_var("head_incline_var", head.incline_var);
    }
  }

  // Turn-taking metrics.
  const auto metrics = slice_turn_metrics(session.turns, result.grid, session.members,
                                          config.turn);
  const int in_idx = *channel_index("turn_indegree");
  const int out_idx = *channel_index("turn_outdegree");
  for (const auto& [key, m] : metrics) {
    if (m.indegree) features.push_back({key.first, key.second, in_idx, *m.indegree});
    if (m.outdegree) features.push_back({key.first, key.second, out_idx, *m.outdegree});
  }

  // Ground-truth curiosity from the raters.
  result.curiosity = derive_curiosity(session.ratings, n_slices, config.rating);

  result.panel =
      assemble_panel(session, config.slice_len, features, result.curiosity.scores);
  return result;
}

}  // namespace ctpanel
