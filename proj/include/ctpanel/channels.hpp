#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace ctpanel {

// Canonical behavior channel order. This order is fixed: panel files, model
// configs and reports all index channels by these names, and the on-disk
// vector layout follows it exactly.
//
//   0..13  verbal counts (per-slice event counts)
//   14..18 affect indicators (dominant-expression one-hot by default)
//   19..21 head-motion variances (rad^2)
//   22..23 turn-taking degree metrics
inline constexpr int kNumChannels = 24;
inline constexpr int kNumVerbalChannels = 14;
inline constexpr int kNumAffectChannels = 5;

inline constexpr std::array<std::string_view, kNumChannels> kChannelNames = {
    "uncertainty",
    "argument",
    "justification",
    "suggestion",
    "agreement",
    "question_on_task",
    "question_social",
    "idea_verbalization",
    "sharing_findings",
    "hypothesis_generation",
    "task_sentiment_pos",
    "task_sentiment_neg",
    "evaluation_pos",
    "evaluation_neg",
    "affect_joy",
    "affect_delight",
    "affect_surprise",
    "affect_confusion",
    "affect_flow",
    "head_nod_var",
    "head_turn_var",
    "head_incline_var",
    "turn_indegree",
    "turn_outdegree",
};

/// Channels where "no observation" means a count of zero. The remaining
/// channels (variances, turn metrics) stay explicitly missing instead.
inline constexpr bool channel_defaults_to_zero(int idx) {
  return idx < kNumVerbalChannels + kNumAffectChannels;
}

inline std::optional<int> channel_index(std::string_view name) {
  for (int i = 0; i < kNumChannels; ++i)
    if (kChannelNames[i] == name) return i;
  return std::nullopt;
}

inline std::string channel_name(int idx) {
  return std::string(kChannelNames[static_cast<std::size_t>(idx)]);
}

}  // namespace ctpanel
