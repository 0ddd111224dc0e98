#pragma once

#include <string>

#include "ctpanel/affect.hpp"
#include "ctpanel/panel.hpp"
#include "ctpanel/reliability.hpp"
#include "ctpanel/turns.hpp"

namespace ctpanel {

struct FeaturizeConfig {
  double slice_len = 10.0;
  double min_confidence = 0.8;
  RuleSet rules;  // empty -> default Table-derived set
  // Dominant-expression one-hot per slice by default; the alternative emits
  // one binary per affect (fired in >= 1 qualifying frame).
  bool affect_dominant_one_hot = true;
  TurnMetricConfig turn;
  RatingConfig rating;
};

struct FeaturizeResult {
  BehaviorPanel panel;
  CuriosityDerivation curiosity;
  std::vector<Slice> grid;
};

/// Full per-session featurization: verbal counts, affect indicators, head
/// variances, turn metrics and rater-derived curiosity, assembled into one
/// 24-channel panel.
FeaturizeResult featurize_session(const SessionLog& session,
                                  const FeaturizeConfig& config = {});

}  // namespace ctpanel
