#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctpanel/panel.hpp"

namespace ctpanel {

struct AffectRule {
  std::string name;
  std::vector<int> required;   // all must be active
  std::vector<int> forbidden;  // none may be active

  std::uint64_t required_mask() const;
  std::uint64_t forbidden_mask() const;
};

// Rule order doubles as the tie-break priority in dominant_affect.
struct RuleSet {
  std::vector<AffectRule> rules;

  void validate() const;  // unique names, disjoint required/forbidden
};

/// The five stock rules: joy {6,12}, delight {7,12,25,26}/not{45},
/// surprise {1,2,5,26}, confusion {4,7}/not{12},
/// flow {23,5,7}/not{15,45,2}. AU "5b" (upper lid raise intensity grade)
/// maps onto plain AU 5 since frames carry booleans.
const RuleSet& default_rule_set();

RuleSet load_rule_set(const std::string& path);
void save_rule_set(const RuleSet& rules, const std::string& path);

/// Indices of rules whose required AUs are all active and forbidden AUs all
/// inactive. Multiple affects may co-fire.
std::vector<std::size_t> evaluate_rules(const FaceFrame& frame, const RuleSet& rules);

struct DominantAffect {
  std::optional<std::size_t> dominant;  // index into rules; nullopt if none fired
  std::vector<long> frame_counts;       // per rule, over qualifying frames
  std::size_t n_qualifying_frames = 0;
};

/// Most frequently firing affect over frames passing the confidence gate
/// (frames with confidence < min_confidence are excluded). Ties resolve to
/// the earlier rule in the set.
DominantAffect dominant_affect(std::span<const FaceFrame> frames, const RuleSet& rules,
                               double min_confidence = 0.8);

struct HeadMotionFeatures {
  std::optional<double> nod_var;      // variance of pitch
  std::optional<double> turn_var;     // variance of yaw
  std::optional<double> incline_var;  // variance of roll
};

/// Population variance of head angles over frames passing the confidence
/// gate; all missing when fewer than 2 frames qualify.
HeadMotionFeatures head_motion_variance(std::span<const FaceFrame> frames,
                                        double min_confidence = 0.8);

}  // namespace ctpanel
