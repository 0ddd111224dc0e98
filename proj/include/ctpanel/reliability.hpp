#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctpanel/common.hpp"
#include "ctpanel/panel.hpp"

namespace ctpanel {

// Units (member x slice) in rows, raters in columns, ordinal {0,1,2} scores
// in cells; absent ratings are nullopt.
struct RatingMatrix {
  std::vector<std::string> raters;
  std::vector<std::vector<std::optional<int>>> cells;  // units x raters

  std::size_t n_units() const { return cells.size(); }
  std::size_t n_raters() const { return raters.size(); }
};

struct RaterProfile {
  std::string rater_id;
  double mean_hit_duration = 0.0;
  std::array<double, 3> label_marginals{};  // frequency of scores 0/1/2
  std::size_t n_ratings = 0;
};

/// One profile per rater appearing in `ratings` (sorted by rater id).
std::vector<RaterProfile> build_rater_profiles(const std::vector<RaterScore>& ratings);

/// Retains rater r iff mean_hit_duration(r) >= mean - k*sd, where mean/sd are
/// over all raters' mean durations and sd is the population standard
/// deviation. Needs at least two profiles.
std::vector<std::string> filter_raters_by_time(const std::vector<RaterProfile>& profiles,
                                               double k);

/// ICC(2,1): two-way random effects, absolute agreement, single measure.
/// Units with any missing cell are dropped first. Throws DegenerateInputError
/// when the complete-case matrix has zero total variance, DataError when
/// fewer than 2 raters or 2 complete units remain.
double icc(const RatingMatrix& matrix);

struct RaterSubsetResult {
  std::vector<std::string> raters;  // sorted ids
  double icc = 0.0;
};

/// Exhaustive search over all rater subsets of size >= min_size (at most 10
/// raters). Ties broken by larger subset, then lexicographically smaller
/// sorted id list. Subsets whose ICC is undefined are skipped; if every
/// candidate is undefined or infeasible a DegenerateInputError is thrown.
RaterSubsetResult best_rater_subset(const RatingMatrix& matrix, std::size_t min_size);

enum class AlphaLevel { Nominal, Ordinal };

/// Krippendorff's alpha from the coincidence matrix of pairable values.
/// Throws DataError with fewer than 2 pairable values and
/// DegenerateInputError when only one distinct label occurs.
double krippendorff_alpha(const RatingMatrix& matrix, AlphaLevel level);

struct BiasCorrectionConfig {
  double marginal_floor = 1e-6;  // weight divisor floor for never-used labels
  bool tie_break_high = true;    // ties resolve toward the higher score
};

/// Inverse-marginal weighted vote: a vote for score s by rater r carries
/// weight 1 / max(marginal_r(s), floor); the score with the largest weight
/// sum wins.
int inverse_bias_correct(const std::map<std::string, int>& unit_scores,
                         const std::vector<RaterProfile>& profiles,
                         const BiasCorrectionConfig& config = {});

// ---------------------------------------------------------------------------
// Ground-truth derivation pipeline (per session).
// ---------------------------------------------------------------------------

struct RatingConfig {
  std::size_t min_raters = 2;
  double time_sd_k = 1.5;     // rater time filter, in population sds
  BiasCorrectionConfig bias;
  // Subset selection granularity: one rating matrix (and best subset) per
  // member's video by default.
  enum class GroupBy { Member, Session } group_by = GroupBy::Member;
};

struct CuriosityDerivation {
  std::vector<CuriosityValue> scores;
  std::vector<std::string> retained_raters;
  // Per grouping unit: key is the member id (or "*" for Session grouping).
  std::map<std::string, RaterSubsetResult> subsets;
};

/// Full §-style post-processing: time-based rater filtering, per-unit best
/// subset by ICC, inverse-bias-corrected final score per (member, slice).
/// Units where no retained rater voted stay missing. Grouping units whose
/// subset search is degenerate (e.g. constant ratings) fall back to all
/// retained raters with an undefined ICC recorded as NaN.
CuriosityDerivation derive_curiosity(const std::vector<RaterScore>& ratings,
                                     int n_slices, const RatingConfig& config);

}  // namespace ctpanel
