#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctpanel/channels.hpp"
#include "ctpanel/common.hpp"

namespace ctpanel {

using MemberId = std::string;

struct TurnEvent {
  MemberId speaker;
  double start = 0.0;  // seconds
  double end = 0.0;    // seconds, end > start
};

// The canonical AU codes carried by face frames (FACS subset used by the
// affect rules).
inline constexpr std::array<int, 12> kKnownAuCodes = {1,  2,  4,  5,  6,  7,
                                                      12, 15, 23, 25, 26, 45};

inline bool is_known_au(int code) {
  for (int c : kKnownAuCodes)
    if (c == code) return true;
  return false;
}

struct FaceFrame {
  double timestamp = 0.0;
  std::uint64_t au_mask = 0;  // bit k set <=> AU k active
  double confidence = 0.0;    // [0,1]; 0 when no face was detected
  double pitch = 0.0, yaw = 0.0, roll = 0.0;  // radians

  bool au_active(int code) const { return (au_mask >> code) & 1u; }
  void set_au(int code, bool active) {
    if (active)
      au_mask |= (std::uint64_t{1} << code);
    else
      au_mask &= ~(std::uint64_t{1} << code);
  }
};

struct VerbalLabel {
  int slice_index = 0;
  MemberId member;
  int channel = 0;  // index into kChannelNames, must be < kNumVerbalChannels
  long count = 0;
};

struct RaterScore {
  int slice_index = 0;
  MemberId member;
  std::string rater_id;
  int score = 0;              // {0,1,2}
  double hit_duration = 0.0;  // seconds the rater spent on this unit
};

struct SessionLog {
  std::string group_id;
  std::vector<MemberId> members;
  std::vector<TurnEvent> turns;
  std::map<MemberId, std::vector<FaceFrame>> frames;
  std::vector<VerbalLabel> verbal_labels;
  std::vector<RaterScore> ratings;
  double session_length = 0.0;  // seconds
};

/// Checks the SessionLog invariants (unique members, event timestamps in
/// range, per-speaker turns non-overlapping, scores ordinal). Throws
/// DataError on the first violation.
void validate_session(const SessionLog& session);

struct Slice {
  int index = 0;
  double start = 0.0;
  double end = 0.0;
  double midpoint() const { return 0.5 * (start + end); }
};

/// Contiguous non-overlapping slices covering [0, session_length). A partial
/// final slice is kept iff it spans at least half of slice_len.
std::vector<Slice> build_slice_grid(double session_length, double slice_len);

// ---------------------------------------------------------------------------
// BehaviorPanel
// ---------------------------------------------------------------------------

struct PanelRecord {
  int slice_index = 0;
  double time = 0.0;  // slice midpoint, seconds from session start
  std::array<std::optional<double>, kNumChannels> channels;
  std::optional<double> curiosity;  // ordinal {0,1,2} from raters; simulated
                                    // panels may carry continuous values
};

struct MemberSeries {
  MemberId member;
  std::vector<PanelRecord> records;  // ascending slice_index
};

struct BehaviorPanel {
  std::string group_id;
  std::vector<MemberSeries> members;

  const MemberSeries* find_member(const MemberId& id) const {
    for (const auto& m : members)
      if (m.member == id) return &m;
    return nullptr;
  }
};

struct ChannelValue {
  MemberId member;
  int slice_index = 0;
  int channel = 0;
  double value = 0.0;
};

struct CuriosityValue {
  MemberId member;
  int slice_index = 0;
  double score = 0.0;
};

/// Builds one record per (member, slice). Count-like channels absent from
/// `features` become 0; variance/turn channels stay missing. Duplicate
/// (member, slice, channel) entries and unknown members are DataErrors.
/// Member order follows session.members; the result is invariant under
/// permutation of the feature/curiosity input order.
BehaviorPanel assemble_panel(const SessionLog& session, double slice_len,
                             std::span<const ChannelValue> features,
                             std::span<const CuriosityValue> curiosity);

struct ValidationReport {
  std::vector<std::string> violations;
  std::array<double, kNumChannels> missing_rate{};  // fraction of records
  double curiosity_missing_rate = 0.0;
  std::map<MemberId, std::size_t> slice_counts;

  bool ok() const { return violations.empty(); }
};

struct ValidationOptions {
  bool expect_ordinal_curiosity = true;
};

/// Reporting-only pass: never throws, lists invariant violations and
/// missing-data rates.
ValidationReport validate_panel(const BehaviorPanel& panel,
                                const ValidationOptions& opts = {});

}  // namespace ctpanel
