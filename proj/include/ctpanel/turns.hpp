#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctpanel/panel.hpp"

namespace ctpanel {

// Directed edge responder -> prior speaker, accumulated over adjacent
// speaker changes inside one window.
struct TurnEdge {
  MemberId from;  // responder
  MemberId to;    // prior speaker
  long count = 0;
  double latency_sum = 0.0;     // gaps between turns, negative gaps clamp to 0
  double floor_time_sum = 0.0;  // prior speaker's floor time on those turns
};

struct TurnGraph {
  std::vector<MemberId> nodes;  // members speaking inside the window, sorted
  std::vector<TurnEdge> edges;
  double window_start = 0.0;
  double window_end = 0.0;
  std::map<MemberId, double> floor_time;  // per-member total clipped floor time

  const TurnEdge* find_edge(const MemberId& from, const MemberId& to) const;
};

struct TurnMetricConfig {
  double alpha_in = -0.5;
  double alpha_out = 0.5;
  double epsilon = 0.1;  // floor (seconds) for zero time components
  // "Silence"/"talkativeness" use the prior speaker's floor time as written;
  // the gap-based reading is available as an alternative.
  bool use_gap_silence = false;
};

/// Clips turns to [window.start, window.end), merges consecutive turns by the
/// same speaker, and accumulates one edge per adjacent speaker change.
TurnGraph build_turn_graph(std::span<const TurnEvent> turns, double window_start,
                           double window_end);

/// activity^(1-a) * max(silence, eps)^a with a = alpha_in. Activity counts
/// distinct members this member responded to; silence sums their floor time
/// on the turns handed over. Missing when the member responded to nobody.
std::optional<double> turn_indegree(const MemberId& member, const TurnGraph& graph,
                                    const TurnMetricConfig& config = {});

/// pe^(1-a) * max(talk, eps)^a with a = alpha_out. Participation equality
/// counts distinct members this member yielded the floor to; talkativeness
/// sums this member's floor time on those turns. Missing when nobody
/// responded to this member.
std::optional<double> turn_outdegree(const MemberId& member, const TurnGraph& graph,
                                     const TurnMetricConfig& config = {});

struct SliceTurnMetrics {
  std::optional<double> indegree;
  std::optional<double> outdegree;
};

/// Metrics per (member, slice); turns spanning slice boundaries contribute to
/// every slice they overlap.
std::map<std::pair<MemberId, int>, SliceTurnMetrics> slice_turn_metrics(
    std::span<const TurnEvent> turns, std::span<const Slice> grid,
    std::span<const MemberId> members, const TurnMetricConfig& config = {});

}  // namespace ctpanel
