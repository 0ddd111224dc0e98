#include "ctpanel/turns.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

namespace ctpanel {

const TurnEdge* TurnGraph::find_edge(const MemberId& from, const MemberId& to) const {
  for (const auto& e : edges)
    if (e.from == from && e.to == to) return &e;
  return nullptr;
}

TurnGraph build_turn_graph(std::span<const TurnEvent> turns, double window_start,
                           double window_end) {
  TurnGraph graph;
  graph.window_start = window_start;
  graph.window_end = window_end;
  if (!(window_end > window_start)) return graph;

  struct Clipped {
    MemberId speaker;
    double start, end;
    double talk;  // actual speaking time; excludes intra-speaker pauses
  };
  std::vector<Clipped> clipped;
  for (const auto& t : turns) {
    const double s = std::max(t.start, window_start);
    const double e = std::min(t.end, window_end);
    if (e > s) clipped.push_back({t.speaker, s, e, e - s});
  }
  std::sort(clipped.begin(), clipped.end(), [](const Clipped& a, const Clipped& b) {
    return std::tie(a.start, a.end, a.speaker) < std::tie(b.start, b.end, b.speaker);
  });

  // Consecutive turns by the same speaker merge into one floor holding.
  std::vector<Clipped> merged;
  for (const auto& c : clipped) {
    if (!merged.empty() && merged.back().speaker == c.speaker) {
      merged.back().end = std::max(merged.back().end, c.end);
      merged.back().talk += c.talk;
    } else {
      merged.push_back(c);
    }
  }

  std::set<MemberId> nodes;
  std::map<std::pair<MemberId, MemberId>, TurnEdge> edges;
  for (std::size_t i = 0; i < merged.size(); ++i) {
    const auto& cur = merged[i];
    nodes.insert(cur.speaker);
    graph.floor_time[cur.speaker] += cur.talk;
    if (i == 0) continue;
    const auto& prev = merged[i - 1];
    auto& edge = edges[{cur.speaker, prev.speaker}];
    edge.from = cur.speaker;
    edge.to = prev.speaker;
    edge.count += 1;
    edge.latency_sum += std::max(0.0, cur.start - prev.end);
    edge.floor_time_sum += prev.talk;
  }

  graph.nodes.assign(nodes.begin(), nodes.end());
  for (auto& [key, edge] : edges) graph.edges.push_back(edge);
  return graph;
}

std::optional<double> turn_indegree(const MemberId& member, const TurnGraph& graph,
                                    const TurnMetricConfig& config) {
  std::set<MemberId> responded_to;
  double silence = 0.0;
  for (const auto& e : graph.edges) {
    if (e.from != member) continue;
    responded_to.insert(e.to);
    silence += config.use_gap_silence ? e.latency_sum : e.floor_time_sum;
  }
  if (responded_to.empty()) return std::nullopt;
  const double activity = static_cast<double>(responded_to.size());
  const double a = config.alpha_in;
  return std::pow(activity, 1.0 - a) * std::pow(std::max(silence, config.epsilon), a);
}

std::optional<double> turn_outdegree(const MemberId& member, const TurnGraph& graph,
                                     const TurnMetricConfig& config) {
  std::set<MemberId> yielded_to;
  double talk = 0.0;
  for (const auto& e : graph.edges) {
    if (e.to != member) continue;
    yielded_to.insert(e.from);
    talk += e.floor_time_sum;
  }
  if (yielded_to.empty()) return std::nullopt;
  const double pe = static_cast<double>(yielded_to.size());
  const double a = config.alpha_out;
  return std::pow(pe, 1.0 - a) * std::pow(std::max(talk, config.epsilon), a);
}

std::map<std::pair<MemberId, int>, SliceTurnMetrics> slice_turn_metrics(
    std::span<const TurnEvent> turns, std::span<const Slice> grid,
    std::span<const MemberId> members, const TurnMetricConfig& config) {
  std::map<std::pair<MemberId, int>, SliceTurnMetrics> out;
  for (const auto& slice : grid) {
    const TurnGraph graph = build_turn_graph(turns, slice.start, slice.end);
    for (const auto& m : members) {
      auto& metrics = out[{m, slice.index}];
      metrics.indegree = turn_indegree(m, graph, config);
      metrics.outdegree = turn_outdegree(m, graph, config);
    }
  }
  return out;
}

}  // namespace ctpanel
