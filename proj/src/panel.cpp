#include "ctpanel/panel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <tuple>

namespace ctpanel {

void validate_session(const SessionLog& session) {
  if (session.session_length <= 0.0)
    throw DataError("session_length must be positive");
  if (session.members.empty()) throw DataError("session has no members");

  std::set<MemberId> seen;
  for (const auto& m : session.members)
    if (!seen.insert(m).second)
      throw DataError(fmt::format("duplicate member id '{}'", m));

  auto known = [&](const MemberId& m) { return seen.count(m) > 0; };

  std::map<MemberId, std::vector<std::pair<double, double>>> per_speaker;
  for (const auto& t : session.turns) {
    if (!known(t.speaker))
      throw DataError(fmt::format("turn references unknown member '{}'", t.speaker));
    if (!(t.end > t.start))
      throw DataError(fmt::format("turn for '{}' has end <= start", t.speaker));
    if (t.start < 0.0 || t.end > session.session_length)
      throw DataError(fmt::format("turn for '{}' outside [0, session_length]", t.speaker));
    per_speaker[t.speaker].emplace_back(t.start, t.end);
  }
  for (auto& [speaker, spans] : per_speaker) {
    std::sort(spans.begin(), spans.end());
    for (std::size_t i = 1; i < spans.size(); ++i)
      if (spans[i].first < spans[i - 1].second)
        throw DataError(fmt::format("overlapping turns for speaker '{}'", speaker));
  }

  for (const auto& [member, frames] : session.frames) {
    if (!known(member))
      throw DataError(fmt::format("frames reference unknown member '{}'", member));
    for (const auto& f : frames) {
      if (f.timestamp < 0.0 || f.timestamp > session.session_length)
        throw DataError(fmt::format("frame for '{}' outside [0, session_length]", member));
      if (f.confidence < 0.0 || f.confidence > 1.0)
        throw DataError(fmt::format("frame confidence {} outside [0,1]", f.confidence));
      for (int code = 0; code < 64; ++code)
        if (((f.au_mask >> code) & 1u) && !is_known_au(code))
          throw DataError(fmt::format("unknown AU code {} in frame for '{}'", code, member));
    }
  }

  for (const auto& v : session.verbal_labels) {
    if (!known(v.member))
      throw DataError(fmt::format("verbal label references unknown member '{}'", v.member));
    if (v.channel < 0 || v.channel >= kNumVerbalChannels)
      throw DataError("verbal label channel out of range");
    if (v.count < 0) throw DataError("verbal label count must be >= 0");
  }

  for (const auto& r : session.ratings) {
    if (!known(r.member))
      throw DataError(fmt::format("rating references unknown member '{}'", r.member));
    if (r.score < 0 || r.score > 2)
      throw DataError(fmt::format("rating score {} not in {{0,1,2}}", r.score));
    if (r.hit_duration < 0.0) throw DataError("hit_duration must be >= 0");
  }
}

std::vector<Slice> build_slice_grid(double session_length, double slice_len) {
  if (slice_len <= 0.0) throw DataError("slice_len must be positive");
  if (session_length <= 0.0) throw DataError("empty session: session_length must be positive");

  std::vector<Slice> grid;
  const int full = static_cast<int>(std::floor(session_length / slice_len + 1e-12));
  for (int i = 0; i < full; ++i)
    grid.push_back({i, i * slice_len, (i + 1) * slice_len});
  const double tail_start = full * slice_len;
  const double tail = session_length - tail_start;
  // Partial final slice kept iff it covers at least half a slice.
  if (tail >= 0.5 * slice_len - 1e-12 && tail > 1e-12)
    grid.push_back({full, tail_start, session_length});
  if (grid.empty())
    throw DataError("session shorter than half a slice; no grid");
  return grid;
}

BehaviorPanel assemble_panel(const SessionLog& session, double slice_len,
                             std::span<const ChannelValue> features,
                             std::span<const CuriosityValue> curiosity) {
  validate_session(session);
  const auto grid = build_slice_grid(session.session_length, slice_len);
  const int n_slices = static_cast<int>(grid.size());

  std::map<MemberId, std::size_t> member_index;
  for (std::size_t i = 0; i < session.members.size(); ++i)
    member_index[session.members[i]] = i;

  BehaviorPanel panel;
  panel.group_id = session.group_id;
  panel.members.resize(session.members.size());
  for (std::size_t i = 0; i < session.members.size(); ++i) {
    auto& series = panel.members[i];
    series.member = session.members[i];
    series.records.resize(grid.size());
    for (const auto& slice : grid) {
      auto& rec = series.records[static_cast<std::size_t>(slice.index)];
      rec.slice_index = slice.index;
      rec.time = slice.midpoint();
      for (int c = 0; c < kNumChannels; ++c)
        if (channel_defaults_to_zero(c)) rec.channels[c] = 0.0;
    }
  }

  std::set<std::tuple<std::size_t, int, int>> seen;
  for (const auto& f : features) {
    auto it = member_index.find(f.member);
    if (it == member_index.end())
      throw DataError(fmt::format("feature references unknown member '{}'", f.member));
    if (f.slice_index < 0 || f.slice_index >= n_slices)
      throw DataError(fmt::format("feature slice {} outside grid [0,{})",
                                  f.slice_index, n_slices));
    if (f.channel < 0 || f.channel >= kNumChannels)
      throw DataError("feature channel index out of range");
    if (!seen.insert({it->second, f.slice_index, f.channel}).second)
      throw DataError(fmt::format(
          "duplicate entry for (member '{}', slice {}, channel '{}')", f.member,
          f.slice_index, channel_name(f.channel)));
    panel.members[it->second]
        .records[static_cast<std::size_t>(f.slice_index)]
        .channels[f.channel] = f.value;
  }

  std::set<std::pair<std::size_t, int>> seen_cur;
  for (const auto& c : curiosity) {
    auto it = member_index.find(c.member);
    if (it == member_index.end())
      throw DataError(fmt::format("curiosity references unknown member '{}'", c.member));
    if (c.slice_index < 0 || c.slice_index >= n_slices)
      throw DataError(fmt::format("curiosity slice {} outside grid [0,{})",
                                  c.slice_index, n_slices));
    if (!seen_cur.insert({it->second, c.slice_index}).second)
      throw DataError(fmt::format("duplicate curiosity for (member '{}', slice {})",
                                  c.member, c.slice_index));
    panel.members[it->second]
        .records[static_cast<std::size_t>(c.slice_index)]
        .curiosity = c.score;
  }
  return panel;
}

ValidationReport validate_panel(const BehaviorPanel& panel,
                                const ValidationOptions& opts) {
  ValidationReport report;
  std::size_t n_records = 0;
  std::array<std::size_t, kNumChannels> missing{};
  std::size_t missing_curiosity = 0;

  std::set<MemberId> ids;
  for (const auto& series : panel.members) {
    if (!ids.insert(series.member).second)
      report.violations.push_back(
          fmt::format("duplicate member '{}'", series.member));
    report.slice_counts[series.member] = series.records.size();
    double prev_time = -std::numeric_limits<double>::infinity();
    int prev_slice = -1;
    for (const auto& rec : series.records) {
      ++n_records;
      if (!(rec.time > prev_time))
        report.violations.push_back(fmt::format(
            "non-monotone time for member '{}' at slice {}", series.member,
            rec.slice_index));
      if (rec.slice_index <= prev_slice)
        report.violations.push_back(fmt::format(
            "non-increasing slice index for member '{}'", series.member));
      prev_time = rec.time;
      prev_slice = rec.slice_index;
      for (int c = 0; c < kNumChannels; ++c) {
        if (!rec.channels[c]) {
          ++missing[c];
        } else if (!std::isfinite(*rec.channels[c])) {
          report.violations.push_back(
              fmt::format("non-finite value in channel '{}' for member '{}' slice {}",
                          channel_name(c), series.member, rec.slice_index));
        }
      }
      if (!rec.curiosity) {
        ++missing_curiosity;
      } else if (opts.expect_ordinal_curiosity) {
        const double v = *rec.curiosity;
        if (v != 0.0 && v != 1.0 && v != 2.0)
          report.violations.push_back(fmt::format(
              "curiosity {} not in {{0,1,2}} for member '{}' slice {}", v,
              series.member, rec.slice_index));
      }
    }
  }

  if (n_records > 0) {
    for (int c = 0; c < kNumChannels; ++c)
      report.missing_rate[c] =
          static_cast<double>(missing[c]) / static_cast<double>(n_records);
    report.curiosity_missing_rate =
        static_cast<double>(missing_curiosity) / static_cast<double>(n_records);
  }
  return report;
}

}  // namespace ctpanel
