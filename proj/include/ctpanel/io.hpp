#pragma once

#include <string>
#include <vector>

#include "ctpanel/fit.hpp"
#include "ctpanel/panel.hpp"

namespace ctpanel {

/// Reads one session directory: session.json, turns.csv, frames.jsonl,
/// verbal.csv, ratings.csv. All five files must exist; the error message
/// lists every missing one. The parsed log is validated.
SessionLog read_session_dir(const std::string& dir);

/// panel.jsonl: one record per (member, slice), channels by canonical name,
/// missing values as null. Files may carry several groups; record order is
/// preserved on a write -> read -> write round trip.
void write_panels_jsonl(std::span<const BehaviorPanel> panels, const std::string& path);
std::vector<BehaviorPanel> read_panels_jsonl(const std::string& path);

void write_fit_json(const FitResult& result, const std::string& path);
FitResult read_fit_json(const std::string& path);

void write_links_csv(const LinkReport& report, const std::string& path);

/// Deterministic shortest round-trip formatting used in CSV artifacts.
std::string format_double(double v);

}  // namespace ctpanel
