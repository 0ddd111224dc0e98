#include "ctpanel/reliability.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <tuple>

namespace ctpanel {

std::vector<RaterProfile> build_rater_profiles(const std::vector<RaterScore>& ratings) {
  std::map<std::string, RaterProfile> by_rater;
  for (const auto& r : ratings) {
    auto& p = by_rater[r.rater_id];
    p.rater_id = r.rater_id;
    p.mean_hit_duration += r.hit_duration;
    if (r.score < 0 || r.score > 2)
      throw DataError(fmt::format("rating score {} not in {{0,1,2}}", r.score));
    p.label_marginals[static_cast<std::size_t>(r.score)] += 1.0;
    ++p.n_ratings;
  }
  std::vector<RaterProfile> profiles;
  profiles.reserve(by_rater.size());
  for (auto& [id, p] : by_rater) {
    p.mean_hit_duration /= static_cast<double>(p.n_ratings);
    for (auto& m : p.label_marginals) m /= static_cast<double>(p.n_ratings);
    profiles.push_back(std::move(p));
  }
  return profiles;
}

std::vector<std::string> filter_raters_by_time(const std::vector<RaterProfile>& profiles,
                                               double k) {
  if (profiles.size() < 2)
    throw DataError("time filter needs at least 2 rater profiles");
  if (k <= 0.0) throw DataError("time filter k must be positive");

  double mean = 0.0;
  for (const auto& p : profiles) mean += p.mean_hit_duration;
  mean /= static_cast<double>(profiles.size());
  double var = 0.0;
  for (const auto& p : profiles) {
    const double d = p.mean_hit_duration - mean;
    var += d * d;
  }
  var /= static_cast<double>(profiles.size());  // population variance
  const double threshold = mean - k * std::sqrt(var);

  std::vector<std::string> retained;
  for (const auto& p : profiles)
    if (p.mean_hit_duration >= threshold) retained.push_back(p.rater_id);
  std::sort(retained.begin(), retained.end());
  return retained;
}

namespace {

// Complete-case cells: rows with no missing value among the selected columns.
std::vector<std::vector<double>> complete_cases(const RatingMatrix& matrix,
                                                const std::vector<std::size_t>& cols) {
  std::vector<std::vector<double>> rows;
  for (const auto& unit : matrix.cells) {
    std::vector<double> row;
    row.reserve(cols.size());
    bool complete = true;
    for (std::size_t c : cols) {
      if (!unit[c]) {
        complete = false;
        break;
      }
      row.push_back(static_cast<double>(*unit[c]));
    }
    if (complete) rows.push_back(std::move(row));
  }
  return rows;
}

double icc21_from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t n = rows.size();
  if (n < 2) throw DataError("icc needs at least 2 complete units");
  const std::size_t k = rows[0].size();
  if (k < 2) throw DataError("icc needs at least 2 raters");

  double grand = 0.0;
  for (const auto& row : rows)
    for (double v : row) grand += v;
  grand /= static_cast<double>(n * k);

  std::vector<double> row_mean(n, 0.0), col_mean(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      row_mean[i] += rows[i][j];
      col_mean[j] += rows[i][j];
    }
    row_mean[i] /= static_cast<double>(k);
  }
  for (auto& c : col_mean) c /= static_cast<double>(n);

  double ss_total = 0.0, ss_rows = 0.0, ss_cols = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double d = rows[i][j] - grand;
      ss_total += d * d;
    }
  for (double rm : row_mean) ss_rows += (rm - grand) * (rm - grand);
  ss_rows *= static_cast<double>(k);
  for (double cm : col_mean) ss_cols += (cm - grand) * (cm - grand);
  ss_cols *= static_cast<double>(n);
  const double ss_err = ss_total - ss_rows - ss_cols;

  if (ss_total <= 0.0)
    throw DegenerateInputError("icc undefined: rating matrix has zero variance");

  const double nd = static_cast<double>(n), kd = static_cast<double>(k);
  const double msr = ss_rows / (nd - 1.0);
  const double msc = ss_cols / (kd - 1.0);
  const double mse = ss_err / ((nd - 1.0) * (kd - 1.0));

  const double denom = msr + (kd - 1.0) * mse + (kd / nd) * (msc - mse);
  if (denom == 0.0)
    throw DegenerateInputError("icc undefined: zero denominator");
  return (msr - mse) / denom;
}

}  // namespace

double icc(const RatingMatrix& matrix) {
  if (matrix.n_raters() < 2) throw DataError("icc needs at least 2 raters");
  std::vector<std::size_t> cols(matrix.n_raters());
  for (std::size_t c = 0; c < cols.size(); ++c) cols[c] = c;
  return icc21_from_rows(complete_cases(matrix, cols));
}

RaterSubsetResult best_rater_subset(const RatingMatrix& matrix, std::size_t min_size) {
  const std::size_t k = matrix.n_raters();
  if (min_size < 2) throw DataError("min_size must be >= 2");
  if (k > 10) throw DataError("subset enumeration supports at most 10 raters");
  if (k < min_size) throw DataError("fewer raters than min_size");

  std::optional<RaterSubsetResult> best;
  for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < k; ++c)
      if ((mask >> c) & 1u) cols.push_back(c);
    if (cols.size() < min_size) continue;

    double value;
    try {
      value = icc21_from_rows(complete_cases(matrix, cols));
    } catch (const DegenerateInputError&) {
      continue;
    } catch (const DataError&) {
      continue;  // too few complete units for this subset
    }

    std::vector<std::string> ids;
    ids.reserve(cols.size());
    for (std::size_t c : cols) ids.push_back(matrix.raters[c]);
    std::sort(ids.begin(), ids.end());

    const bool better =
        !best || value > best->icc ||
        (value == best->icc && ids.size() > best->raters.size()) ||
        (value == best->icc && ids.size() == best->raters.size() && ids < best->raters);
    if (better) best = RaterSubsetResult{std::move(ids), value};
  }
  if (!best)
    throw DegenerateInputError("no rater subset yields a defined ICC");
  return *best;
}

double krippendorff_alpha(const RatingMatrix& matrix, AlphaLevel level) {
  // Collect pairable values and the observed label set.
  std::set<int> labels;
  std::size_t n_pairable = 0;
  for (const auto& unit : matrix.cells) {
    std::size_t m = 0;
    for (const auto& cell : unit)
      if (cell) ++m;
    if (m >= 2) {
      n_pairable += m;
      for (const auto& cell : unit)
        if (cell) labels.insert(*cell);
    }
  }
  if (n_pairable < 2) throw DataError("krippendorff_alpha: fewer than 2 pairable values");
  if (labels.size() < 2)
    throw DegenerateInputError(
        "krippendorff_alpha undefined: only one label among pairable values");

  std::vector<int> label_list(labels.begin(), labels.end());
  std::map<int, std::size_t> label_idx;
  for (std::size_t i = 0; i < label_list.size(); ++i) label_idx[label_list[i]] = i;
  const std::size_t L = label_list.size();

  // Coincidence matrix: each ordered pair of values within a unit adds
  // 1/(m_u - 1).
  std::vector<std::vector<double>> o(L, std::vector<double>(L, 0.0));
  for (const auto& unit : matrix.cells) {
    std::vector<int> vals;
    for (const auto& cell : unit)
      if (cell) vals.push_back(*cell);
    if (vals.size() < 2) continue;
    const double w = 1.0 / static_cast<double>(vals.size() - 1);
    for (std::size_t a = 0; a < vals.size(); ++a)
      for (std::size_t b = 0; b < vals.size(); ++b)
        if (a != b) o[label_idx[vals[a]]][label_idx[vals[b]]] += w;
  }

  std::vector<double> marginal(L, 0.0);
  double n_total = 0.0;
  for (std::size_t c = 0; c < L; ++c) {
    for (std::size_t g = 0; g < L; ++g) marginal[c] += o[c][g];
    n_total += marginal[c];
  }

  // Squared difference function on label indices c <= g (symmetric).
  auto delta2 = [&](std::size_t c, std::size_t g) -> double {
    if (c == g) return 0.0;
    if (level == AlphaLevel::Nominal) return 1.0;
    // Ordinal metric: cumulative marginals between the two ranks.
    const std::size_t lo = std::min(c, g), hi = std::max(c, g);
    double cum = 0.0;
    for (std::size_t t = lo; t <= hi; ++t) cum += marginal[t];
    cum -= 0.5 * (marginal[lo] + marginal[hi]);
    return cum * cum;
  };

  double d_obs = 0.0, d_exp = 0.0;
  for (std::size_t c = 0; c < L; ++c)
    for (std::size_t g = 0; g < L; ++g) {
      d_obs += o[c][g] * delta2(c, g);
      d_exp += marginal[c] * marginal[g] * delta2(c, g);
    }
  d_exp /= (n_total - 1.0);
  if (d_exp == 0.0)
    throw DegenerateInputError("krippendorff_alpha undefined: zero expected disagreement");
  return 1.0 - d_obs / d_exp;
}

int inverse_bias_correct(const std::map<std::string, int>& unit_scores,
                         const std::vector<RaterProfile>& profiles,
                         const BiasCorrectionConfig& config) {
  if (unit_scores.empty()) throw DataError("inverse_bias_correct: empty vote set");
  std::map<std::string, const RaterProfile*> by_id;
  for (const auto& p : profiles) by_id[p.rater_id] = &p;

  std::array<double, 3> weight{};
  for (const auto& [rater, score] : unit_scores) {
    if (score < 0 || score > 2)
      throw DataError(fmt::format("vote score {} not in {{0,1,2}}", score));
    auto it = by_id.find(rater);
    if (it == by_id.end())
      throw DataError(fmt::format("no profile for voting rater '{}'", rater));
    const double marginal = it->second->label_marginals[static_cast<std::size_t>(score)];
    weight[static_cast<std::size_t>(score)] +=
        1.0 / std::max(marginal, config.marginal_floor);
  }

  int best = config.tie_break_high ? 2 : 0;
  if (config.tie_break_high) {
    for (int s = 2; s >= 0; --s)
      if (weight[static_cast<std::size_t>(s)] > weight[static_cast<std::size_t>(best)])
        best = s;
  } else {
    for (int s = 0; s <= 2; ++s)
      if (weight[static_cast<std::size_t>(s)] > weight[static_cast<std::size_t>(best)])
        best = s;
  }
  return best;
}

CuriosityDerivation derive_curiosity(const std::vector<RaterScore>& ratings,
                                     int n_slices, const RatingConfig& config) {
  CuriosityDerivation result;
  if (ratings.empty()) return result;

  const auto profiles = build_rater_profiles(ratings);
  std::vector<std::string> retained;
  if (profiles.size() >= 2) {
    retained = filter_raters_by_time(profiles, config.time_sd_k);
  } else {
    retained.push_back(profiles[0].rater_id);
  }
  result.retained_raters = retained;
  const bool search_subsets = retained.size() >= std::max<std::size_t>(config.min_raters, 2);
  const std::set<std::string> retained_set(retained.begin(), retained.end());

  // Grouping units -> (member, slice) -> rater -> score.
  std::map<std::string, std::map<std::pair<MemberId, int>, std::map<std::string, int>>>
      groups;
  for (const auto& r : ratings) {
    if (!retained_set.count(r.rater_id)) continue;
    if (r.slice_index < 0 || r.slice_index >= n_slices)
      throw DataError(fmt::format("rating slice {} outside grid [0,{})",
                                  r.slice_index, n_slices));
    const std::string key =
        config.group_by == RatingConfig::GroupBy::Member ? r.member : std::string("*");
    auto& unit = groups[key][{r.member, r.slice_index}];
    if (unit.count(r.rater_id))
      throw DataError(fmt::format("duplicate rating by '{}' for (member '{}', slice {})",
                                  r.rater_id, r.member, r.slice_index));
    unit[r.rater_id] = r.score;
  }

  for (auto& [key, units] : groups) {
    RatingMatrix matrix;
    matrix.raters = retained;
    for (const auto& [unit_key, votes] : units) {
      std::vector<std::optional<int>> row(retained.size());
      for (std::size_t c = 0; c < retained.size(); ++c) {
        auto it = votes.find(retained[c]);
        if (it != votes.end()) row[c] = it->second;
      }
      matrix.cells.push_back(std::move(row));
    }

    std::set<std::string> chosen(retained.begin(), retained.end());
    RaterSubsetResult subset;
    subset.raters = retained;
    subset.icc = std::numeric_limits<double>::quiet_NaN();
    if (search_subsets) {
      try {
        subset = best_rater_subset(matrix, config.min_raters);
        chosen = std::set<std::string>(subset.raters.begin(), subset.raters.end());
      } catch (const DegenerateInputError&) {
        // e.g. constant ratings; fall back to all retained raters.
      } catch (const DataError&) {
        // too few complete units for any subset
      }
    }
    result.subsets[key] = subset;

    for (const auto& [unit_key, votes] : units) {
      std::map<std::string, int> kept_votes;
      for (const auto& [rater, score] : votes)
        if (chosen.count(rater)) kept_votes[rater] = score;
      if (kept_votes.empty()) continue;  // unit stays missing
      const int final_score = inverse_bias_correct(kept_votes, profiles, config.bias);
      result.scores.push_back(
          {unit_key.first, unit_key.second, static_cast<double>(final_score)});
    }
  }
  std::sort(result.scores.begin(), result.scores.end(),
            [](const CuriosityValue& a, const CuriosityValue& b) {
              return std::tie(a.member, a.slice_index) < std::tie(b.member, b.slice_index);
            });
  return result;
}

}  // namespace ctpanel
