#include <algorithm>
#include <optional>

#include "ctpanel/reliability.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace ctpanel;

namespace {

RatingMatrix make_matrix(std::vector<std::string> raters,
                         std::vector<std::vector<std::optional<int>>> cells) {
  RatingMatrix m;
  m.raters = std::move(raters);
  m.cells = std::move(cells);
  return m;
}

std::vector<RaterProfile> profiles_with_durations(const std::vector<double>& durations) {
  std::vector<RaterProfile> profiles;
  for (std::size_t i = 0; i < durations.size(); ++i) {
    RaterProfile p;
    p.rater_id = "r" + std::to_string(i + 1);
    p.mean_hit_duration = durations[i];
    p.label_marginals = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    p.n_ratings = 1;
    profiles.push_back(p);
  }
  return profiles;
}

}  // namespace

TEST_CASE("time filter: zero spread keeps everyone") {
  const auto kept = filter_raters_by_time(profiles_with_durations({10, 10, 10, 10}), 1.5);
  CHECK(kept.size() == 4);
}

TEST_CASE("time filter: hand-computed threshold removes the rusher") {
  // mean 8.2, population sd 3.6 -> threshold 2.8
  const auto kept =
      filter_raters_by_time(profiles_with_durations({10, 10, 10, 10, 1}), 1.5);
  CHECK(kept == std::vector<std::string>({"r1", "r2", "r3", "r4"}));
}

TEST_CASE("time filter: huge k retains all raters") {
  const auto kept = filter_raters_by_time(profiles_with_durations({1, 5, 30, 100}), 1e9);
  CHECK(kept.size() == 4);
}

TEST_CASE("time filter: needs two profiles") {
  CHECK_THROWS_AS(filter_raters_by_time(profiles_with_durations({3.0}), 1.5), DataError);
}

TEST_CASE("icc: identical non-constant columns give exactly 1") {
  const auto m = make_matrix({"a", "b"}, {{0, 0}, {1, 1}, {2, 2}, {1, 1}});
  CHECK(icc(m) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("icc: constant matrix is undefined") {
  const auto m = make_matrix({"a", "b"}, {{1, 1}, {1, 1}, {1, 1}});
  CHECK_THROWS_AS(icc(m), DegenerateInputError);
}

TEST_CASE("icc: independent raters on large n are near zero") {
  Rng rng(7);
  std::vector<std::vector<std::optional<int>>> cells;
  for (int i = 0; i < 10000; ++i) {
    const int a = static_cast<int>(rng.uniform() * 3.0);
    const int b = static_cast<int>(rng.uniform() * 3.0);
    cells.push_back({std::min(a, 2), std::min(b, 2)});
  }
  const auto m = make_matrix({"a", "b"}, std::move(cells));
  CHECK(std::abs(icc(m)) < 0.05);
}

TEST_CASE("icc: matches the variance-component oracle on random matrices") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const int n_units = 4 + static_cast<int>(rng.uniform() * 8.0);
    const int n_raters = 2 + static_cast<int>(rng.uniform() * 3.0);
    std::vector<std::vector<std::optional<int>>> cells;
    std::vector<std::vector<double>> dense;
    for (int i = 0; i < n_units; ++i) {
      std::vector<std::optional<int>> row;
      std::vector<double> drow;
      for (int j = 0; j < n_raters; ++j) {
        const int v = std::min(static_cast<int>(rng.uniform() * 3.0), 2);
        row.push_back(v);
        drow.push_back(v);
      }
      cells.push_back(std::move(row));
      dense.push_back(std::move(drow));
    }
    std::vector<std::string> raters;
    for (int j = 0; j < n_raters; ++j) raters.push_back("r" + std::to_string(j));
    double expected;
    try {
      expected = oracles::icc21_variance_components(dense);
    } catch (...) {
      continue;
    }
    const auto m = make_matrix(raters, cells);
    double got;
    try {
      got = icc(m);
    } catch (const DegenerateInputError&) {
      continue;
    }
    CHECK(got == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("icc: invariant under unit and rater permutations") {
  const auto m = make_matrix({"a", "b", "c"},
                             {{0, 1, 2}, {1, 1, 0}, {2, 2, 2}, {0, 1, 1}, {2, 0, 1}});
  const double base = icc(m);
  const auto rows_permuted = make_matrix(
      {"a", "b", "c"}, {{2, 0, 1}, {0, 1, 1}, {2, 2, 2}, {1, 1, 0}, {0, 1, 2}});
  CHECK(icc(rows_permuted) == doctest::Approx(base).epsilon(1e-14));
  const auto cols_permuted = make_matrix(
      {"c", "a", "b"}, {{2, 0, 1}, {0, 1, 1}, {2, 2, 2}, {1, 0, 1}, {1, 2, 0}});
  CHECK(icc(cols_permuted) == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("best subset: the agreeing pair beats the antagonist") {
  const auto m = make_matrix(
      {"a", "b", "c"}, {{0, 0, 2}, {1, 1, 0}, {2, 2, 0}, {1, 1, 2}, {0, 0, 1}});
  const auto best = best_rater_subset(m, 2);
  CHECK(best.raters == std::vector<std::string>({"a", "b"}));
  CHECK(best.icc == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("best subset: all identical raters tie-break to the full set") {
  const auto m =
      make_matrix({"a", "b", "c"}, {{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {1, 1, 1}});
  const auto best = best_rater_subset(m, 2);
  CHECK(best.raters == std::vector<std::string>({"a", "b", "c"}));
  CHECK(best.icc == doctest::Approx(1.0));
}

TEST_CASE("best subset: beats or equals the full set, exhaustively verified") {
  Rng rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::vector<std::optional<int>>> cells;
    for (int i = 0; i < 8; ++i) {
      std::vector<std::optional<int>> row;
      for (int j = 0; j < 4; ++j)
        row.push_back(std::min(static_cast<int>(rng.uniform() * 3.0), 2));
      cells.push_back(std::move(row));
    }
    const auto m = make_matrix({"a", "b", "c", "d"}, cells);
    RaterSubsetResult best;
    try {
      best = best_rater_subset(m, 2);
    } catch (const DegenerateInputError&) {
      continue;
    }
    double full = -2.0;
    try {
      full = icc(m);
    } catch (const DegenerateInputError&) {
    }
    CHECK(best.icc >= full - 1e-12);

    // Cross-check the winner against a brute-force enumeration over the
    // 11 subsets of size >= 2.
    double brute_best = -2.0;
    for (int mask = 1; mask < 16; ++mask) {
      std::vector<int> cols;
      for (int c = 0; c < 4; ++c)
        if ((mask >> c) & 1) cols.push_back(c);
      if (cols.size() < 2) continue;
      std::vector<std::vector<double>> sub;
      for (const auto& row : cells) {
        std::vector<double> r;
        for (int c : cols) r.push_back(static_cast<double>(*row[c]));
        sub.push_back(std::move(r));
      }
      try {
        brute_best = std::max(brute_best, oracles::icc21_variance_components(sub));
      } catch (...) {
      }
    }
    if (std::isfinite(brute_best))
      CHECK(best.icc == doctest::Approx(brute_best).epsilon(1e-10));
  }
}

TEST_CASE("best subset: candidate count is C(4,2)+C(4,3)+C(4,4) = 11") {
  int count = 0;
  for (int mask = 1; mask < 16; ++mask) {
    int bits = 0;
    for (int c = 0; c < 4; ++c) bits += (mask >> c) & 1;
    if (bits >= 2) ++count;
  }
  CHECK(count == 11);
}

TEST_CASE("inverse bias correction: unanimity and worked example") {
  std::vector<RaterProfile> profiles(2);
  profiles[0].rater_id = "A";
  profiles[0].label_marginals = {0.05, 0.9, 0.05};  // overuses 1
  profiles[1].rater_id = "B";
  profiles[1].label_marginals = {0.1, 0.8, 0.1};

  CHECK(inverse_bias_correct({{"A", 2}, {"B", 2}}, profiles) == 2);
  // A votes 1 (weight 1/0.9 = 1.11), B votes 0 (weight 1/0.1 = 10) -> 0.
  CHECK(inverse_bias_correct({{"A", 1}, {"B", 0}}, profiles) == 0);
}

TEST_CASE("inverse bias correction: uniform marginals tie-break to the higher score") {
  std::vector<RaterProfile> profiles(3);
  const char* ids[] = {"A", "B", "C"};
  for (int i = 0; i < 3; ++i) {
    profiles[i].rater_id = ids[i];
    profiles[i].label_marginals = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  }
  CHECK(inverse_bias_correct({{"A", 0}, {"B", 1}, {"C", 2}}, profiles) == 2);
}

TEST_CASE("inverse bias correction: uniform marginals reduce to majority vote") {
  std::vector<RaterProfile> profiles(5);
  for (int i = 0; i < 5; ++i) {
    profiles[i].rater_id = std::string(1, static_cast<char>('A' + i));
    profiles[i].label_marginals = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  }
  CHECK(inverse_bias_correct({{"A", 0}, {"B", 0}, {"C", 0}, {"D", 2}, {"E", 2}},
                             profiles) == 0);
}

TEST_CASE("inverse bias correction: empty vote set is an error") {
  CHECK_THROWS_AS(inverse_bias_correct({}, {}), DataError);
}

TEST_CASE("krippendorff: perfect agreement with two labels is 1") {
  const auto m = make_matrix({"a", "b", "c"}, {{0, 0, 0}, {2, 2, 2}, {0, 0, 0}});
  CHECK(krippendorff_alpha(m, AlphaLevel::Nominal) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(krippendorff_alpha(m, AlphaLevel::Ordinal) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("krippendorff: chance-level binary agreement is near 0") {
  Rng rng(3);
  std::vector<std::vector<std::optional<int>>> cells;
  for (int i = 0; i < 20000; ++i)
    cells.push_back({rng.bernoulli(0.5) ? 1 : 0, rng.bernoulli(0.5) ? 1 : 0});
  const auto m = make_matrix({"a", "b"}, std::move(cells));
  CHECK(std::abs(krippendorff_alpha(m, AlphaLevel::Nominal)) < 0.02);
}

TEST_CASE("krippendorff: matches the pair-enumeration oracle, with missing cells") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<std::optional<int>>> cells;
    for (int i = 0; i < 12; ++i) {
      std::vector<std::optional<int>> row;
      for (int j = 0; j < 4; ++j) {
        if (rng.uniform() < 0.25)
          row.push_back(std::nullopt);
        else
          row.push_back(std::min(static_cast<int>(rng.uniform() * 3.0), 2));
      }
      cells.push_back(std::move(row));
    }
    const auto m = make_matrix({"a", "b", "c", "d"}, cells);
    for (bool ordinal : {false, true}) {
      double expected;
      try {
        expected = oracles::krippendorff_alpha_pairs(cells, ordinal);
      } catch (...) {
        continue;
      }
      const double got = krippendorff_alpha(
          m, ordinal ? AlphaLevel::Ordinal : AlphaLevel::Nominal);
      CHECK(got == doctest::Approx(expected).epsilon(1e-10));
    }
  }
}

TEST_CASE("krippendorff: single label or too few pairable values are signaled") {
  const auto constant = make_matrix({"a", "b"}, {{1, 1}, {1, 1}});
  CHECK_THROWS_AS(krippendorff_alpha(constant, AlphaLevel::Nominal),
                  DegenerateInputError);
  const auto sparse = make_matrix({"a", "b"}, {{1, std::nullopt}, {std::nullopt, 0}});
  CHECK_THROWS_AS(krippendorff_alpha(sparse, AlphaLevel::Nominal), DataError);
}

TEST_CASE("derive_curiosity: picks the reliable pair and fills units") {
  std::vector<RaterScore> ratings;
  Rng rng(5);
  // Raters a and b agree; rater c is noise; rater d rushes (low duration).
  for (int slice = 0; slice < 12; ++slice) {
    const int truth = slice % 3;
    ratings.push_back({slice, "kid", "a", truth, 9.0});
    ratings.push_back({slice, "kid", "b", truth, 11.0});
    ratings.push_back({slice, "kid", "c", std::min(static_cast<int>(rng.uniform() * 3), 2), 10.0});
    ratings.push_back({slice, "kid", "d", 2, 0.05});
  }
  RatingConfig config;
  const auto derived = derive_curiosity(ratings, 12, config);
  CHECK(derived.retained_raters == std::vector<std::string>({"a", "b", "c"}));
  const auto& subset = derived.subsets.at("kid");
  CHECK(subset.raters == std::vector<std::string>({"a", "b"}));
  CHECK(subset.icc == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(derived.scores.size() == 12);
  for (const auto& s : derived.scores)
    CHECK(s.score == doctest::Approx(static_cast<double>(s.slice_index % 3)));
}
