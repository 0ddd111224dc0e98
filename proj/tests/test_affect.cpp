#include <set>

#include "ctpanel/affect.hpp"
#include "doctest.h"

using namespace ctpanel;

namespace {

FaceFrame frame_with(std::initializer_list<int> aus, double confidence = 1.0) {
  FaceFrame f;
  f.confidence = confidence;
  for (int code : aus) f.set_au(code, true);
  return f;
}

std::set<std::string> fired_names(const FaceFrame& f) {
  std::set<std::string> names;
  const auto& rules = default_rule_set();
  for (std::size_t i : evaluate_rules(f, rules)) names.insert(rules.rules[i].name);
  return names;
}

// Independent truth-table evaluation of the five stock rules, written as
// plain boolean logic.
std::set<std::string> truth_table_oracle(bool au1, bool au2, bool au4, bool au5,
                                         bool au6, bool au7, bool au12, bool au15,
                                         bool au23, bool au25, bool au26, bool au45) {
  std::set<std::string> out;
  if (au6 && au12) out.insert("joy");
  if (au7 && au12 && au25 && au26 && !au45) out.insert("delight");
  if (au1 && au2 && au5 && au26) out.insert("surprise");
  if (au4 && au7 && !au12) out.insert("confusion");
  if (au23 && au5 && au7 && !au15 && !au45 && !au2) out.insert("flow");
  return out;
}

}  // namespace

TEST_CASE("rules: worked examples") {
  CHECK(fired_names(frame_with({6, 12})) == std::set<std::string>{"joy"});
  CHECK(fired_names(frame_with({})).empty());
  CHECK(fired_names(frame_with({6, 7, 12, 25, 26})) ==
        std::set<std::string>({"joy", "delight"}));
}

TEST_CASE("rules: exhaustive truth table over all 2^12 AU combinations") {
  const int codes[12] = {1, 2, 4, 5, 6, 7, 12, 15, 23, 25, 26, 45};
  for (int bits = 0; bits < (1 << 12); ++bits) {
    FaceFrame f;
    f.confidence = 1.0;
    bool active[12];
    for (int k = 0; k < 12; ++k) {
      active[k] = (bits >> k) & 1;
      if (active[k]) f.set_au(codes[k], true);
    }
    const auto expected =
        truth_table_oracle(active[0], active[1], active[2], active[3], active[4],
                           active[5], active[6], active[7], active[8], active[9],
                           active[10], active[11]);
    REQUIRE(fired_names(f) == expected);
  }
}

TEST_CASE("rule set validation rejects overlapping or duplicate rules") {
  RuleSet bad;
  bad.rules = {{"joy", {6, 12}, {12}}};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  RuleSet dup;
  dup.rules = {{"joy", {6}, {}}, {"joy", {12}, {}}};
  CHECK_THROWS_AS(dup.validate(), ConfigError);
}

TEST_CASE("dominant affect: counting, gating and ties") {
  const auto& rules = default_rule_set();

  std::vector<FaceFrame> joy10(10, frame_with({6, 12}));
  auto d = dominant_affect(joy10, rules, 0.8);
  CHECK(d.dominant.has_value());
  CHECK(rules.rules[*d.dominant].name == "joy");
  CHECK(d.frame_counts[0] == 10);

  std::vector<FaceFrame> mixed;
  for (int i = 0; i < 6; ++i) mixed.push_back(frame_with({4, 7}));  // confusion
  for (int i = 0; i < 4; ++i) mixed.push_back(frame_with({6, 12}));  // joy
  d = dominant_affect(mixed, rules, 0.8);
  CHECK(rules.rules[*d.dominant].name == "confusion");

  std::vector<FaceFrame> low(5, frame_with({6, 12}, 0.5));
  d = dominant_affect(low, rules, 0.8);
  CHECK_FALSE(d.dominant.has_value());
  CHECK(d.n_qualifying_frames == 0);

  // Tie: joy and confusion fire in equal counts -> priority order wins.
  std::vector<FaceFrame> tie = {frame_with({6, 12}), frame_with({4, 7})};
  d = dominant_affect(tie, rules, 0.8);
  CHECK(rules.rules[*d.dominant].name == "joy");
}

TEST_CASE("dominant affect: invariant under frame reordering") {
  const auto& rules = default_rule_set();
  std::vector<FaceFrame> frames;
  Rng rng(11);
  const int codes[12] = {1, 2, 4, 5, 6, 7, 12, 15, 23, 25, 26, 45};
  for (int i = 0; i < 40; ++i) {
    FaceFrame f;
    f.confidence = rng.uniform();
    for (int code : codes)
      if (rng.bernoulli(0.3)) f.set_au(code, true);
    frames.push_back(f);
  }
  const auto base = dominant_affect(frames, rules, 0.5);
  std::reverse(frames.begin(), frames.end());
  const auto reversed = dominant_affect(frames, rules, 0.5);
  CHECK(base.dominant == reversed.dominant);
  CHECK(base.frame_counts == reversed.frame_counts);
}

TEST_CASE("head motion variance: constant, hand value, degenerate gate") {
  auto with_pitch = [](std::initializer_list<double> values) {
    std::vector<FaceFrame> frames;
    for (double p : values) {
      FaceFrame f;
      f.confidence = 1.0;
      f.pitch = p;
      frames.push_back(f);
    }
    return frames;
  };
  CHECK(*head_motion_variance(with_pitch({0.1, 0.1, 0.1}), 0.8).nod_var ==
        doctest::Approx(0.0));
  CHECK(*head_motion_variance(with_pitch({1, 2, 3}), 0.8).nod_var ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  const auto single = head_motion_variance(with_pitch({1.0}), 0.8);
  CHECK_FALSE(single.nod_var.has_value());
  CHECK_FALSE(single.turn_var.has_value());
}

TEST_CASE("head motion variance: translation invariant, quadratic under scaling") {
  Rng rng(19);
  std::vector<FaceFrame> frames, shifted, scaled;
  for (int i = 0; i < 25; ++i) {
    FaceFrame f;
    f.confidence = 1.0;
    f.pitch = rng.normal();
    f.yaw = rng.normal();
    f.roll = rng.normal();
    frames.push_back(f);
    FaceFrame g = f;
    g.pitch += 0.7;
    g.yaw += 0.7;
    g.roll += 0.7;
    shifted.push_back(g);
    FaceFrame h = f;
    h.pitch *= 3.0;
    h.yaw *= 3.0;
    h.roll *= 3.0;
    scaled.push_back(h);
  }
  const auto base = head_motion_variance(frames, 0.8);
  const auto moved = head_motion_variance(shifted, 0.8);
  const auto grown = head_motion_variance(scaled, 0.8);
  CHECK(*moved.nod_var == doctest::Approx(*base.nod_var).epsilon(1e-10));
  CHECK(*moved.incline_var == doctest::Approx(*base.incline_var).epsilon(1e-10));
  CHECK(*grown.nod_var == doctest::Approx(9.0 * *base.nod_var).epsilon(1e-10));
  CHECK(*grown.turn_var == doctest::Approx(9.0 * *base.turn_var).epsilon(1e-10));
}
