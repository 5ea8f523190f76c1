#include <gtest/gtest.h>

#include "support.hpp"

using namespace spoofguard;

namespace {

ClassScores cs(std::vector<double> b, std::vector<double> s) { return ClassScores{std::move(b), std::move(s)}; }

struct Keyed {
  ScoreSet scores;
  std::vector<TrialRecord> keys;
  void add(const std::string& id, double score, const std::string& attack) {
    scores.add(id, score);
    TrialRecord r;
    r.speaker_id = "SPK";
    r.utterance_id = id;
    r.attack_id = attack;
    r.key = attack == "-" ? Key::bonafide : Key::spoof;
    keys.push_back(r);
  }
};

TEST(Det, SeparableScoresReachZeroZero) {
  const DetCurve d = det_curve(cs({2, 3}, {0, 1}));
  bool found = false;
  for (const auto& p : d)
    if (p.threshold == 2.0) {
      found = true;
      EXPECT_EQ(p.p_miss, 0.0);
      EXPECT_EQ(p.p_fa, 0.0);
    }
  EXPECT_TRUE(found);
  EXPECT_EQ(d.front().p_miss, 0.0);
  EXPECT_EQ(d.front().p_fa, 1.0);
  EXPECT_EQ(d.back().p_miss, 1.0);
  EXPECT_EQ(d.back().p_fa, 0.0);
}

TEST(Det, MonotoneAndMatchesCountingOracle) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const ClassScores c = sgtest::random_class_scores(rng);
    const DetCurve d = det_curve(c);
    const sgtest::OracleDet o = sgtest::oracle_det(c.bonafide, c.spoof);
    ASSERT_EQ(d.size(), o.threshold.size());
    for (std::size_t j = 0; j < d.size(); ++j) {
      EXPECT_EQ(d[j].threshold, o.threshold[j]);
      EXPECT_EQ(d[j].p_miss, o.p_miss[j]);
      EXPECT_EQ(d[j].p_fa, o.p_fa[j]);
      EXPECT_GE(d[j].p_miss, 0.0);
      EXPECT_LE(d[j].p_fa, 1.0);
      if (j) {
        EXPECT_GT(d[j].threshold, d[j - 1].threshold);
        EXPECT_GE(d[j].p_miss, d[j - 1].p_miss);
        EXPECT_LE(d[j].p_fa, d[j - 1].p_fa);
      }
    }
  }
}

TEST(Det, MissingKeyAndSingleClassAreErrors) {
  Keyed k;
  k.add("a", 1.0, "-");
  k.add("b", 0.0, "A01");
  ScoreSet extra = k.scores;
  extra.add("zzz", 0.5);
  EXPECT_THROW(det_curve(extra, k.keys), InvalidInput);
  EXPECT_THROW(det_curve(cs({1, 2}, {})), InvalidInput);
  EXPECT_THROW(det_curve(cs({}, {1})), InvalidInput);
}

TEST(Eer, SeparatedIsZeroAndIdenticalIsHalf) {
  EXPECT_EQ(eer(cs({2, 3}, {0, 1})).eer, 0.0);
  EXPECT_EQ(eer(cs({1, 1, 1}, {1, 1})).eer, 0.5);
  EXPECT_EQ(eer(cs({0, 1}, {2, 3})).eer, 1.0);
}

// Brute-force value from the counting oracle for this set, frozen.
TEST(Eer, SevenTrialHandCase) {
  const ClassScores c = cs({0.9, 0.8, 0.3}, {0.7, 0.2, 0.1, 0.05});
  EXPECT_EQ(sgtest::oracle_eer(c.bonafide, c.spoof), 0.25);
  const EerResult r = eer(c);
  EXPECT_EQ(r.eer, 0.25);
  EXPECT_DOUBLE_EQ(r.threshold, 0.6);
}

TEST(Eer, MatchesOracleOnRandomSets) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 500; ++trial) {
    const ClassScores c = sgtest::random_class_scores(rng);
    EXPECT_NEAR(eer(c).eer, sgtest::oracle_eer(c.bonafide, c.spoof), 1e-12);
  }
}

TEST(Eer, InvariantUnderIncreasingTransforms) {
  std::mt19937_64 rng(33);
  const std::vector<std::function<double(double)>> maps{
      [](double x) { return 3.0 * x + 7.0; }, [](double x) { return std::exp(x); },
      [](double x) { return std::atan(x); }, [](double x) { return x * x * x; }};
  for (int trial = 0; trial < 300; ++trial) {
    const ClassScores c = sgtest::random_class_scores(rng);
    const double base = eer(c).eer;
    const double base_dcf = min_tdcf(c, TdcfParams{});
    for (const auto& f : maps) {
      ClassScores t = c;
      for (double& v : t.bonafide) v = f(v);
      for (double& v : t.spoof) v = f(v);
      EXPECT_EQ(eer(t).eer, base);
      EXPECT_EQ(min_tdcf(t, TdcfParams{}), base_dcf);
    }
  }
}

TEST(Eer, SwappingClassesAndNegatingScoresIsSymmetric) {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 300; ++trial) {
    const ClassScores c = sgtest::random_class_scores(rng);
    ClassScores s;
    for (double v : c.spoof) s.bonafide.push_back(-v);
    for (double v : c.bonafide) s.spoof.push_back(-v);
    EXPECT_NEAR(eer(s).eer, eer(c).eer, 1e-12);
  }
}

TEST(Tdcf, MatchesOracleOnRandomSets) {
  std::mt19937_64 rng(35);
  TdcfParams alt;
  alt.asv_p_miss = 0.1;
  alt.asv_p_fa = 0.05;
  alt.asv_p_miss_spoof = 0.6;
  for (int trial = 0; trial < 500; ++trial) {
    const ClassScores c = sgtest::random_class_scores(rng);
    for (const TdcfParams& p : {TdcfParams{}, alt}) {
      const double v = min_tdcf(c, p);
      EXPECT_NEAR(v, sgtest::oracle_min_tdcf(c.bonafide, c.spoof, p), 1e-12);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0 + 1e-12);
    }
  }
}

TEST(Tdcf, SixTrialHandCase) {
  const ClassScores c = cs({0.9, 0.4, 0.8}, {0.5, 0.1, 0.2});
  EXPECT_NEAR(min_tdcf(c, TdcfParams{}), sgtest::oracle_min_tdcf(c.bonafide, c.spoof, TdcfParams{}), 1e-12);
  EXPECT_EQ(min_tdcf(cs({2, 3}, {0, 1}), TdcfParams{}), 0.0);
}

TEST(Tdcf, DegenerateCostModelsAreRejected) {
  TdcfParams p;
  p.prior_target = 0.5;
  EXPECT_THROW(p.validate(), ConfigError);
  p = TdcfParams{};
  p.asv_p_fa = 1.5;
  EXPECT_THROW(p.validate(), ConfigError);
  p = TdcfParams{};
  p.cost_miss_cm = 0.0;  // C1 turns negative
  EXPECT_THROW(min_tdcf(cs({1}, {0}), p), ConfigError);
  p = TdcfParams{};
  p.asv_p_miss_spoof = 1.0;  // C2 is zero
  EXPECT_THROW(min_tdcf(cs({1}, {0}), p), ConfigError);
}

TEST(PerAttack, SingleAttackEqualsPooled) {
  Keyed k;
  std::mt19937_64 rng(36);
  std::normal_distribution<double> n(0, 1);
  for (int i = 0; i < 20; ++i) k.add("b" + std::to_string(i), 1.0 + n(rng), "-");
  for (int i = 0; i < 30; ++i) k.add("s" + std::to_string(i), n(rng), "A07");
  const PerAttackEer pa = per_attack_eer(k.scores, k.keys);
  ASSERT_EQ(pa.eer.size(), 1u);
  EXPECT_EQ(pa.eer.at("A07").eer, eer(k.scores, k.keys).eer);
}

TEST(PerAttack, OverlappingAttackScoresWorse) {
  Keyed k;
  std::mt19937_64 rng(37);
  std::normal_distribution<double> n(0, 1);
  for (int i = 0; i < 40; ++i) k.add("b" + std::to_string(i), 2.0 + n(rng), "-");
  for (int i = 0; i < 40; ++i) k.add("a" + std::to_string(i), -1.0 + n(rng), "A");
  for (int i = 0; i < 40; ++i) k.add("x" + std::to_string(i), 1.5 + n(rng), "B");
  const PerAttackEer pa = per_attack_eer(k.scores, k.keys, {"A", "B", "C"});
  auto oracle = [&](const std::string& attack) {
    std::vector<double> b, s;
    for (const auto& r : k.keys) {
      if (r.key == Key::bonafide) {
        b.push_back(k.scores.at(r.utterance_id));
      } else if (r.attack_id == attack) {
        s.push_back(k.scores.at(r.utterance_id));
      }
    }
    return sgtest::oracle_eer(b, s);
  };
  EXPECT_NEAR(pa.eer.at("A").eer, oracle("A"), 1e-12);
  EXPECT_NEAR(pa.eer.at("B").eer, oracle("B"), 1e-12);
  EXPECT_GT(pa.eer.at("B").eer, pa.eer.at("A").eer);
  ASSERT_EQ(pa.warnings.size(), 1u);
  EXPECT_NE(pa.warnings[0].find("C"), std::string::npos);
}

TEST(PerAttack, AttackBelowEveryBonafideIsZero) {
  Keyed k;
  k.add("b1", 1.0, "-");
  k.add("b2", 2.0, "-");
  k.add("s1", 0.5, "A01");
  k.add("s2", 1.5, "A02");
  k.add("s3", -3.0, "A01");
  EXPECT_EQ(per_attack_eer(k.scores, k.keys).eer.at("A01").eer, 0.0);
}

TEST(Fusion, SelfFusionKeepsTheRanking) {
  const auto fc = sgtest::fusion_case(5);
  const double base = eer(fc.systems[0], fc.keys).eer;
  EXPECT_NEAR(eer(fuse_scores({fc.systems[0], fc.systems[0]}), fc.keys).eer, base, 1e-12);
  EXPECT_NEAR(eer(fuse_scores({fc.systems[0]}), fc.keys).eer, base, 1e-12);
}

TEST(Fusion, SymmetricUnderSystemOrder) {
  const auto fc = sgtest::fusion_case(6);
  const ScoreSet a = fuse_scores({fc.systems[0], fc.systems[1], fc.systems[2]});
  const ScoreSet b = fuse_scores({fc.systems[2], fc.systems[0], fc.systems[1]});
  for (const auto& e : a.entries()) EXPECT_NEAR(e.score, b.at(e.id), 1e-12);
}

TEST(Fusion, ZNormalizedWeightedAverage) {
  ScoreSet a, b;
  a.add("x", 1.0);
  a.add("y", 3.0);
  b.add("y", 10.0);
  b.add("x", 30.0);
  const std::vector<double> w{3.0, 1.0};
  const ScoreSet f = fuse_scores({a, b}, w);
  ASSERT_EQ(f.entries()[0].id, "x");
  EXPECT_DOUBLE_EQ(f.at("x"), (3.0 * -1.0 + 1.0 * 1.0) / 4.0);
  EXPECT_DOUBLE_EQ(f.at("y"), (3.0 * 1.0 + 1.0 * -1.0) / 4.0);
}

TEST(Fusion, SharedSignalCaseImprovesOnEverySystem) {
  const auto fc = sgtest::fusion_case(0);
  double best = 1.0;
  for (const auto& s : fc.systems) {
    const auto [b, sp] = sgtest::split_for_oracle(s, fc.keys);
    best = std::min(best, sgtest::oracle_eer(b, sp));
  }
  const auto [b, sp] = sgtest::split_for_oracle(fuse_scores(fc.systems), fc.keys);
  EXPECT_LE(sgtest::oracle_eer(b, sp), best);
}

TEST(Fusion, Errors) {
  ScoreSet a, b, flat;
  a.add("x", 1.0);
  a.add("y", 2.0);
  b.add("x", 1.0);
  b.add("z", 2.0);
  flat.add("x", 4.0);
  flat.add("y", 4.0);
  try {
    fuse_scores({a, b});
    FAIL();
  } catch (const InvalidInput& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("-y"), std::string::npos);
    EXPECT_NE(msg.find("+z"), std::string::npos);
  }
  EXPECT_THROW(fuse_scores({a, flat}), InvalidInput);
  EXPECT_THROW(fuse_scores({}), InvalidInput);
  const std::vector<double> zero{0.0, 0.0}, neg{1.0, -1.0}, one{1.0};
  EXPECT_THROW(fuse_scores({a, a}, zero), InvalidInput);
  EXPECT_THROW(fuse_scores({a, a}, neg), InvalidInput);
  EXPECT_THROW(fuse_scores({a, a}, one), InvalidInput);
}

Keyed report_fixture() {
  Keyed k;
  std::mt19937_64 rng(38);
  std::normal_distribution<double> n(0, 1);
  for (int i = 0; i < 25; ++i) k.add("b" + std::to_string(i), 1.5 + n(rng), "-");
  for (int i = 0; i < 60; ++i) k.add("s" + std::to_string(i), n(rng), i % 2 ? "A07" : "A08");
  return k;
}

TEST(Report, FieldsArePresentAndFinite) {
  const Keyed k = report_fixture();
  const EvaluationReport r = evaluate_report(k.scores, k.keys, TdcfParams{}, {"A07", "A08", "A09"});
  EXPECT_EQ(r.n_bonafide, 25u);
  EXPECT_EQ(r.n_spoof, 60u);
  EXPECT_TRUE(std::isfinite(r.eer) && std::isfinite(r.min_tdcf) && std::isfinite(r.threshold));
  EXPECT_EQ(r.per_attack.size(), 2u);
  EXPECT_EQ(r.warnings.size(), 1u);
  const auto j = to_json(r);
  for (const char* key : {"eer_percent", "min_tdcf", "threshold", "per_attack", "det"}) EXPECT_TRUE(j.contains(key));
}

TEST(Report, JsonRoundTrip) {
  const Keyed k = report_fixture();
  const EvaluationReport r = evaluate_report(k.scores, k.keys, TdcfParams{});
  const std::string text = to_json(r).dump();
  const EvaluationReport back = report_from_json(nlohmann::ordered_json::parse(text));
  EXPECT_NEAR(back.eer, r.eer, 1e-15);
  EXPECT_EQ(back.min_tdcf, r.min_tdcf);
  EXPECT_EQ(back.det.size(), r.det.size());
  EXPECT_THROW(report_from_json(nlohmann::ordered_json::parse("{\"eer_percent\": 1}")), ParseError);
}

TEST(Report, TextTableUsesTwoDecimalPercentages) {
  EvaluationReport r;
  r.eer = 0.0232;
  r.min_tdcf = 0.052;
  r.per_attack["A17"] = 0.1;
  const std::string t = to_text(r);
  EXPECT_NE(t.find("2.32"), std::string::npos);
  EXPECT_NE(t.find("0.0520"), std::string::npos);
  EXPECT_NE(t.find("10.00"), std::string::npos);
  EXPECT_EQ(t.find("2.320"), std::string::npos);
}

TEST(Report, PerfectScoresGiveZeroPercent) {
  Keyed k;
  k.add("b", 5.0, "-");
  k.add("s", -5.0, "A01");
  const EvaluationReport r = evaluate_report(k.scores, k.keys, TdcfParams{});
  EXPECT_EQ(r.eer, 0.0);
  EXPECT_EQ(r.min_tdcf, 0.0);
  EXPECT_NE(to_text(r).find("0.00"), std::string::npos);
}

TEST(Report, PlotFilesHaveOneRowPerPoint) {
  const Keyed k = report_fixture();
  const EvaluationReport r = evaluate_report(k.scores, k.keys, TdcfParams{});
  const std::string det = det_tsv(r), pa = per_attack_tsv(r);
  EXPECT_EQ(static_cast<std::size_t>(std::count(det.begin(), det.end(), '\n')), r.det.size() + 1);
  EXPECT_EQ(static_cast<std::size_t>(std::count(pa.begin(), pa.end(), '\n')), 3u);
}

}  // namespace
