#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "error_matchers.hpp"
#include "ragrade/stats.hpp"

using namespace ragrade;
using namespace ragrade::stats;
using ragrade::testing::code_of;

namespace {

std::vector<std::string> labels(std::initializer_list<const char*> l) { return {l.begin(), l.end()}; }

void expect_rel(double got, double want, double rel = 1e-9) {
  EXPECT_LE(std::abs(got - want), rel * std::max(1.0, std::abs(want))) << got << " vs " << want;
}

nlohmann::json oracle() {
  std::ifstream in(RAGRADE_TEST_DATA_DIR "/stats_oracle.json");
  return nlohmann::json::parse(in);
}

}  // namespace

TEST(OracleDatasets, EveryMetricMatches) {
  const auto bands = default_total_bands();
  const auto o = oracle();
  ASSERT_EQ(o.at("datasets").size(), 20u);
  for (const auto& set : o.at("datasets")) {
    PairedScores p;
    p.rater_a = set.at("human").get<std::vector<double>>();
    p.rater_b = set.at("machine").get<std::vector<double>>();
    const auto& e = set.at("expected");
    const auto r = reliability_report(p, bands);
    SCOPED_TRACE("n=" + std::to_string(r.n));
    EXPECT_EQ(r.n, set.at("n").get<std::size_t>());
    ASSERT_TRUE(r.kappa && r.icc_2_1 && r.pearson_r);
    expect_rel(*r.kappa, e.at("kappa"));
    expect_rel(*r.icc_2_1, e.at("icc_2_1"));
    expect_rel(*r.pearson_r, e.at("pearson_r"));
    expect_rel(r.mae, e.at("mae"));
    expect_rel(r.rmse, e.at("rmse"));
    expect_rel(r.bland_altman.mean_diff, e.at("mean_diff"));
    expect_rel(r.bland_altman.sd_diff, e.at("sd_diff"));
    expect_rel(r.bland_altman.loa_lower, e.at("loa_lower"));
    expect_rel(r.bland_altman.loa_upper, e.at("loa_upper"));
    expect_rel(r.descriptive_a.mean, e.at("mean_a"));
    expect_rel(r.descriptive_a.sd, e.at("sd_a"));
    expect_rel(r.descriptive_b.mean, e.at("mean_b"));
    expect_rel(r.descriptive_b.sd, e.at("sd_b"));
  }
}

TEST(Kappa, HandWorked) {
  EXPECT_DOUBLE_EQ(cohens_kappa(labels({"A", "A", "B", "B"}), labels({"A", "B", "B", "B"})), 0.5);
  EXPECT_EQ(cohens_kappa(labels({"A", "B", "C"}), labels({"A", "B", "C"})), 1.0);
}

TEST(Kappa, Errors) {
  EXPECT_EQ(code_of([] { cohens_kappa(labels({"A", "A", "A"}), labels({"A", "A", "A"})); }),
            ErrorCode::DegenerateMarginals);
  EXPECT_EQ(code_of([] { cohens_kappa(labels({"A", "B"}), labels({"A"})); }), ErrorCode::LengthMismatch);
  EXPECT_EQ(code_of([] { cohens_kappa(labels({}), labels({})); }), ErrorCode::InsufficientData);
}

TEST(Icc, WorkedExample) { EXPECT_NEAR(icc_2_1({{1, 2}, {3, 4}, {5, 6}}), 8.0 / 9.0, 1e-12); }

TEST(Icc, IdenticalColumnsGiveExactlyOne) {
  EXPECT_EQ(icc_2_1({{60, 60}, {70, 70}, {85, 85}}), 1.0);
  EXPECT_EQ(icc_2_1({{60, 60, 60}, {70, 70, 70}}), 1.0);
}

TEST(Icc, Errors) {
  EXPECT_EQ(code_of([] { icc_2_1({{70, 70}, {70, 70}}); }), ErrorCode::ZeroVariance);
  EXPECT_EQ(code_of([] { icc_2_1({{70, 71}}); }), ErrorCode::InsufficientData);
}

TEST(Pearson, KnownValues) {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  std::vector<double> y;
  for (double v : x) y.push_back(-2 * v + 7);
  EXPECT_NEAR(pearson_r(x, x), 1.0, 1e-12);
  EXPECT_NEAR(pearson_r(x, y), -1.0, 1e-12);
  const std::vector<double> a = {1, 2, 3, 4}, b = {2, 1, 4, 3};
  EXPECT_NEAR(pearson_r(a, b), 0.6, 1e-12);
}

TEST(Pearson, Errors) {
  const std::vector<double> c = {5, 5, 5}, x = {1, 2, 3}, two = {1, 2};
  EXPECT_EQ(code_of([&] { pearson_r(c, x); }), ErrorCode::ZeroVariance);
  EXPECT_EQ(code_of([&] { pearson_r(two, x); }), ErrorCode::LengthMismatch);
}

TEST(MaeRmse, HandWorked) {
  const std::vector<double> h = {70, 80, 90}, m = {72, 78, 90};
  const auto e = mae_rmse(h, m);
  EXPECT_NEAR(e.mae, 4.0 / 3.0, 1e-12);
  EXPECT_NEAR(e.rmse, std::sqrt(8.0 / 3.0), 1e-12);
  const std::vector<double> h1 = {50}, m1 = {53};
  EXPECT_EQ(mae_rmse(h1, m1).mae, 3.0);
  EXPECT_EQ(mae_rmse(h1, m1).rmse, 3.0);
  const std::vector<double> none;
  EXPECT_EQ(code_of([&] { mae_rmse(none, none); }), ErrorCode::EmptyInput);
}

TEST(BlandAltman, ConstantOffset) {
  const std::vector<double> h = {60, 70, 80, 90}, m = {58, 68, 78, 88};
  const auto ba = bland_altman(h, m);
  EXPECT_EQ(ba.mean_diff, -2.0);
  EXPECT_EQ(ba.sd_diff, 0.0);
  EXPECT_EQ(ba.loa_lower, -2.0);
  EXPECT_EQ(ba.loa_upper, -2.0);
}

TEST(BlandAltman, WidthIsTwiceMultiplierTimesSd) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0, 4);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> h(30), m(30);
    for (std::size_t i = 0; i < h.size(); ++i) {
      h[i] = 50 + i;
      m[i] = h[i] + nd(rng);
    }
    const auto ba = bland_altman(h, m);
    EXPECT_NEAR(ba.loa_upper - ba.loa_lower, 2 * kLoaMultiplier * ba.sd_diff, 1e-9);
    EXPECT_NEAR((ba.loa_upper + ba.loa_lower) / 2, ba.mean_diff, 1e-9);
  }
}

TEST(BinToBands, UsesHalfOpenBoundaries) {
  const auto bands = default_total_bands();
  const std::vector<double> s = {100, 80, 79.99, 65, 64.99, 50, 49.99, 0};
  const std::vector<BandLabel> want = {BandLabel::Excellent,    BandLabel::Excellent, BandLabel::Good,
                                       BandLabel::Good,         BandLabel::Satisfactory, BandLabel::Satisfactory,
                                       BandLabel::NeedsImprovement, BandLabel::NeedsImprovement};
  EXPECT_EQ(bin_to_bands(s, bands), want);
  const std::vector<double> bad = {101};
  EXPECT_EQ(code_of([&] { bin_to_bands(bad, bands); }), ErrorCode::PercentOutOfRange);
}

TEST(ReliabilityReport, SimulatedCohortInvariants) {
  std::mt19937_64 rng(20240611);
  std::normal_distribution<double> human(71.4, 9.62), noise(-1.8, 3.27);
  PairedScores p;
  for (int i = 0; i < 150; ++i) {
    const double h = std::clamp(human(rng), 0.0, 100.0);
    p.rater_a.push_back(h);
    p.rater_b.push_back(std::clamp(h + noise(rng), 0.0, 100.0));
  }
  const auto r = reliability_report(p, default_total_bands());
  EXPECT_NEAR(r.descriptive_a.mean, 71.4, 2.5);
  EXPECT_NEAR(r.bland_altman.mean_diff, -1.8, 1.0);
  EXPECT_GE(r.rmse, r.mae);
  EXPECT_LE(*r.pearson_r, 1.0);
  EXPECT_GT(*r.pearson_r, 0.8);
  EXPECT_LE(*r.icc_2_1, *r.pearson_r + 1e-9);
  EXPECT_LE(*r.kappa, 1.0);
  EXPECT_LE(r.descriptive_a.min, r.descriptive_a.mean);
  EXPECT_GE(r.descriptive_a.max, r.descriptive_a.mean);
}

TEST(ReliabilityReport, IdenticalRaters) {
  PairedScores p;
  p.rater_a = {55, 62, 71, 78, 84, 90};
  p.rater_b = p.rater_a;
  const auto r = reliability_report(p, default_total_bands(), ApprovalTally{47, 50});
  EXPECT_NEAR(*r.pearson_r, 1.0, 1e-12);
  EXPECT_EQ(*r.icc_2_1, 1.0);
  EXPECT_EQ(*r.kappa, 1.0);
  EXPECT_EQ(r.mae, 0.0);
  EXPECT_EQ(r.bland_altman.mean_diff, 0.0);
  EXPECT_EQ(*r.approval_rate, 0.94);
}

TEST(ReliabilityReport, DegenerateMetricsAreAbsent) {
  PairedScores p;
  p.rater_a = {85, 90, 95};
  p.rater_b = {85, 90, 95};
  const auto r = reliability_report(p, default_total_bands());
  EXPECT_FALSE(r.kappa.has_value());
  EXPECT_FALSE(r.approval_rate.has_value());
  const auto j = report_to_json(r);
  EXPECT_TRUE(j.at("kappa").is_null());
  EXPECT_TRUE(j.at("display").at("kappa").is_null());
  EXPECT_TRUE(j.at("approval_rate").is_null());
}

TEST(ReliabilityReport, ValidatesPairs) {
  PairedScores p;
  p.rater_a = {70};
  p.rater_b = {71};
  EXPECT_EQ(code_of([&] { reliability_report(p, default_total_bands()); }), ErrorCode::InsufficientData);
  p.rater_a = {70, 80};
  EXPECT_EQ(code_of([&] { reliability_report(p, default_total_bands()); }), ErrorCode::LengthMismatch);
  p.rater_b = {70, 180};
  EXPECT_EQ(code_of([&] { reliability_report(p, default_total_bands()); }), ErrorCode::PercentOutOfRange);
}

TEST(ReportJson, DisplayRoundsToTwoDecimals) {
  PairedScores p;
  p.rater_a = {70, 80, 90};
  p.rater_b = {72, 78, 90};
  const auto j = report_to_json(reliability_report(p, default_total_bands()));
  EXPECT_DOUBLE_EQ(j.at("mae").get<double>(), 4.0 / 3.0);
  EXPECT_EQ(j.at("display").at("mae").get<double>(), 1.33);
  EXPECT_EQ(j.at("n"), 3);
  EXPECT_FALSE(j.at("display").contains("n"));
  EXPECT_TRUE(j.at("bland_altman").contains("loa_upper"));
}

TEST(PairsCsv, Parses) {
  const auto p = parse_pairs_csv("id,rater_a,rater_b\ns1,70,72.5\n\ns2, 80 ,78\n");
  EXPECT_EQ(p.labels, labels({"s1", "s2"}));
  EXPECT_EQ(p.rater_a, (std::vector<double>{70, 80}));
  EXPECT_EQ(p.rater_b, (std::vector<double>{72.5, 78}));
}

TEST(PairsCsv, BlankMachineColumnOnlyWhenAllowed) {
  const std::string csv = "id,rater_a,rater_b\ns1,70,\n";
  EXPECT_EQ(code_of([&] { parse_pairs_csv(csv); }), ErrorCode::InvalidInput);
  const auto p = parse_pairs_csv(csv, false);
  EXPECT_TRUE(std::isnan(p.rater_b[0]));
}

TEST(PairsCsv, Errors) {
  EXPECT_EQ(code_of([] { parse_pairs_csv(""); }), ErrorCode::InvalidInput);
  EXPECT_EQ(code_of([] { parse_pairs_csv("a,b,c\n1,2,3\n"); }), ErrorCode::InvalidInput);
  EXPECT_EQ(code_of([] { parse_pairs_csv("id,rater_a,rater_b\ns1,70\n"); }), ErrorCode::InvalidInput);
  EXPECT_EQ(code_of([] { parse_pairs_csv("id,rater_a,rater_b\ns1,7o,70\n"); }), ErrorCode::InvalidInput);
}
