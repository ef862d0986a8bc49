#include "dlid/theorem_engine.hpp"
#include "test_util.hpp"

using namespace dlid;

namespace {

const Condition& find(const TheoremReport& R, const std::string& name) {
  for (auto& c : R.conditions)
    if (c.name == name) return c;
  throw std::runtime_error("missing condition " + name);
}

}  // namespace

TEST(Report, OrthonormalConstants) {
  auto D0 = orthonormal_dictionary(32);
  auto model = CoefficientModel::signed_uniform(32, 2, 1, 1);
  auto R = asymptotic_report(D0, model, 0.05);
  EXPECT_EQ(R.mu_k, 0.0);
  EXPECT_EQ(R.C_min, 0.0);
  EXPECT_NEAR(R.C_max, 2.0 / 7.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(R.lambda_bar, 0.05, 1e-15);
  EXPECT_EQ(R.conditions.size(), 5u);
  EXPECT_TRUE(find(R, "coherence").satisfied);
  EXPECT_FALSE(find(R, "sparsity").satisfied);  // needs p >= 128
  EXPECT_TRUE(find(R, "penalty").satisfied);
  EXPECT_FALSE(R.interval_nonempty);
  EXPECT_NEAR(R.noise_threshold(0.01), 3.5 * (R.C_max * 0.05 - 0.01), 1e-15);
}

TEST(Report, LargeOrthonormalInstanceIsAdmissible) {
  auto D0 = orthonormal_dictionary(128);
  auto model = CoefficientModel::signed_uniform(128, 2, 1, 1);
  auto R = asymptotic_report(D0, model, 0.05);
  EXPECT_TRUE(R.all_satisfied());
  EXPECT_TRUE(R.interval_nonempty);
  EXPECT_EQ(R.r_lo, 0.0);
  EXPECT_GT(R.r_hi, 0.0);
}

TEST(Report, PenaltyConditionTracksAlphaMin) {
  auto D0 = orthonormal_dictionary(16);
  auto model = CoefficientModel::signed_uniform(16, 1, 1, 1);
  EXPECT_FALSE(find(asymptotic_report(D0, model, 0.3), "penalty").satisfied);
}

TEST(SampleSize, FormulaStructure) {
  // doubling p scales sqrt(pi m p) by sqrt 2 and p / k by 2
  const double pi = std::acos(-1.0);
  double n1 = sample_size_formula(8, 16, 2, 1.0, 1.0, 0.1, 0.0, 0.0);
  double n2 = sample_size_formula(8, 32, 2, 1.0, 1.0, 0.1, 0.0, 0.0);
  double a1 = 144 * pi * 8 * 16 * std::pow(16.0 * 8 / 0.1, 2);
  EXPECT_NEAR(n1, std::ceil(a1), 1e-6 * n1);
  EXPECT_NEAR(n2 / n1, 8.0, 1e-9);
}

TEST(SampleSize, RequiresRadiusInsideInterval) {
  auto D0 = orthonormal_dictionary(128);
  auto model = CoefficientModel::signed_uniform(128, 2, 1, 1);
  auto R = asymptotic_report(D0, model, 0.05);
  EXPECT_THROW(finite_sample_n(R, R.r_hi * 1.01, 5), InvalidParameter);
  auto s = finite_sample_n(R, 0.5 * R.r_hi, 5);
  EXPECT_GT(s.n_in, 0);
  double beta = std::sqrt(20.0) * R.M_alpha * R.M_alpha *
                (0.5 * R.r_hi + 0.05 + 0.05 * 0.05);
  EXPECT_NEAR(s.L_plus_bound, beta, 1e-14);
  EXPECT_LE(s.L_explicit + R.M_alpha * R.M_alpha * 0.5 * R.r_hi, s.L_plus_bound);
}

TEST(Outliers, ZeroBudgetAtDeskScale) {
  auto D0 = orthonormal_dictionary(32);
  auto model = CoefficientModel::signed_uniform(32, 2, 1, 1);
  auto R = asymptotic_report(D0, model, 0.05);
  auto th = outlier_thresholds(R, 0.05, 5, 51200, 1.0);
  EXPECT_TRUE(th.zero_budget);
  EXPECT_EQ(th.naive, 0.0);
  EXPECT_FALSE(th.diagnostic.empty());
}

TEST(Outliers, NaiveAndRefinedFormulas) {
  auto D0 = orthonormal_dictionary(32);
  auto model = CoefficientModel::signed_uniform(32, 2, 1, 1);
  auto R = asymptotic_report(D0, model, 0.05);
  const double n = 1e14, r = 0.05;
  auto th = outlier_thresholds(R, r, 5, n, 1.0);
  ASSERT_FALSE(th.zero_budget);
  double budget = delta_f_lower(R, r) - 2 * th.eta;
  EXPECT_NEAR(th.naive, 2 * n * budget, 1e-9 * th.naive);
  EXPECT_TRUE(th.refined_available);
  double denom = 1.0 * 18 * std::pow(32.0, 1.5) / std::sqrt(2.0) * r * 0.05;
  EXPECT_NEAR(th.refined, n * budget / denom, 1e-9 * th.refined);
  // incomplete reference: no refined bound
  EXPECT_FALSE(outlier_thresholds(R, r, 5, n, 0.0).refined_available);
}

TEST(Report, Json) {
  auto D0 = dirac_dct_dictionary(8);
  auto model = CoefficientModel::signed_uniform(16, 1, 1, 1);
  auto j = to_json(asymptotic_report(D0, model, 0.25));
  EXPECT_EQ(j["conditions"].size(), 5u);
  EXPECT_TRUE(j["constants"].contains("C_min"));
  EXPECT_EQ(j["instance"]["p"], 16);
}
