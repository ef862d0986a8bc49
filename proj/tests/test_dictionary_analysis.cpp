#include "dlid/dictionary_analysis.hpp"
#include "test_util.hpp"

using namespace dlid;

namespace {

// RIP constants from singular values of every D_J
std::pair<double, double> rip_by_svd(const Dictionary& D, int k) {
  double lo = 1e300, hi = -1e300;
  for_each_support(D.p(), k, [&](const Support& J) {
    Mat DJ(D.m(), k);
    for (int t = 0; t < k; ++t) DJ.col(t) = D.col(J[t]);
    Eigen::JacobiSVD<Mat> svd(DJ);
    Vec sv = svd.singularValues();
    double smin = k <= D.m() ? sv[k - 1] : 0.0;
    lo = std::min(lo, smin * smin);
    hi = std::max(hi, sv[0] * sv[0]);
  });
  return {std::max(0.0, 1 - lo), std::max(0.0, hi - 1)};
}

}  // namespace

TEST(Supports, BinomialAndEnumeration) {
  EXPECT_EQ(binomial(10, 3), 120);
  EXPECT_EQ(binomial(32, 2), 496);
  EXPECT_EQ(binomial(4, 5), 0);
  std::vector<Support> seen;
  for_each_support(5, 3, [&](const Support& J) { seen.push_back(J); });
  ASSERT_EQ(seen.size(), 10u);
  EXPECT_EQ(seen.front(), (Support{0, 1, 2}));
  EXPECT_EQ(seen.back(), (Support{2, 3, 4}));
  EXPECT_TRUE(std::is_sorted(seen.begin(), seen.end()));
}

TEST(Coherence, CumulativeMatchesEnumeration) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto D = fixtures::random_dictionary(5, 9, s);
    for (int k = 1; k <= 4; ++k)
      EXPECT_NEAR(cumulative_coherence(D, k), cumulative_coherence_enumerated(D, k), 1e-14);
    EXPECT_NEAR(cumulative_coherence(D, 1), plain_coherence(D), 1e-15);
  }
}

TEST(Coherence, OrthonormalIsZero) {
  auto D = orthonormal_dictionary(6);
  EXPECT_EQ(cumulative_coherence(D, 3), 0.0);
  EXPECT_THROW(cumulative_coherence(D, 6), InvalidParameter);
}

TEST(Rip, ExactMatchesSvdOracleAndCoherenceBound) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const int p = 6 + s % 6, m = 4 + s % 5;
    auto D = fixtures::random_dictionary(m, p, 100 + s);
    for (int k = 1; k <= 4; ++k) {
      auto rc = rip_constants(D, k);
      auto [lo, hi] = rip_by_svd(D, k);
      EXPECT_TRUE(rc.exact);
      EXPECT_NEAR(rc.lower, lo, 1e-12);
      EXPECT_NEAR(rc.upper, hi, 1e-12);
      double mu = k == 1 ? 0.0 : cumulative_coherence(D, k - 1);
      EXPECT_LE(rc.lower, mu + 1e-12);
      EXPECT_LE(rc.upper, mu + 1e-12);
      auto bound = rip_constants(D, k, RipMode::CoherenceBound);
      EXPECT_FALSE(bound.exact);
      EXPECT_DOUBLE_EQ(bound.lower, mu);
    }
  }
}

TEST(Rip, BudgetIsEnforced) {
  auto D = orthonormal_dictionary(40);
  EXPECT_THROW(rip_constants(D, 10, RipMode::Exact, 1e6), BudgetExceeded);
  EXPECT_FALSE(rip_constants_auto(D, 10).exact);
  EXPECT_TRUE(rip_constants_auto(D, 2).exact);
}

TEST(Spectral, DiracDctPair) {
  auto D = dirac_dct_dictionary(8);
  auto sp = spectral_profile(D);
  EXPECT_NEAR(sp.op_norm, std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(sp.frame_lower, 2.0, 1e-12);
  // off-diagonal blocks are the DCT basis: Frobenius norm sqrt(2 m)
  EXPECT_NEAR(sp.gram_residual, 4.0, 1e-12);
}

TEST(Spectral, OvercompleteWithFewColumnsHasNoFrame) {
  auto D = fixtures::random_dictionary(6, 4, 2);
  EXPECT_EQ(spectral_profile(D).frame_lower, 0.0);
}

TEST(Coherence, TransferBoundHoldsUnderPerturbation) {
  auto D0 = dirac_dct_dictionary(8);
  const int k = 3;
  double mu = cumulative_coherence(D0, k), mu1 = cumulative_coherence(D0, k - 1);
  for (double r : {0.01, 0.1, 0.3})
    for (std::uint64_t s = 0; s < 30; ++s) {
      auto D = fixtures::near(D0, r, s);
      EXPECT_LE(cumulative_coherence(D, k), coherence_transfer_bound(mu, mu1, k, r));
    }
}

TEST(Profile, JsonCarriesAllFields) {
  auto pr = dictionary_profile(dirac_dct_dictionary(4), 2);
  auto j = to_json(pr);
  for (auto key : {"mu_1", "mu_k", "delta_lower_k", "op_norm", "gram_residual", "frame_lower"})
    EXPECT_TRUE(j.contains(key)) << key;
}
