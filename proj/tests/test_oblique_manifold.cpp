#include "dlid/oblique_manifold.hpp"
#include "test_util.hpp"

using namespace dlid;

TEST(Decompose, ReconstructsExactly) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    auto D1 = fixtures::random_dictionary(7, 11, s);
    auto D2 = fixtures::random_dictionary(7, 11, 1000 + s);
    auto dec = decompose(D1, D2);
    EXPECT_LT((reconstruct(D1, dec).atoms() - D2.atoms()).cwiseAbs().maxCoeff(), 1e-12);
    for (int j = 0; j < 11; ++j) {
      EXPECT_GE(dec.theta[j], 0.0);
      EXPECT_LE(dec.theta[j], std::acos(-1.0));
      EXPECT_NEAR(dec.W.col(j).norm(), 1.0, 1e-12);
      EXPECT_NEAR(dec.W.col(j).dot(D1.col(j)), 0.0, 1e-12);
    }
    double fro = (D2.atoms() - D1.atoms()).norm();
    EXPECT_LE(2.0 / std::acos(-1.0) * dec.theta.norm(), fro + 1e-12);
    EXPECT_LE(fro, dec.theta.norm() + 1e-12);
  }
}

TEST(Decompose, DegenerateAnglesUseCanonicalDirection) {
  Mat a = Mat::Identity(3, 2);
  Mat b = a;
  b.col(1) = -b.col(1);
  auto dec = decompose(Dictionary(a), Dictionary(b));
  EXPECT_EQ(dec.theta[0], 0.0);
  EXPECT_NEAR(dec.theta[1], std::acos(-1.0), 1e-15);
  // first canonical vector not parallel to e1 is e2, and to e2 it is e1
  EXPECT_NEAR(dec.W(1, 0), 1.0, 1e-15);
  EXPECT_NEAR(dec.W(0, 1), 1.0, 1e-15);
  EXPECT_LT((reconstruct(Dictionary(a), dec).atoms() - b).norm(), 1e-15);
}

TEST(SphereSampler, HitsTheRadius) {
  auto D0 = dirac_dct_dictionary(8);
  for (double r : {1e-4, 0.02, 0.1, 1.0, 3.0, 2.0 * std::sqrt(16.0)})
    for (std::uint64_t s = 0; s < 50; ++s) {
      Rng rng = substream(s, 1);
      auto D = sample_sphere(D0, r, rng);
      EXPECT_NEAR((D.atoms() - D0.atoms()).norm(), r, 1e-10) << r;
      for (int j = 0; j < D.p(); ++j) EXPECT_NEAR(D.col(j).norm(), 1.0, 1e-12);
    }
}

TEST(SphereSampler, RejectsInfeasibleRadius) {
  auto D0 = orthonormal_dictionary(4);
  Rng rng(1);
  EXPECT_THROW(sample_sphere(D0, 0.0, rng), InfeasibleRadius);
  EXPECT_THROW(sample_sphere(D0, 4.0 + 1e-9, rng), InfeasibleRadius);
  EXPECT_THROW(single_atom_sphere_point(D0, 0, 2.5, rng), InfeasibleRadius);
}

TEST(SphereSampler, SingleAtomPointMovesOneColumn) {
  auto D0 = orthonormal_dictionary(6);
  Rng rng(5);
  auto D = single_atom_sphere_point(D0, 2, 0.1, rng);
  EXPECT_NEAR((D.atoms() - D0.atoms()).norm(), 0.1, 1e-14);
  auto dec = decompose(D0, D);
  for (int j = 0; j < 6; ++j)
    if (j != 2) {
      EXPECT_EQ(dec.theta[j], 0.0);
    }
}

TEST(SphereSampler, Deterministic) {
  auto D0 = orthonormal_dictionary(5);
  Rng a = substream(3, 4), b = substream(3, 4);
  EXPECT_EQ(sample_sphere(D0, 0.3, a).atoms(), sample_sphere(D0, 0.3, b).atoms());
}
