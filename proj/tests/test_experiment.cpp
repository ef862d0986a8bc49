#include "dlid/experiment.hpp"
#include "test_util.hpp"

#include <sstream>

using namespace dlid;

namespace {

ExperimentConfig small(const std::string& extra = "") {
  auto kv = KeyValueConfig::from_string(
      "dictionary.kind = orthonormal\n"
      "dictionary.m = 8\n"
      "model.k = 2\n"
      "model.alpha_min = 1\n"
      "model.alpha_max = 1\n"
      "lambda_bar = 0.05\n"
      "radii = 0, 0.05, 0.1\n"
      "n = 400\n"
      "n_dirs = 6\n" + extra);
  return load_experiment(kv);
}

}  // namespace

TEST(Config, ParsesKeysAndComments) {
  auto kv = KeyValueConfig::from_string("a = 1 # one\n\n# note\nb = x, y\nc = 0.5,1.5\n");
  EXPECT_EQ(kv.num("a", 0), 1.0);
  EXPECT_EQ(kv.str("b", ""), "x, y");
  EXPECT_EQ(kv.list("c", {}), (std::vector<double>{0.5, 1.5}));
  EXPECT_THROW(KeyValueConfig::from_string("novalue\n"), ConfigError);
  EXPECT_THROW(kv.num("b", 0), ConfigError);
  EXPECT_THROW(KeyValueConfig::from_string("a = 1.5").integer("a", 0), ConfigError);
}

TEST(Config, HashIsStableAndSensitive) {
  auto a = small(), b = small(), c = small("x = 6\n");
  EXPECT_EQ(a.hash, b.hash);
  EXPECT_NE(a.hash, c.hash);
  EXPECT_EQ(a.hash.size(), 16u);
  EXPECT_NE(load_experiment(a.raw, 99).hash, a.hash);
}

TEST(Config, RejectsInvalidSettings) {
  EXPECT_THROW(small("lambda = 0.1\n"), ConfigError);
  EXPECT_THROW(small("n_dirs = 0\n"), ConfigError);
  EXPECT_THROW(small("radii = \n"), ConfigError);
  EXPECT_THROW(small("dictionary.kind = torus\n"), ConfigError);
  EXPECT_THROW(small("outliers.style = loud\n"), ConfigError);
  EXPECT_THROW(small("radius = 0.1\n"), ConfigError);  // typo of radii
  EXPECT_THROW(small("model.alpha_max = 0.5\n"), ConfigError);
  EXPECT_THROW(small("dictionary.kind = file\ndictionary.path = /nonexistent\n"), ConfigError);
}

TEST(Config, LambdaBarScalesByMeanMagnitude) {
  auto c = small("model.alpha_max = 3\n");
  EXPECT_NEAR(c.lambda, 0.05 * 2.0, 1e-15);
}

TEST(Config, ReadsDictionaryFile) {
  std::string path = ::testing::TempDir() + "/dlid_dict.csv";
  {
    std::ofstream f(path);
    f << "1,0,3\n0,2,4\n";
  }
  auto c = load_experiment(KeyValueConfig::from_string(
      "dictionary.kind = file\ndictionary.path = " + path +
      "\nmodel.k = 1\nlambda = 0.1\n"));
  EXPECT_EQ(c.D0.m(), 2);
  EXPECT_EQ(c.D0.p(), 3);
  EXPECT_NEAR(c.D0.atoms()(0, 2), 0.6, 1e-15);
}

TEST(DeltaF, ZeroRadiusGivesZero) {
  auto rows = run_delta_F(small(), 1);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].min, 0.0);
  EXPECT_EQ(rows[0].mean, 0.0);
}

TEST(DeltaF, ThreadCountDoesNotChangeResults) {
  auto a = small(), b = small("threads = 4\n");
  auto ra = run_delta_F(a, 5), rb = run_delta_F(b, 5);
  for (size_t i = 0; i < ra.size(); ++i) {
    EXPECT_EQ(ra[i].min, rb[i].min);
    EXPECT_EQ(ra[i].mean, rb[i].mean);
  }
}

TEST(DeltaF, MatchesObjectiveDifference) {
  auto cfg = small();
  auto batch = generate_batch(cfg.D0, cfg.model, cfg.n, mix64(3));
  auto rows = run_delta_F(cfg, 3);
  auto dirs = sphere_directions(cfg.D0, 0.1, cfg.n_dirs, 3, 2);
  double mn = 1e300;
  for (auto& D : dirs)
    mn = std::min(mn, objective_F(batch, D, cfg.lambda) - objective_F(batch, cfg.D0, cfg.lambda));
  EXPECT_NEAR(rows[2].min, mn, 1e-12);
  EXPECT_TRUE(rows[2].positive);
  // noiseless orthonormal: the empirical gap clears the expected lower bound
  EXPECT_GT(rows[2].min, rows[2].bound);
}

TEST(Table, CsvAndJsonAgree) {
  auto cfg = small();
  auto t = delta_F_table(cfg, run_delta_F(cfg, 2));
  std::ostringstream os;
  t.write_csv(os);
  std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')),
            "seed,config_hash,version,r,n_dirs,min_delta_F,mean_delta_F,uniform_bound,"
            "eta_n,bound_minus_2eta,positive,failed_dirs,solver_fraction");
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 4);
  auto j = t.to_json();
  EXPECT_EQ(j.size(), 3u);
  EXPECT_EQ(j[1]["config_hash"], cfg.hash);
  EXPECT_EQ(j[1]["version"], kVersion);
}

TEST(LocalMin, DictionaryStepNeverIncreasesTheFit) {
  auto D0 = fixtures::random_dictionary(6, 10, 4);
  Rng rng(2);
  Mat X = Mat::Random(6, 50), A = Mat::Random(10, 50);
  double before = codes_objective(X, D0.atoms(), A, 0.1);
  Mat D1 = dictionary_step(X, D0.atoms(), A);
  EXPECT_LE(codes_objective(X, D1, A, 0.1), before + 1e-12);
  for (int j = 0; j < 10; ++j) EXPECT_NEAR(D1.col(j).norm(), 1.0, 1e-12);
}

TEST(LocalMin, StartingAtReferenceStaysClose) {
  auto cfg = small("r_init = 0\n");
  auto res = run_local_min_search(cfg, 1);
  EXPECT_TRUE(res.converged);
  EXPECT_FALSE(res.diverged);
  EXPECT_LT(res.final_distance, 0.05);
  EXPECT_EQ(res.sign_match, 1.0);
  for (size_t t = 1; t < res.F_trace.size(); ++t)
    EXPECT_LE(res.F_trace[t], res.F_trace[t - 1] + 1e-9);
}

TEST(LocalMin, LargePenaltyCollapsesSigns) {
  auto kv = small().raw;
  kv.set("lambda_bar", "2.0");
  auto res = run_local_min_search(load_experiment(kv), 1);
  EXPECT_EQ(res.sign_match, 0.0);
}

TEST(Outliers, ZeroRatioReducesToDeltaF) {
  auto cfg = small("outliers.ratios = 0\noutliers.count = 4\n");
  auto rows = run_outlier_sweep(cfg, 4);
  auto df = run_delta_F(cfg, 4);
  ASSERT_EQ(rows.size(), 4u);  // two radii, two families
  EXPECT_NEAR(rows[0].min_delta_F, df[1].min, 1e-15);
  EXPECT_EQ(rows[0].n_out, 0.0);
}

TEST(Outliers, BelowThresholdStaysPositive) {
  auto cfg = small("outliers.ratios = 0.5\noutliers.count = 8\n");
  for (auto& r : run_outlier_sweep(cfg, 2)) {
    EXPECT_TRUE(r.positive) << r.family << " " << r.r;
    EXPECT_NEAR(r.measure, 0.5 * r.threshold, 1e-9 * r.threshold);
  }
}

TEST(SampleComplexity, EtaColumnIsPassthrough) {
  auto cfg = small("radii = 0.05\nn_grid = 50, 200\nseeds = 2\n");
  auto rows = run_sample_complexity_sweep(cfg);
  ASSERT_EQ(rows.size(), 2u);
  for (auto& r : rows)
    EXPECT_EQ(r.eta, deviation_constants(cfg.D0, cfg.model, cfg.lambda, 0.05, r.n, cfg.x).eta);
}

TEST(ParallelFor, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(8, 3, [](int i) { if (i == 5) throw std::runtime_error("x"); }),
               std::runtime_error);
}
