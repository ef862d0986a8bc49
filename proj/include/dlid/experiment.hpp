#pragma once

#include "dlid/config.hpp"
#include "dlid/core_model.hpp"
#include "dlid/dictionary_analysis.hpp"
#include "dlid/oblique_manifold.hpp"
#include "dlid/phi_analysis.hpp"
#include "dlid/sparse_solver.hpp"
#include "dlid/theorem_engine.hpp"

#include <json.hpp>

#include <atomic>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

namespace dlid {

inline constexpr const char* kVersion = "dlid-0.1.0";

// ---------------------------------------------------------------------------
// configuration

struct ExperimentConfig {
  KeyValueConfig raw;
  std::string hash;
  Dictionary D0;
  CoefficientModel model;
  double lambda = 0.0;
  double lambda_bar = 0.0;
  std::vector<double> radii;
  int n = 0;
  int n_dirs = 0;
  std::uint64_t seed = 0;
  int seeds = 1;
  double x = 5.0;
  // outliers
  int out_count = 0;
  std::string out_style = "isotropic";
  std::vector<double> out_ratios;
  std::string out_threshold = "empirical";
  int out_probes = 4;
  // local minimum search
  double r_init = 0.05;
  int max_iter = 500;
  // sample complexity
  std::vector<double> n_grid;
  int threads = 1;
  LassoOptions lasso;
  double max_fail_fraction = 0.0;
};

inline Mat read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dictionary file " + path);
  std::vector<std::vector<double>> rowsv;
  std::string line;
  while (std::getline(in, line)) {
    for (char& ch : line)
      if (ch == ',') ch = ' ';
    std::istringstream ss(line);
    std::vector<double> r;
    double v;
    while (ss >> v) r.push_back(v);
    if (!r.empty()) rowsv.push_back(std::move(r));
  }
  if (rowsv.empty()) throw ConfigError("empty dictionary file " + path);
  Mat M(rowsv.size(), rowsv[0].size());
  for (size_t i = 0; i < rowsv.size(); ++i) {
    if (rowsv[i].size() != rowsv[0].size())
      throw ConfigError("ragged dictionary file " + path);
    for (size_t j = 0; j < rowsv[i].size(); ++j) M(i, j) = rowsv[i][j];
  }
  return M;
}

inline Dictionary build_dictionary(const KeyValueConfig& c, std::uint64_t seed) {
  std::string kind = c.str("dictionary.kind", "orthonormal");
  int m = static_cast<int>(c.integer("dictionary.m", 16));
  if (m < 1) throw ConfigError("dictionary.m must be positive");
  if (kind == "orthonormal") return orthonormal_dictionary(m);
  if (kind == "onb_pair") return dirac_dct_dictionary(m);
  if (kind == "spherical") {
    int p = static_cast<int>(c.integer("dictionary.p", 2 * m));
    if (p < 1) throw ConfigError("dictionary.p must be positive");
    Rng rng = substream(static_cast<std::uint64_t>(
                            c.integer("dictionary.seed", static_cast<long>(seed))),
                        0x64696374ULL);
    return spherical_dictionary(m, p, rng);
  }
  if (kind == "file") {
    Mat M = read_matrix_file(c.str("dictionary.path", ""));
    try {
      return Dictionary::normalized(std::move(M));
    } catch (const InvalidParameter& e) {
      throw ConfigError(e.what());
    }
  }
  throw ConfigError("unknown dictionary.kind " + kind);
}

inline CoefficientModel build_model(const KeyValueConfig& c, int p) {
  std::string dist = c.str("model.dist", "signed_uniform");
  int k = static_cast<int>(c.integer("model.k", 2));
  CoefficientModel model;
  try {
    if (dist == "signed_uniform") {
      double amin = c.num("model.alpha_min", 1.0);
      model = CoefficientModel::signed_uniform(p, k, amin,
                                               c.num("model.alpha_max", amin));
    } else if (dist == "fixed_profile") {
      auto prof = c.list("model.profile", {});
      if (prof.empty()) prof.assign(k, c.num("model.alpha_min", 1.0));
      Vec a = Eigen::Map<Vec>(prof.data(), prof.size());
      model = CoefficientModel::fixed_profile(p, a);
      if (c.has("model.k") && model.k != k)
        throw ConfigError("model.profile length differs from model.k");
    } else {
      throw ConfigError("unknown model.dist " + dist);
    }
    double meps = c.num("model.M_eps", 0.0);
    if (meps > 0) model.with_noise(c.num("model.noise_sigma", meps / 4.0), meps);
  } catch (const InvalidParameter& e) {
    throw ConfigError(e.what());
  }
  return model;
}

inline ExperimentConfig load_experiment(const KeyValueConfig& c,
                                        std::optional<std::uint64_t> seed_flag = {}) {
  // typos would otherwise fall back to defaults silently
  static const std::set<std::string> known = {
      "dictionary.kind", "dictionary.m", "dictionary.p", "dictionary.seed",
      "dictionary.path", "model.k", "model.dist", "model.alpha_min",
      "model.alpha_max", "model.profile", "model.M_eps", "model.noise_sigma",
      "lambda", "lambda_bar", "radii", "n", "n_dirs", "seed", "seeds", "x",
      "outliers.count", "outliers.style", "outliers.ratios",
      "outliers.threshold", "outliers.probes", "r_init", "max_iter", "n_grid",
      "threads", "lasso.tol", "lasso.max_sweeps", "max_fail_fraction"};
  for (auto& [k, v] : c.entries())
    if (!known.count(k)) throw ConfigError("unknown config key " + k);
  ExperimentConfig e;
  e.raw = c;
  e.seed = seed_flag ? *seed_flag
                     : static_cast<std::uint64_t>(c.integer("seed", 1));
  e.hash = config_hash(c.canonical() + "seed=" + std::to_string(e.seed));
  e.D0 = build_dictionary(c, e.seed);
  e.model = build_model(c, e.D0.p());
  if (c.has("lambda") == c.has("lambda_bar"))
    throw ConfigError("set exactly one of lambda, lambda_bar");
  if (c.has("lambda")) {
    e.lambda = c.num("lambda", 0.0);
    e.lambda_bar = e.lambda / e.model.E_abs_alpha();
  } else {
    e.lambda_bar = c.num("lambda_bar", 0.0);
    e.lambda = e.lambda_bar * e.model.E_abs_alpha();
  }
  if (!(e.lambda > 0)) throw ConfigError("lambda must be positive");
  e.radii = c.list("radii", {0.05});
  e.n = static_cast<int>(c.integer("n", 1000));
  e.n_dirs = static_cast<int>(c.integer("n_dirs", 20));
  e.seeds = static_cast<int>(c.integer("seeds", 1));
  e.x = c.num("x", 5.0);
  e.out_count = static_cast<int>(c.integer("outliers.count", 0));
  e.out_style = c.str("outliers.style", "isotropic");
  e.out_ratios = c.list("outliers.ratios", {0.5, 1.0, 2.0});
  e.out_threshold = c.str("outliers.threshold", "empirical");
  e.out_probes = static_cast<int>(c.integer("outliers.probes", 4));
  e.r_init = c.num("r_init", 0.05);
  e.max_iter = static_cast<int>(c.integer("max_iter", 500));
  e.n_grid = c.list("n_grid", {static_cast<double>(e.n)});
  e.threads = static_cast<int>(c.integer("threads", 1));
  e.lasso.tol_rel = c.num("lasso.tol", 1e-10);
  e.lasso.max_sweeps = c.integer("lasso.max_sweeps", 100000);
  e.max_fail_fraction = c.num("max_fail_fraction", 0.0);

  if (e.radii.empty() || e.n_grid.empty() || e.out_ratios.empty())
    throw ConfigError("grids must be nonempty");
  for (double r : e.radii)
    if (!(r >= 0)) throw ConfigError("radii must be nonnegative");
  if (e.n <= 0 || e.n_dirs <= 0 || e.seeds <= 0 || e.max_iter <= 0 ||
      e.threads <= 0)
    throw ConfigError("counts must be positive");
  if (e.out_probes < 0) throw ConfigError("outliers.probes must be nonnegative");
  if (e.out_count < 0) throw ConfigError("outliers.count must be nonnegative");
  if (e.out_style != "isotropic" && e.out_style != "adversarial")
    throw ConfigError("outliers.style must be isotropic or adversarial");
  if (e.out_threshold != "empirical" && e.out_threshold != "theory")
    throw ConfigError("outliers.threshold must be empirical or theory");
  return e;
}

// ---------------------------------------------------------------------------
// plumbing

// deterministic: slot i is written only by the call fn(i)
template <class Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

struct Table {
  std::vector<std::string> columns;
  std::vector<nlohmann::json> rows;

  void write_csv(std::ostream& os) const {
    for (size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c];
    os << "\n";
    for (auto& r : rows) {
      for (size_t c = 0; c < columns.size(); ++c) {
        if (c) os << ",";
        const auto& v = r.at(columns[c]);
        if (v.is_string()) os << v.get<std::string>();
        else if (v.is_boolean()) os << (v.get<bool>() ? 1 : 0);
        else if (v.is_number_float()) {
          double d = v.get<double>();
          if (std::isnan(d)) os << "nan";
          else {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.12g", d);
            os << buf;
          }
        } else if (v.is_null()) os << "nan";
        else os << v.dump();
      }
      os << "\n";
    }
  }

  nlohmann::json to_json() const { return rows; }
};

// mean of per-signal differences, accumulated in long double
inline double mean_difference(const Vec& a, const Vec& b) {
  long double s = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    s += static_cast<long double>(a[i]) - b[i];
  return static_cast<double>(s / a.size());
}

inline std::uint64_t cell_index(std::uint64_t a, std::uint64_t b) {
  return (a << 32) ^ b;
}

// f_x(D) - f_x(D0) over a fixed batch, paired across directions
struct PairedObjective {
  const SignalBatch& batch;
  double lambda;
  LassoOptions opt;
  Vec f0;

  PairedObjective(const SignalBatch& b, const Dictionary& D0, double lam,
                  const LassoOptions& o)
      : batch(b), lambda(lam), opt(o) {
    f0 = objective_values(batch.X, D0, lambda, &batch.signs, opt).values;
  }

  // per-column f_x(D) - f_x(D0)
  Vec differences(const Dictionary& D) const {
    return objective_values(batch.X, D, lambda, &batch.signs, opt).values - f0;
  }

  double delta(const Dictionary& D) const {
    Vec f = objective_values(batch.X, D, lambda, &batch.signs, opt).values;
    return mean_difference(f, f0);
  }
};

inline std::vector<Dictionary> sphere_directions(const Dictionary& D0, double r,
                                                 int count, std::uint64_t seed,
                                                 std::uint64_t radius_index) {
  std::vector<Dictionary> out;
  out.reserve(count);
  for (int d = 0; d < count; ++d) {
    Rng rng = substream(seed ^ 0x73706865726573ULL,
                        cell_index(radius_index, static_cast<std::uint64_t>(d)));
    out.push_back(sample_sphere(D0, r, rng));
  }
  return out;
}

inline void stamp(nlohmann::json& row, const ExperimentConfig& cfg,
                  std::uint64_t seed) {
  row["seed"] = seed;
  row["config_hash"] = cfg.hash;
  row["version"] = kVersion;
}

// ---------------------------------------------------------------------------
// Delta F over the sphere

struct DeltaFRow {
  std::uint64_t seed = 0;
  double r = 0.0;
  int n_dirs = 0;
  double min = 0.0;
  double mean = 0.0;
  double bound = 0.0;  // uniform lower bound at r
  double eta = std::numeric_limits<double>::quiet_NaN();
  double bound_minus_2eta = std::numeric_limits<double>::quiet_NaN();
  bool positive = false;
  int failed_dirs = 0;  // solver non-convergence
  double solver_fraction = 0.0;
};

inline std::vector<DeltaFRow> run_delta_F_batch(const ExperimentConfig& cfg,
                                                const SignalBatch& batch,
                                                std::uint64_t seed) {
  PairedObjective obj(batch, cfg.D0, cfg.lambda, cfg.lasso);
  std::vector<DeltaFRow> out;
  for (size_t ri = 0; ri < cfg.radii.size(); ++ri) {
    DeltaFRow row;
    row.seed = seed;
    row.r = cfg.radii[ri];
    row.n_dirs = cfg.n_dirs;
    auto ub = uniform_lower_bound(cfg.D0, cfg.model, cfg.lambda_bar, row.r);
    row.bound = ub.bound;
    try {
      row.eta = deviation_constants(cfg.D0, cfg.model, cfg.lambda, row.r,
                                    batch.n_in, cfg.x)
                    .eta;
      row.bound_minus_2eta = row.bound - 2.0 * row.eta;
    } catch (const InfeasibleRadius&) {
    }
    if (row.r == 0.0) {
      row.min = row.mean = 0.0;
      out.push_back(row);
      continue;
    }
    auto dirs = sphere_directions(cfg.D0, row.r, cfg.n_dirs, seed, ri);
    std::vector<double> vals(cfg.n_dirs, 0.0);
    std::vector<char> failed(cfg.n_dirs, 0);
    std::vector<int> solver(cfg.n_dirs, 0);
    parallel_for(cfg.n_dirs, cfg.threads, [&](int d) {
      try {
        auto ov = objective_values(batch.X, dirs[d], cfg.lambda, &batch.signs,
                                   cfg.lasso);
        vals[d] = mean_difference(ov.values, obj.f0);
        solver[d] = ov.solver;
      } catch (const NonConvergence&) {
        failed[d] = 1;
      }
    });
    row.min = std::numeric_limits<double>::infinity();
    long double sum = 0;
    int ok = 0;
    long solved = 0;
    for (int d = 0; d < cfg.n_dirs; ++d) {
      if (failed[d]) {
        ++row.failed_dirs;
        continue;
      }
      row.min = std::min(row.min, vals[d]);
      sum += vals[d];
      solved += solver[d];
      ++ok;
    }
    row.mean = ok ? static_cast<double>(sum / ok) : std::nan("");
    row.positive = ok == cfg.n_dirs && row.min > 0;
    row.solver_fraction = static_cast<double>(solved) / (double(cfg.n_dirs) * batch.n());
    out.push_back(row);
  }
  return out;
}

inline std::vector<DeltaFRow> run_delta_F(const ExperimentConfig& cfg,
                                          std::uint64_t seed) {
  auto batch = generate_batch(cfg.D0, cfg.model, cfg.n, mix64(seed));
  return run_delta_F_batch(cfg, batch, seed);
}

inline Table delta_F_table(const ExperimentConfig& cfg,
                           const std::vector<DeltaFRow>& rows) {
  Table t;
  t.columns = {"seed", "config_hash", "version", "r", "n_dirs", "min_delta_F",
               "mean_delta_F", "uniform_bound", "eta_n", "bound_minus_2eta",
               "positive", "failed_dirs", "solver_fraction"};
  for (auto& r : rows) {
    nlohmann::json j = {{"r", r.r}, {"n_dirs", r.n_dirs},
                        {"min_delta_F", r.min}, {"mean_delta_F", r.mean},
                        {"uniform_bound", r.bound}, {"eta_n", r.eta},
                        {"bound_minus_2eta", r.bound_minus_2eta},
                        {"positive", r.positive}, {"failed_dirs", r.failed_dirs},
                        {"solver_fraction", r.solver_fraction}};
    stamp(j, cfg, r.seed);
    t.rows.push_back(j);
  }
  return t;
}

// ---------------------------------------------------------------------------
// alternating minimization

struct LocalMinResult {
  std::uint64_t seed = 0;
  Dictionary D_hat;
  double r_init = 0.0;
  double final_distance = 0.0;
  int iterations = 0;
  bool converged = false;
  bool diverged = false;
  std::vector<double> F_trace;
  double sign_match = 0.0;
  std::string message;
};

// each atom moves to the unit-norm minimizer of ||R_j - d a_j'||_F with the
// other atoms and the codes held fixed: normalized least squares
inline Mat dictionary_step(const Mat& X, const Mat& D, const Mat& A) {
  Mat Dn = D;
  Mat E = X - Dn * A;
  for (Eigen::Index j = 0; j < D.cols(); ++j) {
    Eigen::RowVectorXd aj = A.row(j);
    double a2 = aj.squaredNorm();
    if (a2 == 0.0) continue;
    Vec v = E * aj.transpose() + a2 * Dn.col(j);
    double nv = v.norm();
    if (nv == 0.0) continue;
    Vec dn = v / nv;
    E.noalias() += (Dn.col(j) - dn) * aj;
    Dn.col(j) = dn;
  }
  return Dn;
}

inline double codes_objective(const Mat& X, const Mat& D, const Mat& A,
                              double lambda) {
  return (0.5 * (X - D * A).colwise().squaredNorm().sum() +
          lambda * A.cwiseAbs().sum()) /
         X.cols();
}

inline LocalMinResult run_local_min_search(const ExperimentConfig& cfg,
                                           std::uint64_t seed) {
  LocalMinResult res;
  res.seed = seed;
  res.r_init = cfg.r_init;
  auto batch = generate_batch(cfg.D0, cfg.model, cfg.n, mix64(seed));
  Rng rng = substream(seed ^ 0x696e6974ULL, 0);
  Dictionary D = cfg.r_init > 0 ? sample_sphere(cfg.D0, cfg.r_init, rng) : cfg.D0;
  Mat A;
  auto ov = objective_values(batch.X, D, cfg.lambda, &batch.signs, cfg.lasso, &A);
  res.F_trace.push_back(ov.values.mean());
  for (int it = 0; it < cfg.max_iter; ++it) {
    Mat Dn = dictionary_step(batch.X, D.atoms(), A);
    double before = codes_objective(batch.X, D.atoms(), A, cfg.lambda);
    double after = codes_objective(batch.X, Dn, A, cfg.lambda);
    double step = (Dn - D.atoms()).norm();
    D = Dictionary::normalized(std::move(Dn));
    ov = objective_values(batch.X, D, cfg.lambda, &batch.signs, cfg.lasso, &A);
    res.F_trace.push_back(ov.values.mean());
    res.iterations = it + 1;
    if (after > before + 1e-9 ||
        res.F_trace.back() > res.F_trace[res.F_trace.size() - 2] + 1e-9) {
      res.diverged = true;
      res.message = "objective increased across a dictionary step";
      break;
    }
    if (step <= 1e-8) {
      res.converged = true;
      break;
    }
  }
  if (!res.converged && !res.diverged) res.message = "iteration cap reached";
  res.D_hat = D;
  res.final_distance = (D.atoms() - cfg.D0.atoms()).norm();
  int match = 0, total = 0;
  for (int i = 0; i < batch.n(); ++i) {
    if (!batch.inlier[i]) continue;
    ++total;
    bool ok = true;
    for (int j = 0; j < D.p() && ok; ++j)
      ok = sgn(A(j, i)) == static_cast<double>(batch.signs(j, i));
    match += ok;
  }
  res.sign_match = total ? static_cast<double>(match) / total : 0.0;
  return res;
}

inline nlohmann::json to_json(const LocalMinResult& r, const ExperimentConfig& cfg) {
  nlohmann::json j = {{"r_init", r.r_init},
                      {"final_distance", r.final_distance},
                      {"iterations", r.iterations},
                      {"converged", r.converged},
                      {"diverged", r.diverged},
                      {"sign_match", r.sign_match},
                      {"F_trace", r.F_trace},
                      {"message", r.message}};
  stamp(j, cfg, r.seed);
  return j;
}

// ---------------------------------------------------------------------------
// outliers

// Outliers built against a known probe dictionary: start on the probe atom
// that moved most, then climb (f_x(D0) - f_x(D)) / |x|^2 by gradient ascent.
// grad_x f_x(D) = x - D alpha*(x).
struct CraftedOutlier {
  Vec x;
  double gain = 0.0;  // (f_x(D0) - f_x(D)) / |x|^2
};

inline CraftedOutlier craft_adversarial_outlier(const Dictionary& D0,
                                                const Dictionary& D,
                                                double lambda,
                                                const LassoOptions& opt,
                                                int iters = 150) {
  Mat G0 = D0.atoms().transpose() * D0.atoms();
  Mat G = D.atoms().transpose() * D.atoms();
  auto eval = [&](const Vec& x, Vec* grad) {
    double xx = x.squaredNorm();
    auto l0 = lasso_gram(G0, D0.atoms().transpose() * x, xx, lambda, opt);
    auto l1 = lasso_gram(G, D.atoms().transpose() * x, xx, lambda, opt);
    double h = (l0.value - l1.value) / xx;
    if (grad) {
      Vec r0 = x - D0.atoms() * l0.alpha;
      Vec r1 = x - D.atoms() * l1.alpha;
      *grad = (r0 - r1) / xx - 2.0 * h * x / xx;
    }
    return h;
  };
  auto dec = decompose(D0, D);
  Eigen::Index j;
  dec.theta.maxCoeff(&j);
  CraftedOutlier best;
  best.x = D.col(static_cast<int>(j)) * lambda;
  best.gain = -std::numeric_limits<double>::infinity();
  for (double scale : {1.5, 2.0, 3.0, 5.0, 8.0}) {
    Vec x = D.col(static_cast<int>(j)) * (scale * lambda);
    Vec grad;
    double h = eval(x, &grad);
    double step = x.squaredNorm();
    for (int it = 0; it < iters && step > 1e-14; ++it) {
      Vec trial = x + step * grad;
      Vec tg;
      double ht = eval(trial, &tg);
      if (ht > h) {
        x = trial;
        h = ht;
        grad = tg;
        step *= 1.5;
      } else {
        step *= 0.3;
      }
    }
    if (h > best.gain) {
      best.gain = h;
      best.x = x;
    }
  }
  return best;
}

struct OutlierRow {
  std::uint64_t seed = 0;
  double r = 0.0;
  std::string family;  // naive (on ||X_out||_F^2) or refined (on ||X_out||_{1,2})
  double ratio = 0.0;  // multiple of the threshold
  double threshold = 0.0;  // per-inlier threshold that ratio multiplies
  double measure = 0.0;    // realized ||X_out||_F^2 / n_in or ||X_out||_{1,2} / n_in
  double n_out = 0.0;
  double min_delta_F = 0.0;
  double min_delta_F_in = 0.0;
  bool positive = false;
  bool within_prediction = false;
  double theory_naive = 0.0;
  double theory_refined = 0.0;
};

inline std::vector<OutlierRow> run_outlier_sweep(const ExperimentConfig& cfg,
                                                 std::uint64_t seed) {
  auto batch = generate_batch(cfg.D0, cfg.model, cfg.n, mix64(seed));
  const double n_in = batch.n_in;
  PairedObjective obj(batch, cfg.D0, cfg.lambda, cfg.lasso);
  auto report = asymptotic_report(cfg.D0, cfg.model, cfg.lambda);
  auto sp = spectral_profile(cfg.D0);
  const double kp32 = 18.0 * std::pow(cfg.D0.p(), 1.5) /
                      std::sqrt(static_cast<double>(cfg.model.k));
  std::vector<OutlierRow> rows;

  for (size_t ri = 0; ri < cfg.radii.size(); ++ri) {
    const double r = cfg.radii[ri];
    if (!(r > 0)) continue;
    auto dirs = sphere_directions(cfg.D0, r, cfg.n_dirs, seed, ri);
    // the adversary may also probe single-atom rotations, which the
    // sampler essentially never produces
    if (cfg.out_style == "adversarial" && r <= 2.0) {
      for (int t = 0; t < cfg.out_probes; ++t) {
        Rng rng = substream(seed ^ 0x70726f6265ULL, cell_index(ri, t));
        int j = std::uniform_int_distribution<int>(0, cfg.D0.p() - 1)(rng);
        dirs.push_back(single_atom_sphere_point(cfg.D0, j, r, rng));
      }
    }
    const int n_dirs = static_cast<int>(dirs.size());
    std::vector<double> din(n_dirs);
    parallel_for(n_dirs, cfg.threads,
                 [&](int d) { din[d] = obj.delta(dirs[d]); });
    const double min_in = *std::min_element(din.begin(), din.end());
    auto th = outlier_thresholds(report, r, cfg.x, n_in, sp.frame_lower);
    const double refined_denom =
        cfg.model.E_abs_alpha() * kp32 * r * cfg.lambda_bar /
        std::pow(std::max(sp.frame_lower, 1e-300), 1.5);

    // per-inlier thresholds on ||X_out||_F^2 / n_in and ||X_out||_{1,2} / n_in
    double t_naive, t_ref;
    if (cfg.out_threshold == "theory") {
      t_naive = th.naive / n_in;
      t_ref = th.refined / n_in;
    } else {
      t_naive = 2.0 * std::max(min_in, 0.0);
      t_ref = sp.frame_lower > 0 ? std::max(min_in, 0.0) / refined_denom : 0.0;
    }

    // adversary: the gain grows with the largest single-atom angle, the
    // cost with the inlier gap, so try the extremes of both
    CraftedOutlier crafted;
    if (cfg.out_style == "adversarial") {
      std::vector<int> by_gap(n_dirs), by_angle(n_dirs);
      std::vector<double> tmax(n_dirs);
      for (int d = 0; d < n_dirs; ++d)
        tmax[d] = decompose(cfg.D0, dirs[d]).theta.maxCoeff();
      std::iota(by_gap.begin(), by_gap.end(), 0);
      by_angle = by_gap;
      std::sort(by_gap.begin(), by_gap.end(),
                [&](int a, int b) { return din[a] < din[b]; });
      std::sort(by_angle.begin(), by_angle.end(),
                [&](int a, int b) { return tmax[a] > tmax[b]; });
      std::vector<int> cand;
      for (int t = 0; t < std::min(3, n_dirs); ++t) cand.push_back(by_gap[t]);
      for (int t = 0; t < std::min(5, n_dirs); ++t)
        if (std::find(cand.begin(), cand.end(), by_angle[t]) == cand.end())
          cand.push_back(by_angle[t]);
      std::vector<CraftedOutlier> tried(cand.size());
      parallel_for(static_cast<int>(cand.size()), cfg.threads, [&](int t) {
        tried[t] = craft_adversarial_outlier(cfg.D0, dirs[cand[t]], cfg.lambda,
                                             cfg.lasso);
      });
      double best = -std::numeric_limits<double>::infinity();
      for (size_t t = 0; t < cand.size(); ++t) {
        double score = tried[t].gain / std::max(din[cand[t]], 1e-300);
        if (score > best) {
          best = score;
          crafted = tried[t];
        }
      }
    }

    for (std::string family : {"naive", "refined"}) {
      double thr = family == "naive" ? t_naive : t_ref;
      for (size_t qi = 0; qi < cfg.out_ratios.size(); ++qi) {
        const double ratio = cfg.out_ratios[qi];
        const double budget = ratio * thr * n_in;  // total measure
        OutlierRow row;
        row.seed = seed;
        row.r = r;
        row.family = family;
        row.ratio = ratio;
        row.threshold = thr;
        row.theory_naive = th.naive / n_in;
        row.theory_refined = th.refined_available ? th.refined / n_in : 0.0;

        Mat Xout;
        Vec weight;
        if (budget > 0 && cfg.out_style == "adversarial") {
          Vec x = crafted.x;
          double unit = family == "naive" ? x.squaredNorm() : x.norm();
          double copies = std::max(1.0, std::round(budget / unit));
          double s = family == "naive" ? std::sqrt(budget / (copies * unit))
                                       : budget / (copies * unit);
          Xout = s * x;
          weight = Vec::Constant(1, copies);
        } else if (budget > 0) {
          int cnt = std::max(1, cfg.out_count);
          double energy = family == "naive" ? std::sqrt(budget / cnt) : budget / cnt;
          SignalBatch empty;
          empty.X.resize(cfg.D0.m(), 0);
          empty.A.resize(cfg.D0.p(), 0);
          empty.E.resize(cfg.D0.m(), 0);
          empty.signs.resize(cfg.D0.p(), 0);
          auto ob = inject_outliers(empty, cnt, energy,
                                    seed ^ static_cast<std::uint64_t>(ri * 1000 + qi));
          Xout = ob.X;
          weight = Vec::Ones(cnt);
        }
        row.n_out = weight.size() ? weight.sum() : 0.0;
        double meas = 0.0;
        for (Eigen::Index c = 0; c < Xout.cols(); ++c)
          meas += weight[c] * (family == "naive" ? Xout.col(c).squaredNorm()
                                                 : Xout.col(c).norm());
        row.measure = meas / n_in;

        Vec fout0;
        if (Xout.cols())
          fout0 = objective_values(Xout, cfg.D0, cfg.lambda, nullptr, cfg.lasso).values;
        row.min_delta_F = std::numeric_limits<double>::infinity();
        for (int d = 0; d < n_dirs; ++d) {
          long double tot = static_cast<long double>(din[d]) * n_in;
          if (Xout.cols()) {
            Vec f = objective_values(Xout, dirs[d], cfg.lambda, nullptr, cfg.lasso).values;
            for (Eigen::Index c = 0; c < Xout.cols(); ++c)
              tot += static_cast<long double>(weight[c]) * (f[c] - fout0[c]);
          }
          double v = static_cast<double>(tot / (n_in + row.n_out));
          row.min_delta_F = std::min(row.min_delta_F, v);
        }
        row.min_delta_F_in = min_in;
        row.positive = row.min_delta_F > 0;
        // below the threshold positivity is predicted; above it nothing is
        row.within_prediction = ratio >= 1.0 || thr <= 0 || row.positive;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

inline Table outlier_table(const ExperimentConfig& cfg,
                           const std::vector<OutlierRow>& rows) {
  Table t;
  t.columns = {"seed", "config_hash", "version", "r", "family", "ratio",
               "threshold", "measure", "n_out", "min_delta_F",
               "min_delta_F_in", "positive", "within_prediction",
               "theory_naive", "theory_refined"};
  for (auto& r : rows) {
    nlohmann::json j = {{"r", r.r}, {"family", r.family}, {"ratio", r.ratio},
                        {"threshold", r.threshold}, {"measure", r.measure},
                        {"n_out", r.n_out}, {"min_delta_F", r.min_delta_F},
                        {"min_delta_F_in", r.min_delta_F_in},
                        {"positive", r.positive},
                        {"within_prediction", r.within_prediction},
                        {"theory_naive", r.theory_naive},
                        {"theory_refined", r.theory_refined}};
    stamp(j, cfg, r.seed);
    t.rows.push_back(j);
  }
  return t;
}

// ---------------------------------------------------------------------------
// sample complexity

struct SampleRow {
  double n = 0.0;
  double r = 0.0;
  int seeds = 0;
  int failures = 0;
  double failure_rate = 0.0;
  double eta = std::numeric_limits<double>::quiet_NaN();
  double n_required = std::numeric_limits<double>::quiet_NaN();
};

inline std::vector<SampleRow> run_sample_complexity_sweep(
    const ExperimentConfig& cfg) {
  auto report = asymptotic_report(cfg.D0, cfg.model, cfg.lambda);
  std::vector<SampleRow> out;
  const double r = cfg.radii.front();
  for (double n : cfg.n_grid) {
    if (!(n >= 1)) throw ConfigError("n_grid entries must be positive");
    ExperimentConfig c = cfg;
    c.n = static_cast<int>(n);
    c.radii = {r};
    SampleRow row;
    row.n = n;
    row.r = r;
    row.seeds = cfg.seeds;
    for (int s = 0; s < cfg.seeds; ++s) {
      auto rows = run_delta_F(c, cfg.seed + static_cast<std::uint64_t>(s));
      if (!rows.front().positive) ++row.failures;
    }
    row.failure_rate = static_cast<double>(row.failures) / cfg.seeds;
    try {
      row.eta = deviation_constants(cfg.D0, cfg.model, cfg.lambda, r, n, cfg.x).eta;
    } catch (const InfeasibleRadius&) {
    }
    if (r > report.r_lo && r < report.r_hi)
      row.n_required = finite_sample_n(report, r, cfg.x).n_in;
    out.push_back(row);
  }
  return out;
}

inline Table sample_table(const ExperimentConfig& cfg,
                          const std::vector<SampleRow>& rows) {
  Table t;
  t.columns = {"seed", "config_hash", "version", "n", "r", "seeds",
               "failures", "failure_rate", "eta_n", "n_required"};
  for (auto& r : rows) {
    nlohmann::json j = {{"n", r.n}, {"r", r.r}, {"seeds", r.seeds},
                        {"failures", r.failures},
                        {"failure_rate", r.failure_rate}, {"eta_n", r.eta},
                        {"n_required", r.n_required}};
    stamp(j, cfg, cfg.seed);
    t.rows.push_back(j);
  }
  return t;
}

}  // namespace dlid
