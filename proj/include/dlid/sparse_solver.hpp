#pragma once

#include "dlid/core_model.hpp"
#include "dlid/dictionary_analysis.hpp"

namespace dlid {

struct RankDeficient : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonConvergence : std::runtime_error {
  double gap;
  NonConvergence(const std::string& what, double g)
      : std::runtime_error(what), gap(g) {}
};

inline double soft_threshold(double z, double t) {
  return z > t ? z - t : (z < -t ? z + t : 0.0);
}

inline Support support_of(const Vec& s) {
  Support J;
  for (Eigen::Index j = 0; j < s.size(); ++j)
    if (s[j] != 0.0) J.push_back(static_cast<int>(j));
  return J;
}

inline std::string support_string(const Support& J) {
  std::string out = "{";
  for (size_t t = 0; t < J.size(); ++t)
    out += (t ? "," : "") + std::to_string(J[t]);
  return out + "}";
}

// Theta_J = (G_J)^{-1}, guarded by the smallest eigenvalue
inline Mat inverse_gram(const Mat& GJ, const Support& J) {
  Eigen::SelfAdjointEigenSolver<Mat> es(GJ);
  if (es.eigenvalues()[0] <= 1e-10)
    throw RankDeficient("singular restricted Gram on support " +
                        support_string(J));
  return es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

inline Mat columns(const Mat& D, const Support& J) {
  Mat out(D.rows(), static_cast<Eigen::Index>(J.size()));
  for (size_t t = 0; t < J.size(); ++t) out.col(t) = D.col(J[t]);
  return out;
}

inline Vec rows(const Vec& v, const Support& J) {
  Vec out(J.size());
  for (size_t t = 0; t < J.size(); ++t) out[t] = v[J[t]];
  return out;
}

struct RestrictedSolution {
  Vec alpha_hat;
  double phi_value = 0.0;
  bool sign_matches = false;
  Support support;
};

// sign-restricted closed form: alpha_J = D_J^+ x - lambda Theta_J s_J
inline RestrictedSolution restricted_minimizer(const Vec& x,
                                               const Dictionary& D,
                                               const Vec& s, double lambda) {
  RestrictedSolution out;
  out.support = support_of(s);
  const Support& J = out.support;
  out.alpha_hat = Vec::Zero(D.p());
  if (J.empty()) {
    out.phi_value = 0.5 * x.squaredNorm();
    out.sign_matches = true;
    return out;
  }
  Mat DJ = columns(D.atoms(), J);
  Mat theta = inverse_gram(DJ.transpose() * DJ, J);
  Vec sJ = rows(s, J);
  Vec b = DJ.transpose() * x - lambda * sJ;
  Vec aJ = theta * b;
  out.phi_value = 0.5 * (x.squaredNorm() - b.dot(aJ));
  out.sign_matches = true;
  for (size_t t = 0; t < J.size(); ++t) {
    out.alpha_hat[J[t]] = aJ[t];
    if (sgn(aJ[t]) != sJ[t]) out.sign_matches = false;
  }
  return out;
}

inline double lasso_objective(const Vec& x, const Dictionary& D,
                              const Vec& alpha, double lambda) {
  return 0.5 * (x - D.atoms() * alpha).squaredNorm() +
         lambda * alpha.lpNorm<1>();
}

struct LassoOptions {
  double tol_rel = 1e-10;  // gap <= tol_rel * (1 + ||x||^2)
  long max_sweeps = 100000;
};

struct LassoResult {
  Vec alpha;
  double value = 0.0;
  double gap = 0.0;
  long sweeps = 0;
};

// Cyclic coordinate descent on the Gram form
//   1/2 a'Ga - c'a + 1/2 xx + lambda |a|_1,  G = D'D, c = D'x, xx = |x|^2.
// g tracks D'(x - Da).
inline LassoResult lasso_gram(const Mat& G, const Vec& c, double xx,
                              double lambda, const LassoOptions& opt = {},
                              const Vec* warm = nullptr) {
  if (!(lambda > 0)) throw InvalidParameter("lasso requires lambda > 0");
  if (!(opt.tol_rel > 0)) throw InvalidParameter("lasso requires tol > 0");
  const int p = static_cast<int>(c.size());
  LassoResult res;
  res.alpha = warm ? *warm : Vec::Zero(p);
  Vec& a = res.alpha;
  Vec g = c - G * a;
  const double tol = opt.tol_rel * (1.0 + xx);

  auto sweep = [&](bool active_only) {
    double moved = 0.0;
    for (int j = 0; j < p; ++j) {
      if (active_only && a[j] == 0.0) continue;
      double old = a[j];
      double z = g[j] + G(j, j) * old;
      double nw = soft_threshold(z, lambda) / G(j, j);
      if (nw != old) {
        g.noalias() -= (nw - old) * G.col(j);
        a[j] = nw;
        moved = std::max(moved, std::abs(nw - old));
      }
    }
    return moved;
  };

  auto gap_and_kkt = [&](double& gap) {
    g = c - G * a;
    double ca = c.dot(a), ga = g.dot(a);
    double res2 = std::max(0.0, xx - ca - ga);
    double primal = 0.5 * res2 + lambda * a.lpNorm<1>();
    double gmax = g.lpNorm<Eigen::Infinity>();
    double scale = gmax > lambda ? lambda / gmax : 1.0;
    double dual = scale * (xx - ca) - 0.5 * scale * scale * res2;
    gap = std::max(0.0, primal - dual);
    bool kkt = gmax <= lambda + tol;
    for (int j = 0; j < p && kkt; ++j)
      if (a[j] != 0.0 && std::abs(g[j] - lambda * sgn(a[j])) > tol) kkt = false;
    res.value = primal;
    return gap <= tol && kkt;
  };

  double gap = 0.0;
  if (gap_and_kkt(gap)) {
    res.gap = gap;
    return res;
  }
  while (res.sweeps < opt.max_sweeps) {
    sweep(false);
    ++res.sweeps;
    for (int inner = 0; inner < 1000 && res.sweeps < opt.max_sweeps; ++inner) {
      double moved = sweep(true);
      ++res.sweeps;
      if (moved <= 1e-15) break;
    }
    if (gap_and_kkt(gap)) {
      res.gap = gap;
      return res;
    }
  }
  throw NonConvergence("lasso sweep cap exceeded", gap);
}

inline LassoResult lasso_solve(const Vec& x, const Dictionary& D,
                               double lambda, const LassoOptions& opt = {}) {
  Mat G = D.atoms().transpose() * D.atoms();
  Vec c = D.atoms().transpose() * x;
  return lasso_gram(G, c, x.squaredNorm(), lambda, opt);
}

inline double f_value(const Vec& x, const Dictionary& D, double lambda,
                      const LassoOptions& opt = {}) {
  return lasso_solve(x, D, lambda, opt).value;
}

struct SignCertificate {
  bool restricted_sign_ok = false;
  double dual_norm_margin = 0.0;
  bool passed = false;
};

// both conditions of the exact-recovery certificate, from Gram quantities
inline SignCertificate certificate_gram(const Mat& G, const Vec& c,
                                        const Support& J, const Vec& sJ,
                                        double lambda) {
  SignCertificate cert;
  const int p = static_cast<int>(c.size());
  Mat theta = inverse_gram(restrict_gram(G, J), J);
  Vec cJ = rows(c, J);
  Vec aJ = theta * (cJ - lambda * sJ);
  cert.restricted_sign_ok = true;
  for (size_t t = 0; t < J.size(); ++t)
    if (sgn(aJ[t]) != sJ[t]) cert.restricted_sign_ok = false;
  Vec proj = theta * cJ;  // D_J^+ x
  std::vector<char> in(p, 0);
  for (int j : J) in[j] = 1;
  double corr = 0.0, op = 0.0;
  for (int i = 0; i < p; ++i) {
    if (in[i]) continue;
    Eigen::RowVectorXd gi(J.size());
    for (size_t t = 0; t < J.size(); ++t) gi[t] = G(i, J[t]);
    corr = std::max(corr, std::abs(c[i] - gi.dot(proj)));
    op = std::max(op, (gi * theta).lpNorm<1>());
  }
  cert.dual_norm_margin = lambda - (corr + lambda * op);
  cert.passed = cert.restricted_sign_ok && cert.dual_norm_margin > 0;
  return cert;
}

inline SignCertificate check_sign_recovery(const Vec& x, const Dictionary& D,
                                           const Vec& s, double lambda) {
  Support J = support_of(s);
  Mat G = D.atoms().transpose() * D.atoms();
  Vec c = D.atoms().transpose() * x;
  return certificate_gram(G, c, J, rows(s, J), lambda);
}

// min |alpha_J| >= 2 lambda and ||x - D alpha|| < lambda (1 - 2 mu_k)
inline bool recovery_threshold_check(const Dictionary& D, const Vec& alpha0,
                                     const Vec& x, double lambda,
                                     double mu_k) {
  if (!(mu_k < 0.5)) return false;
  double amin = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < alpha0.size(); ++j)
    if (alpha0[j] != 0.0) amin = std::min(amin, std::abs(alpha0[j]));
  double resid = (x - D.atoms() * alpha0).norm();
  return amin >= 2.0 * lambda && resid < lambda * (1.0 - 2.0 * mu_k);
}

struct Prop4Check {
  double mu_k = 0.0;
  double lambda_bar = 0.0;
  double C_max = 0.0;
  double noise_threshold = 0.0;  // bound on M_eps / M_alpha at radius r
  bool assumptions_ok = false;
  bool admissible = false;
  std::string note;
};

inline Prop4Check proposition4_radius_check(const Dictionary& D0,
                                             const CoefficientModel& model,
                                             double lambda, double r) {
  Prop4Check out;
  out.mu_k = model.k < D0.p() ? cumulative_coherence(D0, model.k) : 0.0;
  const double Ea = model.E_abs_alpha(), Ma = model.M_alpha();
  out.lambda_bar = lambda / Ea;
  out.C_max = (2.0 / 7.0) * (Ea / Ma) * (1.0 - 2.0 * out.mu_k);
  out.noise_threshold = 3.5 * (out.C_max * out.lambda_bar - r);
  out.assumptions_ok = true;
  if (!(out.mu_k < 0.5)) {
    out.assumptions_ok = false;
    out.note = "mu_k(D0) >= 1/2";
  }
  if (!(out.lambda_bar <= model.alpha_min / (2.0 * Ea))) {
    out.assumptions_ok = false;
    out.note += out.note.empty() ? "" : "; ";
    out.note += "lambda_bar > alpha_min / (2 E|alpha|)";
  }
  out.admissible = out.assumptions_ok && r < out.C_max * out.lambda_bar &&
                   model.M_eps / Ma < out.noise_threshold;
  return out;
}

struct BatchObjective {
  Vec values;        // f_x(D) per column
  int closed_form = 0;  // columns settled by the KKT check on the hint
  int solver = 0;       // columns that needed coordinate descent
};

// f_x(D) for every column. When a sign hint is given the closed form is
// tried first and accepted only if it satisfies the Lasso KKT conditions,
// so the value is exact either way.
inline BatchObjective objective_values(
    const Mat& X, const Dictionary& D, double lambda,
    const Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic>* hints =
        nullptr,
    const LassoOptions& opt = {}, Mat* codes = nullptr) {
  const int n = static_cast<int>(X.cols()), p = D.p();
  if (codes) codes->setZero(p, n);
  Mat G = D.atoms().transpose() * D.atoms();
  Mat C = D.atoms().transpose() * X;
  BatchObjective out;
  out.values.resize(n);
  for (int i = 0; i < n; ++i) {
    const double xx = X.col(i).squaredNorm();
    Vec c = C.col(i);
    Vec warm;
    bool done = false;
    if (hints) {
      Support J;
      for (int j = 0; j < p; ++j)
        if ((*hints)(j, i) != 0) J.push_back(j);
      if (!J.empty()) {
        Vec sJ(J.size());
        for (size_t t = 0; t < J.size(); ++t) sJ[t] = (*hints)(J[t], i);
        Mat GJ = restrict_gram(G, J);
        Eigen::LLT<Mat> llt(GJ);
        if (llt.info() == Eigen::Success) {
          Vec b = rows(c, J) - lambda * sJ;
          Vec aJ = llt.solve(b);
          bool ok = true;
          for (size_t t = 0; t < J.size() && ok; ++t)
            ok = sgn(aJ[t]) == sJ[t];
          warm = Vec::Zero(p);
          for (size_t t = 0; t < J.size(); ++t) warm[J[t]] = aJ[t];
          if (ok) {
            Vec g = c - G * warm;
            ok = g.lpNorm<Eigen::Infinity>() <= lambda * (1.0 + 1e-12);
          }
          if (ok) {
            out.values[i] = 0.5 * (xx - b.dot(aJ));
            if (codes) codes->col(i) = warm;
            ++out.closed_form;
            done = true;
          }
        }
      }
    }
    if (!done) {
      auto lr = lasso_gram(G, c, xx, lambda, opt, warm.size() ? &warm : nullptr);
      out.values[i] = lr.value;
      if (codes) codes->col(i) = lr.alpha;
      ++out.solver;
    }
  }
  return out;
}

inline double objective_F(const SignalBatch& batch, const Dictionary& D,
                          double lambda, const LassoOptions& opt = {}) {
  auto ov = objective_values(batch.X, D, lambda, &batch.signs, opt);
  return ov.values.mean();
}

}  // namespace dlid
