#pragma once

#include "dlid/core_model.hpp"
#include "dlid/dictionary_analysis.hpp"
#include "dlid/oblique_manifold.hpp"
#include "dlid/sparse_solver.hpp"

namespace dlid {

struct DeltaPhiTerms {
  double t_aa = 0, t_ae = 0, t_ee = 0, t_sa = 0, t_se = 0, t_ss = 0;
  double sum() const { return t_aa + t_ae + t_ee + t_sa + t_se + t_ss; }
};

namespace detail {

struct Restricted {
  Mat P;      // projector onto span D_J
  Mat pinv;   // D_J^+
  Mat theta;  // (D_J' D_J)^{-1}
};

inline Restricted restricted_ops(const Dictionary& D, const Support& J) {
  Mat DJ = columns(D.atoms(), J);
  Restricted r;
  r.theta = inverse_gram(DJ.transpose() * DJ, J);
  r.pinv = r.theta * DJ.transpose();
  r.P = DJ * r.pinv;
  return r;
}

}  // namespace detail

// phi_x(D|s) - phi_x(D'|s) split into six pieces, x = D0 alpha0 + eps
inline DeltaPhiTerms delta_phi_terms(const Dictionary& D0, const Vec& alpha0,
                                     const Vec& eps, const Vec& s,
                                     const Dictionary& D, const Dictionary& Dp,
                                     double lambda) {
  Support J = support_of(s);
  DeltaPhiTerms t;
  if (J.empty()) return t;
  auto a = detail::restricted_ops(D, J);
  auto b = detail::restricted_ops(Dp, J);
  Vec y = D0.atoms() * alpha0;
  Vec sJ = rows(s, J);
  Mat dP = b.P - a.P;
  Mat dpinv = b.pinv - a.pinv;
  Vec dPy = dP * y;
  t.t_aa = 0.5 * y.dot(dPy);
  t.t_ae = eps.dot(dPy);
  t.t_ee = 0.5 * eps.dot(dP * eps);
  Vec w = dpinv.transpose() * sJ;
  t.t_sa = -lambda * w.dot(y);
  t.t_se = -lambda * w.dot(eps);
  t.t_ss = 0.5 * lambda * lambda * sJ.dot((b.theta - a.theta) * sJ);
  return t;
}

inline double delta_phi_direct(const Vec& x, const Vec& s, const Dictionary& D,
                               const Dictionary& Dp, double lambda) {
  return restricted_minimizer(x, D, s, lambda).phi_value -
         restricted_minimizer(x, Dp, s, lambda).phi_value;
}

// A >= Gram residuals, B >= operator norms, delta >= lower RIP constants,
// valid for both dictionaries of a pair
struct BoundConstants {
  double A = 0.0;
  double B = 0.0;
  double delta_lower = 0.0;
};

inline BoundConstants pair_constants(const Dictionary& D, const Dictionary& D0,
                                     int k) {
  auto s = spectral_profile(D), s0 = spectral_profile(D0);
  BoundConstants c;
  c.A = std::max(s.gram_residual, s0.gram_residual);
  c.B = std::max(s.op_norm, s0.op_norm);
  c.delta_lower = std::max(rip_constants_auto(D, k).lower,
                           rip_constants_auto(D0, k).lower);
  return c;
}

// the instantiation used for the uniform bound: B = B0 + 1,
// A = A0 + 2 B r, delta = 1/2
inline BoundConstants proof_constants(const Dictionary& D0, double r) {
  auto s0 = spectral_profile(D0);
  BoundConstants c;
  c.B = s0.op_norm + 1.0;
  c.A = s0.gram_residual + 2.0 * c.B * r;
  c.delta_lower = 0.5;
  return c;
}

struct Lemma6Bounds {
  double lead_lower = 0.0;
  double bias_sa_abs_upper = 0.0;
  double bias_ss_abs_upper = 0.0;
};

inline Lemma6Bounds lemma6_bounds(int k, int p, double theta_norm,
                                  const BoundConstants& c) {
  const double kp = static_cast<double>(k) / p;
  const double om = 1.0 - c.delta_lower;
  Lemma6Bounds b;
  b.lead_lower = kp * theta_norm * theta_norm * (1.0 - kp * c.B * c.B / om);
  b.bias_sa_abs_upper = kp * theta_norm * theta_norm / 2.0 +
                        kp * kp * c.A * c.B / om * theta_norm;
  b.bias_ss_abs_upper = kp * kp * 4.0 * c.A * c.B / (om * om) * theta_norm;
  return b;
}

enum class TraceMode { Exact, MonteCarlo, Auto };

struct ExpectationTraces {
  double lead = 0.0;     // E_J Tr[D0_J'(I - P_J) D0_J]
  double bias_sa = 0.0;  // E_J Tr(I - D_J^+ D0_J)
  double bias_ss = 0.0;  // E_J Tr(Theta0_J - Theta_J)
  bool exact = true;
  long supports = 0;
  double se_lead = 0.0, se_sa = 0.0, se_ss = 0.0;
  double theta_norm = 0.0;
  Lemma6Bounds bounds;
};

inline ExpectationTraces expectation_traces(
    const Dictionary& D, const Dictionary& D0, int k,
    TraceMode mode = TraceMode::Auto, long n_J = 20000,
    std::uint64_t seed = 0, const BoundConstants* constants = nullptr,
    double budget = 1e5) {
  const int p = D.p();
  if (mode == TraceMode::Auto)
    mode = binomial(p, k) <= budget ? TraceMode::Exact : TraceMode::MonteCarlo;
  if (mode == TraceMode::Exact && binomial(p, k) > budget)
    throw BudgetExceeded("C(p,k) exceeds the enumeration budget; use Monte Carlo");
  Mat G = D.atoms().transpose() * D.atoms();
  Mat G0 = D0.atoms().transpose() * D0.atoms();
  Mat K = D.atoms().transpose() * D0.atoms();

  ExpectationTraces out;
  long double s1 = 0, s2 = 0, s3 = 0, q1 = 0, q2 = 0, q3 = 0;
  long count = 0;
  auto visit = [&](const Support& J) {
    Mat th = inverse_gram(restrict_gram(G, J), J);
    Mat th0 = inverse_gram(restrict_gram(G0, J), J);
    Mat KJ = restrict_gram(K, J);
    Mat TK = th * KJ;
    double lead = restrict_gram(G0, J).trace() - (KJ.transpose() * TK).trace();
    double sa = static_cast<double>(k) - TK.trace();
    double ss = th0.trace() - th.trace();
    s1 += lead; s2 += sa; s3 += ss;
    q1 += static_cast<long double>(lead) * lead;
    q2 += static_cast<long double>(sa) * sa;
    q3 += static_cast<long double>(ss) * ss;
    ++count;
  };
  if (mode == TraceMode::Exact) {
    for_each_support(p, k, visit);
    out.exact = true;
  } else {
    Rng rng = substream(seed, 0x74726163ULL);
    for (long t = 0; t < n_J; ++t) visit(draw_support(p, k, rng));
    out.exact = false;
  }
  out.supports = count;
  out.lead = static_cast<double>(s1 / count);
  out.bias_sa = static_cast<double>(s2 / count);
  out.bias_ss = static_cast<double>(s3 / count);
  if (!out.exact && count > 1) {
    auto se = [&](long double s, long double q) {
      long double mean = s / count;
      long double var = (q - count * mean * mean) / (count - 1);
      return static_cast<double>(std::sqrt(std::max<long double>(0, var) / count));
    };
    out.se_lead = se(s1, q1);
    out.se_sa = se(s2, q2);
    out.se_ss = se(s3, q3);
  }
  out.theta_norm = decompose(D0, D).theta.norm();
  BoundConstants c = constants ? *constants : pair_constants(D, D0, k);
  out.bounds = lemma6_bounds(k, p, out.theta_norm, c);
  return out;
}

inline double expected_delta_phi(const ExpectationTraces& tr,
                                 const CoefficientModel& model,
                                 double lambda) {
  return 0.5 * model.E_alpha2() * tr.lead -
         lambda * model.E_abs_alpha() * tr.bias_sa +
         0.5 * lambda * lambda * tr.bias_ss;
}

// E[phi_x(D|s) - phi_x(D0|s)]; the noise cross terms average out
inline double expected_delta_phi(const Dictionary& D, const Dictionary& D0,
                                 const CoefficientModel& model,
                                 double lambda) {
  return expected_delta_phi(expectation_traces(D, D0, model.k), model, lambda);
}

struct FixedPairBound {
  double bound = 0.0;
  double r0 = 0.0;
  bool assumptions_ok = false;
};

inline FixedPairBound lower_bound_fixed_pair(const Dictionary& D,
                                             const Dictionary& D0,
                                             const CoefficientModel& model,
                                             double lambda_bar,
                                             const BoundConstants* constants =
                                                 nullptr) {
  BoundConstants c = constants ? *constants : pair_constants(D, D0, model.k);
  const double kp = static_cast<double>(model.k) / D.p();
  const double k2 = model.kappa() * model.kappa();
  const double om = 1.0 - c.delta_lower;
  FixedPairBound out;
  out.assumptions_ok = kp * c.B * c.B / om + lambda_bar * k2 <= 0.5;
  out.r0 = (1.0 + 2.0 * lambda_bar) * lambda_bar * k2 * kp * 2.0 * c.A * c.B /
           (om * om);
  double fro = (D.atoms() - D0.atoms()).norm();
  out.bound = 0.25 * model.E_alpha2() * kp * fro * (fro - out.r0);
  return out;
}

inline double C_min_constant(double kappa, double op_norm0, int k, int p,
                             double gram_residual0) {
  return 24.0 * kappa * kappa * (op_norm0 + 1.0) *
         (static_cast<double>(k) / p) * gram_residual0;
}

struct UniformBound {
  double bound = 0.0;
  double r_min = 0.0;
  double C_min = 0.0;
  bool valid = false;
  bool positive_for_admissible_r = false;  // lambda_bar < 3 / (20 C_min)
  std::string note;
};

inline UniformBound uniform_lower_bound(const Dictionary& D0,
                                        const CoefficientModel& model,
                                        double lambda_bar, double r) {
  auto sp = spectral_profile(D0);
  const int k = model.k, p = D0.p();
  UniformBound out;
  out.C_min = C_min_constant(model.kappa(), sp.op_norm, k, p, sp.gram_residual);
  out.r_min = (2.0 / 3.0) * out.C_min * lambda_bar * (1.0 + 2.0 * lambda_bar);
  out.bound = model.E_alpha2() / 8.0 * (static_cast<double>(k) / p) * r *
              (r - out.r_min);
  double dl = rip_constants_auto(D0, k).lower;
  double kmax = p / (16.0 * (sp.op_norm + 1.0) * (sp.op_norm + 1.0));
  out.valid = true;
  auto fail = [&](const std::string& why) {
    out.valid = false;
    out.note += (out.note.empty() ? "" : "; ") + why;
  };
  if (!(lambda_bar <= 0.25)) fail("lambda_bar > 1/4");
  if (!(r <= 0.15)) fail("r > 0.15");
  if (!(dl <= 0.25)) fail("delta_k(D0) > 1/4");
  if (!(k <= kmax)) fail("k > p / (16 (|||D0||| + 1)^2)");
  out.positive_for_admissible_r =
      out.C_min == 0.0 || lambda_bar < 3.0 / (20.0 * out.C_min);
  return out;
}

struct DeviationConstants {
  double L = 0.0;
  double eta = 0.0;
};

inline DeviationConstants deviation_constants_from(double delta_lower_k0,
                                                   double delta_upper_k0,
                                                   int m, int p, int k,
                                                   double M_alpha, double M_eps,
                                                   double lambda, double r,
                                                   double n, double x) {
  const double sq = std::sqrt(1.0 - delta_lower_k0) - r;
  if (!(sq > 0))
    throw InfeasibleRadius("deviation constants need r < sqrt(1 - delta_k(D0))");
  const double lk = lambda * std::sqrt(static_cast<double>(k)) / sq;
  DeviationConstants out;
  out.L = (1.0 / sq) * (M_eps + lk) *
          (2.0 * std::sqrt(1.0 + delta_upper_k0) * M_alpha + M_eps + lk);
  const double pi = std::acos(-1.0);
  out.eta = r * (out.L + M_alpha * M_alpha * r) *
            (std::sqrt(2.0 * x / n) + 12.0 * std::sqrt(pi * m * p / n));
  return out;
}

inline DeviationConstants deviation_constants(const Dictionary& D0,
                                              const CoefficientModel& model,
                                              double lambda, double r,
                                              double n, double x) {
  auto rc = rip_constants_auto(D0, model.k);
  return deviation_constants_from(rc.lower, rc.upper, D0.m(), D0.p(), model.k,
                                  model.M_alpha(), model.M_eps, lambda, r, n,
                                  x);
}

}  // namespace dlid
