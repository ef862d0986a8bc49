#pragma once

#include "dlid/core_model.hpp"
#include "dlid/dictionary_analysis.hpp"
#include "dlid/phi_analysis.hpp"

#include <json.hpp>

namespace dlid {

struct Condition {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  std::string relation;  // "<=", "<" or ">"
  bool satisfied = false;
};

inline Condition make_condition(std::string name, double lhs,
                                std::string rel, double rhs) {
  Condition c{std::move(name), lhs, rhs, std::move(rel), false};
  if (c.relation == "<=") c.satisfied = lhs <= rhs;
  else if (c.relation == "<") c.satisfied = lhs < rhs;
  else if (c.relation == ">") c.satisfied = lhs > rhs;
  else throw InvalidParameter("unknown relation " + c.relation);
  return c;
}

struct TheoremReport {
  // instance
  int m = 0, p = 0, k = 0;
  double lambda = 0.0, lambda_bar = 0.0;
  double mu_k = 0.0, op_norm = 0.0, gram_residual = 0.0, frame_lower = 0.0;
  double delta_lower_k = 0.0, delta_upper_k = 0.0;
  bool rip_exact = false;
  double E_alpha2 = 0.0, E_abs_alpha = 0.0, kappa = 0.0;
  double M_alpha = 0.0, M_eps = 0.0, alpha_min = 0.0;
  // Theorem 1
  std::vector<Condition> conditions;
  double C_min = 0.0, C_max = 0.0;
  double r_lo = 0.0, r_hi = 0.0;
  bool interval_nonempty = false;
  std::vector<std::string> notes;

  bool all_satisfied() const {
    for (auto& c : conditions)
      if (!c.satisfied) return false;
    return true;
  }

  // admissible M_eps / M_alpha at radius r
  double noise_threshold(double r) const {
    return 3.5 * (C_max * lambda_bar - r);
  }
};

inline TheoremReport asymptotic_report(const Dictionary& D0,
                                       const CoefficientModel& model,
                                       double lambda) {
  model.validate();
  if (model.p != D0.p()) throw InvalidParameter("model.p does not match D0");
  TheoremReport R;
  R.m = D0.m();
  R.p = D0.p();
  R.k = model.k;
  R.lambda = lambda;
  R.E_alpha2 = model.E_alpha2();
  R.E_abs_alpha = model.E_abs_alpha();
  R.kappa = model.kappa();
  R.M_alpha = model.M_alpha();
  R.M_eps = model.M_eps;
  R.alpha_min = model.alpha_min;
  R.lambda_bar = lambda / R.E_abs_alpha;

  auto sp = spectral_profile(D0);
  R.op_norm = sp.op_norm;
  R.gram_residual = sp.gram_residual;
  R.frame_lower = sp.frame_lower;
  R.mu_k = R.k < R.p ? cumulative_coherence(D0, R.k) : 0.0;
  auto rc = rip_constants_auto(D0, R.k);
  R.delta_lower_k = rc.lower;
  R.delta_upper_k = rc.upper;
  R.rip_exact = rc.exact;

  const double kp = static_cast<double>(R.k) / R.p;
  const double B1 = R.op_norm + 1.0;
  R.C_min = C_min_constant(R.kappa, R.op_norm, R.k, R.p, R.gram_residual);
  R.C_max = (2.0 / 7.0) * (R.E_abs_alpha / R.M_alpha) * (1.0 - 2.0 * R.mu_k);

  R.conditions.push_back(make_condition("coherence", R.mu_k, "<=", 0.25));
  R.conditions.push_back(
      make_condition("sparsity", R.k, "<=", R.p / (16.0 * B1 * B1)));
  R.conditions.push_back(make_condition(
      "flatness", R.E_alpha2 / (R.M_alpha * R.E_abs_alpha), ">",
      84.0 * B1 * kp * R.gram_residual / (1.0 - 2.0 * R.mu_k)));
  R.conditions.push_back(
      make_condition("penalty", lambda, "<=", R.alpha_min / 4.0));
  R.conditions.push_back(make_condition("noise", R.M_eps / R.M_alpha, "<",
                                        3.5 * (R.C_max - R.C_min) * R.lambda_bar));

  R.r_lo = R.C_min * R.lambda_bar;
  R.r_hi = R.C_max * R.lambda_bar;
  R.interval_nonempty = R.all_satisfied() && R.r_lo < R.r_hi;
  if (!rc.exact)
    R.notes.push_back("RIP constants of D0 replaced by the mu_{k-1} bound");
  R.notes.push_back(
      "finite-sample constants use the explicit eta_n route; the unspecified "
      "constants of the headline statement are not guessed");
  return R;
}

struct SampleComplexity {
  double n_in = 0.0;          // with L + M_alpha^2 r bounded as in the proof
  double n_in_explicit = 0.0; // with L evaluated directly
  double L_plus_bound = 0.0;
  double L_explicit = 0.0;
};

inline double sample_size_formula(int m, int p, int k, double E_alpha2,
                                  double beta, double r, double r_lo,
                                  double x) {
  const double pi = std::acos(-1.0);
  double a = std::sqrt(2.0 * x) + 12.0 * std::sqrt(pi * m * p);
  double b = 16.0 / E_alpha2 * (static_cast<double>(p) / k) * beta / (r - r_lo);
  return std::ceil(a * a * b * b);
}

inline SampleComplexity finite_sample_n(const TheoremReport& R, double r,
                                        double x) {
  if (!(r > R.r_lo && r < R.r_hi))
    throw InvalidParameter("radius outside (C_min lambda_bar, C_max lambda_bar)");
  SampleComplexity out;
  const double e = R.M_eps / R.M_alpha;
  const double s = e + R.lambda_bar;
  out.L_plus_bound =
      std::sqrt(20.0) * R.M_alpha * R.M_alpha * (r + e + R.lambda_bar + s * s);
  out.n_in = sample_size_formula(R.m, R.p, R.k, R.E_alpha2, out.L_plus_bound,
                                 r, R.r_lo, x);
  auto dc = deviation_constants_from(R.delta_lower_k, R.delta_upper_k, R.m,
                                     R.p, R.k, R.M_alpha, R.M_eps, R.lambda, r,
                                     1.0, x);
  out.L_explicit = dc.L;
  out.n_in_explicit = sample_size_formula(
      R.m, R.p, R.k, R.E_alpha2, dc.L + R.M_alpha * R.M_alpha * r, r, R.r_lo, x);
  return out;
}

// Proposition 3 lower bound on the expected objective gap at radius r
inline double delta_f_lower(const TheoremReport& R, double r) {
  double r_min = (2.0 / 3.0) * R.C_min * R.lambda_bar * (1.0 + 2.0 * R.lambda_bar);
  return R.E_alpha2 / 8.0 * (static_cast<double>(R.k) / R.p) * r * (r - r_min);
}

struct OutlierThresholds {
  double delta_f = 0.0;
  double eta = 0.0;
  double naive = 0.0;          // max ||X_out||_F^2
  double refined = 0.0;        // max ||X_out||_{1,2}
  bool refined_available = false;
  bool zero_budget = false;
  std::string diagnostic;
};

inline OutlierThresholds outlier_thresholds(const TheoremReport& R, double r,
                                            double x, double n_in,
                                            double A0) {
  OutlierThresholds out;
  out.delta_f = delta_f_lower(R, r);
  out.eta = deviation_constants_from(R.delta_lower_k, R.delta_upper_k, R.m,
                                     R.p, R.k, R.M_alpha, R.M_eps, R.lambda, r,
                                     n_in, x)
                .eta;
  double budget = out.delta_f - 2.0 * out.eta;
  if (budget <= 0) {
    out.zero_budget = true;
    out.diagnostic = "Delta f_P(r) <= 2 eta_n: no outlier budget at this n_in";
    budget = 0.0;
  }
  out.naive = 2.0 * n_in * budget;
  const double lim = std::min(std::sqrt(std::max(A0, 0.0)) / 2.0,
                              std::sqrt(1.0 - R.delta_lower_k));
  out.refined_available = A0 > 0 && r <= lim;
  if (out.refined_available) {
    double denom = R.E_abs_alpha * 18.0 * std::pow(R.p, 1.5) /
                   std::sqrt(static_cast<double>(R.k)) * r * R.lambda_bar /
                   std::pow(A0, 1.5);
    out.refined = n_in * budget / denom;
  } else {
    out.diagnostic += out.diagnostic.empty() ? "" : "; ";
    out.diagnostic += A0 > 0 ? "refined bound needs r <= min(sqrt(A0)/2, "
                               "sqrt(1 - delta_k))"
                             : "refined bound needs a complete D0 (A0 > 0)";
  }
  return out;
}

inline nlohmann::json to_json(const TheoremReport& R) {
  nlohmann::json conds = nlohmann::json::array();
  for (auto& c : R.conditions)
    conds.push_back({{"name", c.name},
                     {"lhs", c.lhs},
                     {"relation", c.relation},
                     {"rhs", c.rhs},
                     {"satisfied", c.satisfied}});
  return {{"instance",
           {{"m", R.m}, {"p", R.p}, {"k", R.k}, {"lambda", R.lambda},
            {"lambda_bar", R.lambda_bar}}},
          {"dictionary",
           {{"mu_k", R.mu_k}, {"op_norm", R.op_norm},
            {"gram_residual", R.gram_residual}, {"frame_lower", R.frame_lower},
            {"delta_lower_k", R.delta_lower_k},
            {"delta_upper_k", R.delta_upper_k}, {"rip_exact", R.rip_exact}}},
          {"model",
           {{"E_alpha2", R.E_alpha2}, {"E_abs_alpha", R.E_abs_alpha},
            {"kappa", R.kappa}, {"M_alpha", R.M_alpha}, {"M_eps", R.M_eps},
            {"alpha_min", R.alpha_min}}},
          {"conditions", conds},
          {"constants",
           {{"C_min", R.C_min}, {"C_max", R.C_max},
            {"radius_interval", {R.r_lo, R.r_hi}},
            {"interval_nonempty", R.interval_nonempty}}},
          {"notes", R.notes}};
}

inline nlohmann::json to_json(const SampleComplexity& s) {
  return {{"n_in", s.n_in}, {"n_in_explicit_L", s.n_in_explicit},
          {"L_plus_bound", s.L_plus_bound}, {"L_explicit", s.L_explicit}};
}

inline nlohmann::json to_json(const OutlierThresholds& o) {
  return {{"delta_f_lower", o.delta_f}, {"eta_n", o.eta},
          {"naive_frob2", o.naive}, {"refined_norm12", o.refined},
          {"refined_available", o.refined_available},
          {"zero_budget", o.zero_budget}, {"diagnostic", o.diagnostic}};
}

}  // namespace dlid
