#pragma once

#include "dlid/core_model.hpp"

#include <json.hpp>

#include <functional>
#include <limits>

namespace dlid {

struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double binomial(int p, int k) {
  if (k < 0 || k > p) return 0.0;
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (p - k + i) / i;
  return std::round(c);
}

// visits every sorted k-subset of {0..p-1} in lexicographic order
inline void for_each_support(int p, int k,
                             const std::function<void(const Support&)>& fn) {
  if (k < 1 || k > p) return;
  Support J(k);
  std::iota(J.begin(), J.end(), 0);
  while (true) {
    fn(J);
    int i = k - 1;
    while (i >= 0 && J[i] == p - k + i) --i;
    if (i < 0) return;
    ++J[i];
    for (int t = i + 1; t < k; ++t) J[t] = J[t - 1] + 1;
  }
}

inline Mat restrict_gram(const Mat& G, const Support& J) {
  const int k = static_cast<int>(J.size());
  Mat g(k, k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) g(a, b) = G(J[a], J[b]);
  return g;
}

inline double plain_coherence(const Dictionary& D) {
  if (D.p() == 1) return 0.0;
  Mat G = (D.atoms().transpose() * D.atoms()).cwiseAbs();
  G.diagonal().setZero();
  return G.maxCoeff();
}

// max over j of the sum of the k largest |<d_i, d_j>|, i != j
inline double cumulative_coherence(const Dictionary& D, int k) {
  const int p = D.p();
  if (k < 1 || k >= p)
    throw InvalidParameter("cumulative_coherence requires 1 <= k <= p-1");
  Mat G = (D.atoms().transpose() * D.atoms()).cwiseAbs();
  double best = 0.0;
  std::vector<double> c;
  c.reserve(p);
  for (int j = 0; j < p; ++j) {
    c.clear();
    for (int i = 0; i < p; ++i)
      if (i != j) c.push_back(G(i, j));
    std::nth_element(c.begin(), c.begin() + (k - 1), c.end(),
                     std::greater<>());
    double s = 0.0;
    for (int t = 0; t < k; ++t) s += c[t];
    best = std::max(best, s);
  }
  return best;
}

// debug path: the defining sup over (J, j not in J)
inline double cumulative_coherence_enumerated(const Dictionary& D, int k) {
  const int p = D.p();
  if (k < 1 || k >= p)
    throw InvalidParameter("cumulative_coherence requires 1 <= k <= p-1");
  Mat G = (D.atoms().transpose() * D.atoms()).cwiseAbs();
  double best = 0.0;
  for_each_support(p, k, [&](const Support& J) {
    for (int j = 0; j < p; ++j) {
      if (std::find(J.begin(), J.end(), j) != J.end()) continue;
      double s = 0.0;
      for (int i : J) s += G(i, j);
      best = std::max(best, s);
    }
  });
  return best;
}

enum class RipMode { Exact, CoherenceBound };

struct RipConstants {
  double lower = 0.0;  // 1 - min_J lambda_min
  double upper = 0.0;  // max_J lambda_max - 1
  bool exact = false;
};

inline RipConstants rip_constants(const Dictionary& D, int k,
                                  RipMode mode = RipMode::Exact,
                                  double budget = 1e6) {
  const int p = D.p();
  if (k < 1 || k > p) throw InvalidParameter("rip_constants requires 1 <= k <= p");
  RipConstants rc;
  if (mode == RipMode::CoherenceBound) {
    double mu = k == 1 ? 0.0 : cumulative_coherence(D, std::min(k - 1, p - 1));
    rc.lower = rc.upper = mu;
    return rc;
  }
  if (binomial(p, k) > budget)
    throw BudgetExceeded("C(p,k) exceeds the enumeration budget; use the "
                         "coherence bound mode");
  Mat G = D.atoms().transpose() * D.atoms();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Mat> es;
  for_each_support(p, k, [&](const Support& J) {
    es.compute(restrict_gram(G, J), Eigen::EigenvaluesOnly);
    lo = std::min(lo, es.eigenvalues()[0]);
    hi = std::max(hi, es.eigenvalues()[k - 1]);
  });
  rc.lower = std::max(0.0, 1.0 - lo);
  rc.upper = std::max(0.0, hi - 1.0);
  rc.exact = true;
  return rc;
}

// exact when affordable, otherwise the mu_{k-1} bound
inline RipConstants rip_constants_auto(const Dictionary& D, int k,
                                       double budget = 1e6) {
  if (binomial(D.p(), k) <= budget) return rip_constants(D, k, RipMode::Exact);
  return rip_constants(D, k, RipMode::CoherenceBound);
}

struct SpectralProfile {
  double op_norm = 0.0;
  double gram_residual = 0.0;
  double frame_lower = 0.0;
};

inline SpectralProfile spectral_profile(const Dictionary& D) {
  const Mat& d = D.atoms();
  SpectralProfile sp;
  Mat G = d.transpose() * d;
  sp.gram_residual = (G - Mat::Identity(D.p(), D.p())).norm();
  if (D.m() <= D.p()) {
    Eigen::SelfAdjointEigenSolver<Mat> es(d * d.transpose(),
                                          Eigen::EigenvaluesOnly);
    sp.frame_lower = std::max(0.0, es.eigenvalues()[0]);
    sp.op_norm = std::sqrt(std::max(0.0, es.eigenvalues()[D.m() - 1]));
  } else {
    Eigen::SelfAdjointEigenSolver<Mat> es(G, Eigen::EigenvaluesOnly);
    sp.op_norm = std::sqrt(std::max(0.0, es.eigenvalues()[D.p() - 1]));
    sp.frame_lower = 0.0;  // rank < m
  }
  if (sp.frame_lower < 1e-10) sp.frame_lower = 0.0;
  return sp;
}

// any D with unit columns and ||D - D0||_F <= r has mu_k(D) below this
inline double coherence_transfer_bound(double mu_k0, double mu_km1_0, int k,
                                       double r) {
  return mu_k0 + std::sqrt(static_cast<double>(k)) * r * (2.0 + mu_km1_0);
}

struct DictionaryProfile {
  double mu_1 = 0.0;
  double mu_k = 0.0;
  RipConstants rip;
  double op_norm = 0.0;
  double gram_residual = 0.0;
  double frame_lower = 0.0;
  int k = 0;
};

inline DictionaryProfile dictionary_profile(const Dictionary& D, int k,
                                            double budget = 1e6) {
  DictionaryProfile pr;
  pr.k = k;
  pr.mu_1 = plain_coherence(D);
  pr.mu_k = k < D.p() ? cumulative_coherence(D, k) : std::numeric_limits<double>::infinity();
  pr.rip = rip_constants_auto(D, k, budget);
  auto sp = spectral_profile(D);
  pr.op_norm = sp.op_norm;
  pr.gram_residual = sp.gram_residual;
  pr.frame_lower = sp.frame_lower;
  return pr;
}

inline nlohmann::json to_json(const DictionaryProfile& pr) {
  return {{"k", pr.k},
          {"mu_1", pr.mu_1},
          {"mu_k", pr.mu_k},
          {"delta_lower_k", {{"value", pr.rip.lower}, {"exact", pr.rip.exact}}},
          {"delta_upper_k", {{"value", pr.rip.upper}, {"exact", pr.rip.exact}}},
          {"op_norm", pr.op_norm},
          {"gram_residual", pr.gram_residual},
          {"frame_lower", pr.frame_lower}};
}

}  // namespace dlid
