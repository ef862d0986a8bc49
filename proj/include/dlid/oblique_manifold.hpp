#pragma once

#include "dlid/core_model.hpp"

namespace dlid {

struct InfeasibleRadius : std::domain_error {
  using std::domain_error::domain_error;
};

// D2 = D1 diag(cos theta) + W diag(sin theta), w^j orthogonal to d1^j
struct SphereDecomposition {
  Vec theta;
  Mat W;
};

namespace detail {

// first canonical vector not parallel to d, orthogonalized against d
inline Vec canonical_orthogonal(const Eigen::Ref<const Vec>& d) {
  const int m = static_cast<int>(d.size());
  for (int i = 0; i < m; ++i) {
    if (std::abs(d[i]) < 1.0 - 1e-8) {
      Vec e = Vec::Unit(m, i);
      e -= d[i] * d;
      return e / e.norm();
    }
  }
  throw InvalidParameter("no vector orthogonal to atom (m = 1)");
}

}  // namespace detail

inline SphereDecomposition decompose(const Dictionary& D1,
                                     const Dictionary& D2) {
  if (D1.m() != D2.m() || D1.p() != D2.p())
    throw InvalidParameter("decompose: shape mismatch");
  const int m = D1.m(), p = D1.p();
  SphereDecomposition dec;
  dec.theta.resize(p);
  dec.W.resize(m, p);
  const double pi = std::acos(-1.0);
  for (int j = 0; j < p; ++j) {
    Vec d1 = D1.col(j), d2 = D2.col(j);
    double c = d1.dot(d2);
    Vec v = d2 - c * d1;
    v -= d1.dot(v) * d1;
    double s = v.norm();
    if (s <= 1e-14) {
      dec.theta[j] = c >= 0 ? 0.0 : pi;
      dec.W.col(j) = detail::canonical_orthogonal(d1);
    } else {
      // atan2 is the numerically stable form of arccos(<d1,d2>)
      dec.theta[j] = std::atan2(s, c);
      dec.W.col(j) = v / s;
    }
  }
  return dec;
}

inline Mat reconstruct_atoms(const Mat& D1, const Vec& theta, const Mat& W) {
  Mat out(D1.rows(), D1.cols());
  for (Eigen::Index j = 0; j < D1.cols(); ++j)
    out.col(j) = std::cos(theta[j]) * D1.col(j) + std::sin(theta[j]) * W.col(j);
  return out;
}

inline Dictionary reconstruct(const Dictionary& D1,
                              const SphereDecomposition& dec) {
  return Dictionary(reconstruct_atoms(D1.atoms(), dec.theta, dec.W));
}

// unit columns, each orthogonal to the matching atom of D0
inline Mat random_tangent_atoms(const Dictionary& D0, Rng& rng) {
  const int m = D0.m(), p = D0.p();
  if (m < 2) throw InvalidParameter("sphere sampling needs m >= 2");
  std::normal_distribution<double> g;
  Mat W(m, p);
  for (int j = 0; j < p; ++j) {
    Vec d = D0.col(j);
    Vec v(m);
    double s = 0.0;
    do {
      for (int i = 0; i < m; ++i) v[i] = g(rng);
      v -= d.dot(v) * d;
      v -= d.dot(v) * d;
      s = v.norm();
    } while (s < 1e-8);
    W.col(j) = v / s;
  }
  return W;
}

namespace detail {

inline double chord_radius(const Vec& theta) {
  return 2.0 * (0.5 * theta.array()).sin().matrix().norm();
}

inline Vec clamp_angles(const Vec& u, double t) {
  const double pi = std::acos(-1.0);
  return (t * u.array()).min(pi).max(0.0).matrix();
}

}  // namespace detail

// a point of S(D0; r) on the oblique manifold, built from angles so the
// columns stay exactly unit norm
inline Dictionary sample_sphere(const Dictionary& D0, double r, Rng& rng) {
  const int p = D0.p();
  const double rmax = 2.0 * std::sqrt(static_cast<double>(p));
  if (!(r > 0) || r > rmax) throw InfeasibleRadius("radius outside (0, 2 sqrt(p)]");
  const double pi = std::acos(-1.0);
  Mat W = random_tangent_atoms(D0, rng);
  if (r == rmax)  // the antipode -D0
    return Dictionary(reconstruct_atoms(D0.atoms(), Vec::Constant(p, pi), W));
  std::normal_distribution<double> g;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Vec u(p);
    for (int j = 0; j < p; ++j) u[j] = std::abs(g(rng));
    double un = u.norm();
    if (un == 0.0 || u.minCoeff() <= 0.0) continue;
    u /= un;
    double lo = 0.0, hi = pi / u.minCoeff();
    if (detail::chord_radius(detail::clamp_angles(u, hi)) < r) continue;
    // the chord radius is nondecreasing in t
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      double mid = 0.5 * (lo + hi);
      if (detail::chord_radius(detail::clamp_angles(u, mid)) < r)
        lo = mid;
      else
        hi = mid;
    }
    Vec theta = detail::clamp_angles(u, 0.5 * (lo + hi));
    return Dictionary(reconstruct_atoms(D0.atoms(), theta, W));
  }
  throw InfeasibleRadius("sphere sampler failed to find a direction");
}

// a point of S(D0; r) that rotates atom j alone; needs r <= 2
inline Dictionary single_atom_sphere_point(const Dictionary& D0, int j, double r,
                                           Rng& rng) {
  if (!(r > 0) || r > 2.0) throw InfeasibleRadius("single-atom radius outside (0, 2]");
  if (j < 0 || j >= D0.p()) throw InvalidParameter("atom index out of range");
  Mat W = random_tangent_atoms(D0, rng);
  Vec theta = Vec::Zero(D0.p());
  theta[j] = 2.0 * std::asin(0.5 * r);
  return Dictionary(reconstruct_atoms(D0.atoms(), theta, W));
}

}  // namespace dlid
