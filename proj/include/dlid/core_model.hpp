#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace dlid {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Support = std::vector<int>;
using Rng = std::mt19937_64;

struct InvalidParameter : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// splitmix64 finalizer, used to derive independent substream seeds
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// (seed, index) -> generator; the mapping does not depend on thread count
inline Rng substream(std::uint64_t seed, std::uint64_t index) {
  return Rng(mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL)));
}

inline double sgn(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

// m x p matrix with unit-norm columns
class Dictionary {
public:
  static constexpr double kUnitTol = 1e-12;

  Dictionary() = default;
  explicit Dictionary(Mat atoms) : d_(std::move(atoms)) {
    if (d_.rows() < 1 || d_.cols() < 1)
      throw InvalidParameter("dictionary must be non-empty");
    for (Eigen::Index j = 0; j < d_.cols(); ++j) {
      if (std::abs(d_.col(j).norm() - 1.0) > kUnitTol)
        throw InvalidParameter("dictionary column " + std::to_string(j) +
                               " is not unit norm");
    }
  }

  static Dictionary normalized(Mat atoms) {
    for (Eigen::Index j = 0; j < atoms.cols(); ++j) {
      double nrm = atoms.col(j).norm();
      if (nrm == 0.0)
        throw InvalidParameter("cannot normalize a zero column");
      atoms.col(j) /= nrm;
    }
    return Dictionary(std::move(atoms));
  }

  const Mat& atoms() const { return d_; }
  int m() const { return static_cast<int>(d_.rows()); }
  int p() const { return static_cast<int>(d_.cols()); }
  auto col(int j) const { return d_.col(j); }

private:
  Mat d_;
};

inline Dictionary orthonormal_dictionary(int m) {
  return Dictionary(Mat::Identity(m, m));
}

// orthonormal DCT-II basis, columns are atoms
inline Mat dct_basis(int m) {
  Mat c(m, m);
  const double pi = std::acos(-1.0);
  for (int j = 0; j < m; ++j) {
    double scale = j == 0 ? std::sqrt(1.0 / m) : std::sqrt(2.0 / m);
    for (int i = 0; i < m; ++i)
      c(i, j) = scale * std::cos(pi * (2 * i + 1) * j / (2.0 * m));
  }
  return c;
}

// [I, DCT]: a maximally incoherent pair of orthonormal bases, p = 2m
inline Dictionary dirac_dct_dictionary(int m) {
  Mat d(m, 2 * m);
  d.leftCols(m).setIdentity();
  d.rightCols(m) = dct_basis(m);
  return Dictionary::normalized(std::move(d));
}

// normalized Gaussian columns
inline Dictionary spherical_dictionary(int m, int p, Rng& rng) {
  std::normal_distribution<double> g;
  Mat d(m, p);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < m; ++i)
      d(i, j) = g(rng);
  return Dictionary::normalized(std::move(d));
}

enum class Law { SignedUniform, FixedProfile };
enum class NoiseKind { None, TruncatedGaussian };

struct CoefficientModel {
  int p = 0;
  int k = 0;
  Law law = Law::SignedUniform;
  double alpha_min = 1.0;
  double alpha_max = 1.0;  // SignedUniform only
  Vec profile;             // FixedProfile only, length k
  NoiseKind noise = NoiseKind::None;
  double sigma = 0.0;
  double M_eps = 0.0;

  static CoefficientModel signed_uniform(int p, int k, double a_min,
                                         double a_max) {
    CoefficientModel c;
    c.p = p;
    c.k = k;
    c.law = Law::SignedUniform;
    c.alpha_min = a_min;
    c.alpha_max = a_max;
    c.validate();
    return c;
  }

  static CoefficientModel fixed_profile(int p, Vec a) {
    CoefficientModel c;
    c.p = p;
    c.k = static_cast<int>(a.size());
    c.law = Law::FixedProfile;
    c.alpha_min = a.size() ? a.minCoeff() : 0.0;
    c.alpha_max = a.size() ? a.maxCoeff() : 0.0;
    c.profile = std::move(a);
    c.validate();
    return c;
  }

  CoefficientModel& with_noise(double s, double bound) {
    noise = bound > 0 ? NoiseKind::TruncatedGaussian : NoiseKind::None;
    sigma = s;
    M_eps = bound;
    validate();
    return *this;
  }

  void validate() const {
    if (k < 1 || k > p) throw InvalidParameter("model requires 1 <= k <= p");
    if (!(alpha_min > 0)) throw InvalidParameter("alpha_min must be positive");
    if (law == Law::SignedUniform && alpha_max < alpha_min)
      throw InvalidParameter("alpha_max < alpha_min");
    if (law == Law::FixedProfile) {
      if (profile.size() != k) throw InvalidParameter("profile length != k");
      if ((profile.array() < alpha_min).any())
        throw InvalidParameter("profile entry below alpha_min");
    }
    if (noise == NoiseKind::TruncatedGaussian && !(sigma > 0 && M_eps > 0))
      throw InvalidParameter("truncated Gaussian noise needs sigma, M_eps > 0");
    if (M_eps < 0) throw InvalidParameter("M_eps must be nonnegative");
  }

  // almost-sure bound on ||alpha||_2
  double M_alpha() const {
    if (law == Law::FixedProfile) return profile.norm();
    return std::sqrt(static_cast<double>(k)) * alpha_max;
  }

  double E_alpha2() const {
    if (law == Law::FixedProfile) return profile.squaredNorm() / k;
    double a = alpha_min, b = alpha_max;
    if (b == a) return a * a;
    return (b * b * b - a * a * a) / (3.0 * (b - a));
  }

  double E_abs_alpha() const {
    if (law == Law::FixedProfile) return profile.lpNorm<1>() / k;
    return 0.5 * (alpha_min + alpha_max);
  }

  double kappa() const { return E_abs_alpha() / std::sqrt(E_alpha2()); }
};

struct SignalBatch {
  Mat X;       // m x n
  Mat A;       // p x n ground truth, zero on outlier columns
  Mat E;       // m x n noise, zero on outlier columns
  std::vector<Support> supports;
  Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic> signs;
  std::vector<char> inlier;
  int n_in = 0;
  int n_out = 0;
  std::uint64_t seed = 0;

  int n() const { return static_cast<int>(X.cols()); }

  Vec sign_vector(int i) const { return signs.col(i).cast<double>(); }

  double outlier_frob2() const {
    double s = 0;
    for (int i = 0; i < n(); ++i)
      if (!inlier[i]) s += X.col(i).squaredNorm();
    return s;
  }

  double outlier_norm12() const {
    double s = 0;
    for (int i = 0; i < n(); ++i)
      if (!inlier[i]) s += X.col(i).norm();
    return s;
  }
};

inline Support draw_support(int p, int k, Rng& rng) {
  if (k < 1 || k > p)
    throw InvalidParameter("draw_support requires 1 <= k <= p");
  std::vector<int> all(p);
  std::iota(all.begin(), all.end(), 0);
  Support out;
  out.reserve(k);
  // selection sampling keeps the population order, so out is sorted
  std::sample(all.begin(), all.end(), std::back_inserter(out), k, rng);
  return out;
}

inline Vec draw_coefficients(const CoefficientModel& model,
                             const Support& support, Rng& rng) {
  if (static_cast<int>(support.size()) != model.k)
    throw InvalidParameter("support size does not match model.k");
  Vec a = Vec::Zero(model.p);
  std::bernoulli_distribution coin(0.5);
  if (model.law == Law::SignedUniform) {
    std::uniform_real_distribution<double> mag(model.alpha_min,
                                               model.alpha_max);
    for (int j : support) {
      double s = coin(rng) ? 1.0 : -1.0;
      a[j] = s * mag(rng);
    }
  } else {
    std::vector<double> prof(model.profile.data(),
                             model.profile.data() + model.k);
    std::shuffle(prof.begin(), prof.end(), rng);
    for (int t = 0; t < model.k; ++t) {
      double s = coin(rng) ? 1.0 : -1.0;
      a[support[t]] = s * prof[t];
    }
  }
  return a;
}

inline Vec draw_noise(const CoefficientModel& model, int m, Rng& rng) {
  Vec e = Vec::Zero(m);
  if (model.noise == NoiseKind::None) return e;
  std::normal_distribution<double> g(0.0, model.sigma);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    for (int i = 0; i < m; ++i) e[i] = g(rng);
    if (e.norm() <= model.M_eps) return e;
  }
  throw InvalidParameter("noise sigma too large for M_eps: rejection sampling stalled");
}

inline SignalBatch generate_batch(const Dictionary& D0,
                                  const CoefficientModel& model, int n,
                                  std::uint64_t seed) {
  model.validate();
  if (model.p != D0.p())
    throw InvalidParameter("model.p does not match dictionary");
  if (n < 0) throw InvalidParameter("negative batch size");
  const int m = D0.m(), p = D0.p();
  SignalBatch b;
  b.seed = seed;
  b.X.resize(m, n);
  b.A.resize(p, n);
  b.E.resize(m, n);
  b.signs.setZero(p, n);
  b.supports.resize(n);
  b.inlier.assign(n, 1);
  b.n_in = n;
  for (int i = 0; i < n; ++i) {
    Rng rng = substream(seed, static_cast<std::uint64_t>(i));
    b.supports[i] = draw_support(p, model.k, rng);
    b.A.col(i) = draw_coefficients(model, b.supports[i], rng);
    b.E.col(i) = draw_noise(model, m, rng);
    for (int j : b.supports[i])
      b.signs(j, i) = static_cast<std::int8_t>(sgn(b.A(j, i)));
  }
  b.X.noalias() = D0.atoms() * b.A;
  b.X += b.E;
  return b;
}

inline void append_outliers(SignalBatch& b, const Mat& Xout) {
  const int n0 = b.n(), add = static_cast<int>(Xout.cols());
  const int m = static_cast<int>(b.X.rows()), p = static_cast<int>(b.A.rows());
  b.X.conservativeResize(m, n0 + add);
  b.A.conservativeResize(p, n0 + add);
  b.E.conservativeResize(m, n0 + add);
  b.signs.conservativeResize(p, n0 + add);
  b.X.rightCols(add) = Xout;
  b.A.rightCols(add).setZero();
  b.E.rightCols(add).setZero();
  b.signs.rightCols(add).setZero();
  b.supports.resize(n0 + add);
  b.inlier.resize(n0 + add, 0);
  b.n_out += add;
}

// isotropic outliers on the sphere of radius `energy`
inline SignalBatch inject_outliers(SignalBatch batch, int n_out, double energy,
                                   std::uint64_t seed) {
  if (!(energy > 0)) throw InvalidParameter("outlier energy must be positive");
  if (n_out <= 0) return batch;
  const int m = static_cast<int>(batch.X.rows());
  Mat Xout(m, n_out);
  std::normal_distribution<double> g;
  for (int i = 0; i < n_out; ++i) {
    Rng rng = substream(seed ^ 0x6f75746c69657273ULL, static_cast<std::uint64_t>(i));
    Vec v(m);
    do {
      for (int t = 0; t < m; ++t) v[t] = g(rng);
    } while (v.norm() == 0.0);
    Xout.col(i) = energy * v / v.norm();
  }
  append_outliers(batch, Xout);
  return batch;
}

// one signal per row; header names the columns
inline void write_batch_csv(std::ostream& os, const SignalBatch& b) {
  const int m = static_cast<int>(b.X.rows());
  os << "index,inlier";
  for (int t = 0; t < m; ++t) os << ",x" << t;
  os << "\n";
  os.precision(17);
  for (int i = 0; i < b.n(); ++i) {
    os << i << "," << (b.inlier[i] ? 1 : 0);
    for (int t = 0; t < m; ++t) os << "," << b.X(t, i);
    os << "\n";
  }
}

}  // namespace dlid
