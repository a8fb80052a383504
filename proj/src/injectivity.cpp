#include "phaselsq/injectivity.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "phaselsq/rng.hpp"

namespace phaselsq {

namespace {

constexpr std::uint64_t kTagSphereSample = 301;

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& v, const std::vector<int>& idx) {
  Eigen::MatrixXd sub(idx.size(), v.cols());
  for (size_t i = 0; i < idx.size(); ++i) sub.row(i) = v.row(idx[i]);
  return sub;
}

bool spans(const Eigen::MatrixXd& v, const std::vector<int>& idx, int n) {
  if (int(idx.size()) < n) return false;
  return numerical_rank(take_rows(v, idx)) == n;
}

// C(m, n) without overflow; caps at limit+1.
std::uint64_t binomial_capped(int m, int n, std::uint64_t limit) {
  if (n < 0 || n > m) return 0;
  n = std::min(n, m - n);
  std::uint64_t r = 1;
  for (int i = 1; i <= n; ++i) {
    if (r > limit) return limit + 1;
    r = r * std::uint64_t(m - n + i) / std::uint64_t(i);
  }
  return std::min<std::uint64_t>(r, limit + 1);
}

}  // namespace

InjectivityVerdict partition_injectivity_check(const Frame& frame, int max_vectors) {
  const int m = frame.m();
  const int n = frame.n();
  if (m > max_vectors)
    throw EnumerationCapError("frame too large for exhaustive check: m=" + std::to_string(m) +
                              " exceeds the enumeration cap " + std::to_string(max_vectors));

  // Row m-1 is pinned to the complement so each unordered split appears once.
  const std::uint64_t splits = std::uint64_t(1) << (m - 1);
  std::vector<int> side, rest;
  for (std::uint64_t mask = 0; mask < splits; ++mask) {
    side.clear();
    rest.clear();
    for (int k = 0; k < m; ++k)
      ((mask >> k) & 1u) ? side.push_back(k) : rest.push_back(k);
    if (!spans(frame.vectors(), side, n) && !spans(frame.vectors(), rest, n))
      return {false, InjectivityMethod::partition_enumeration, side};
  }
  return {true, InjectivityMethod::partition_enumeration, std::nullopt};
}

FullSparkResult full_spark_check(const Frame& frame, std::uint64_t max_subsets) {
  const int m = frame.m();
  const int n = frame.n();
  if (m < n) return {false, std::nullopt};  // fewer than n vectors cannot span
  if (binomial_capped(m, n, max_subsets) > max_subsets)
    throw EnumerationCapError("full-spark check: C(" + std::to_string(m) + "," +
                              std::to_string(n) + ") exceeds the subset cap " +
                              std::to_string(max_subsets));

  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  while (true) {
    if (numerical_rank(take_rows(frame.vectors(), idx)) < n) return {false, idx};
    // next lexicographic combination
    int i = n - 1;
    while (i >= 0 && idx[i] == m - n + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int k = i + 1; k < n; ++k) idx[k] = idx[k - 1] + 1;
  }
  return {true, std::nullopt};
}

double smallest_R_eigenvalue(const Frame& frame, const Signal& x) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(quadratic_R(frame, x),
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

namespace {

// lambda_min of R(x) and its unit eigenvector, for the refinement gradient.
std::pair<double, Eigen::VectorXd> min_eig_pair(const Frame& frame, const Eigen::VectorXd& x) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(quadratic_R(frame, Signal(x)));
  return {es.eigenvalues()(0), es.eigenvectors().col(0)};
}

// d/dx of v^T R(x) v at fixed v: 2 * F^T (Fx .* (Fv).^2).
Eigen::VectorXd min_eig_gradient(const Frame& frame, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& v) {
  Eigen::ArrayXd c = (frame.vectors() * x).array();
  Eigen::ArrayXd w = (frame.vectors() * v).array();
  return 2.0 * frame.vectors().transpose() * (c * w * w).matrix();
}

}  // namespace

double a0_estimate(const Frame& frame, int num_samples, std::uint64_t seed) {
  if (num_samples < 1) throw std::invalid_argument("a0_estimate: num_samples must be >= 1");
  const int n = frame.n();

  std::vector<double> vals(num_samples);
  std::vector<Eigen::VectorXd> pts(num_samples);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int i = 0; i < num_samples; ++i) {
    Rng rng = Rng::from(seed, kTagSphereSample, std::uint64_t(i));
    Eigen::VectorXd x = rng.gaussian_vector(n);
    double norm = x.norm();
    while (norm == 0.0) {  // astronomically unlikely; redraw inside the stream
      x = rng.gaussian_vector(n);
      norm = x.norm();
    }
    x /= norm;
    pts[i] = x;
    vals[i] = smallest_R_eigenvalue(frame, Signal(x));
  }

  int best = 0;
  for (int i = 1; i < num_samples; ++i)
    if (vals[i] < vals[best]) best = i;

  // Projected-gradient polish on the sphere, backtracking step size.
  Eigen::VectorXd x = pts[best];
  double fx = vals[best];
  double step = 0.25;
  for (int it = 0; it < 400 && step > 1e-14; ++it) {
    auto [lam, v] = min_eig_pair(frame, x);
    Eigen::VectorXd g = min_eig_gradient(frame, x, v);
    g -= g.dot(x) * x;  // tangent component
    const double gn = g.norm();
    if (gn < 1e-15) break;
    Eigen::VectorXd cand = (x - (step / gn) * g).normalized();
    const double fc = smallest_R_eigenvalue(frame, Signal(cand));
    if (fc < fx) {
      x = cand;
      fx = fc;
      step *= 1.3;
    } else {
      step *= 0.5;
    }
  }
  return std::max(0.0, std::min(fx, vals[best]));
}

}  // namespace phaselsq
