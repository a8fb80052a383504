#include "phaselsq/crlb.hpp"

#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "phaselsq/rng.hpp"

namespace phaselsq {

namespace {

constexpr double kCondLimit = 1e12;

// Draw-stream tag, disjoint from the tags gen_instance burns under a seed.
constexpr std::uint64_t kTagExpectationDraw = 201;

// Eigendecomposition of R(x) with the identifiability guard. Inverse-based
// quantities go through the factors; R^-1 itself is never formed.
struct RSpectrum {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;

  double lambda_min() const { return es.eigenvalues()(0); }
  double lambda_max() const { return es.eigenvalues()(es.eigenvalues().size() - 1); }

  double trace_inv() const { return es.eigenvalues().cwiseInverse().sum(); }
  double norm_inv() const { return 1.0 / lambda_min(); }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    return es.eigenvectors() *
           (es.eigenvectors().transpose() * b).cwiseQuotient(es.eigenvalues());
  }
  Eigen::MatrixXd solve_mat(const Eigen::MatrixXd& b) const {
    return es.eigenvectors() * (es.eigenvalues().cwiseInverse().asDiagonal() *
                                (es.eigenvectors().transpose() * b));
  }
};

bool spectrum_ok(const RSpectrum& s) {
  return s.lambda_min() > 0.0 && s.lambda_max() / s.lambda_min() <= kCondLimit;
}

RSpectrum factor_R(const Frame& frame, const Signal& x) {
  RSpectrum s;
  s.es.compute(quadratic_R(frame, x));
  if (!spectrum_ok(s)) {
    const Eigen::VectorXd nullv = s.es.eigenvectors().col(0);
    throw UnidentifiableError(
        "R(x) is numerically singular: the signal is unidentifiable along a direction",
        std::vector<double>(nullv.data(), nullv.data() + nullv.size()));
  }
  return s;
}

double crlb_from(const RSpectrum& s, double sigma) {
  return 0.25 * sigma * sigma * s.trace_inv();
}

Eigen::VectorXd delta_from(const RSpectrum& s, const Frame& frame, const Signal& x) {
  const Eigen::MatrixXd g = s.solve_mat(frame.vectors().transpose());  // columns R^-1 f_k
  const Eigen::VectorXd c = frame.vectors() * x.coords;
  const Eigen::VectorXd d = frame.vectors().cwiseProduct(g.transpose()).rowwise().sum();
  return g * c.cwiseProduct(d);
}

Eigen::MatrixXd delta_matrix_from(const RSpectrum& s, const Frame& frame, const Signal& x) {
  const Eigen::MatrixXd g = s.solve_mat(frame.vectors().transpose());
  const Eigen::MatrixXd gram = frame.vectors() * g;  // f_k^T R^-1 f_p
  const Eigen::VectorXd c = frame.vectors() * x.coords;
  const Eigen::VectorXd d = gram.diagonal();
  const Eigen::VectorXd w = gram * c.cwiseProduct(d);

  Eigen::MatrixXd core = gram.cwiseProduct(gram);
  core = c.asDiagonal() * core;
  core = core * c.asDiagonal();
  core *= -2.0;
  core.diagonal() += d - 2.0 * c.cwiseProduct(w);
  return g * core * frame.vectors();
}

ExpectedCrlb expectation_impl(const Frame& frame, const NoiseModel& noise, int trials,
                              std::uint64_t seed, int jobs, bool parallel) {
  if (trials < 1) throw std::invalid_argument("expected_crlb_trace: trials must be >= 1");
  const int n = frame.n();

  std::vector<double> vals(trials);
  std::vector<char> ok(trials, 0);

  const auto body = [&](int i) {
    Rng rng = Rng::from(seed, kTagExpectationDraw, std::uint64_t(i));
    const Signal x(rng.gaussian_vector(n));
    RSpectrum s;
    s.es.compute(quadratic_R(frame, x));
    if (spectrum_ok(s)) {
      vals[i] = crlb_from(s, noise.sigma);
      ok[i] = 1;
    }
  };

  if (parallel) {
#ifdef _OPENMP
    const int nthreads = jobs > 0 ? jobs : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(nthreads)
    for (int i = 0; i < trials; ++i) body(i);
#else
    (void)jobs;
    for (int i = 0; i < trials; ++i) body(i);
#endif
  } else {
    for (int i = 0; i < trials; ++i) body(i);
  }

  ExpectedCrlb out;
  double sum = 0.0;
  for (int i = 0; i < trials; ++i) {
    if (ok[i]) {
      sum += vals[i];
      ++out.accepted;
    } else {
      ++out.rejected;
    }
  }
  if (out.accepted == 0)
    throw NumericalError("expected_crlb_trace: every draw had near-singular R(x)");
  out.value = sum / out.accepted;

  if (out.accepted >= 2) {
    double ss = 0.0;
    for (int i = 0; i < trials; ++i)
      if (ok[i]) ss += (vals[i] - out.value) * (vals[i] - out.value);
    out.std_error = std::sqrt(ss / (out.accepted - 1)) / std::sqrt(double(out.accepted));
  } else {
    out.std_error = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

NoiseModel::NoiseModel(double s) : sigma(s) {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw std::invalid_argument("noise: sigma must be positive and finite");
}

Eigen::MatrixXd fisher_info(const Frame& frame, const Signal& x, const NoiseModel& noise) {
  return (4.0 / (noise.sigma * noise.sigma)) * quadratic_R(frame, x);
}

double crlb_trace(const Frame& frame, const Signal& x, const NoiseModel& noise) {
  return crlb_from(factor_R(frame, x), noise.sigma);
}

ExpectedCrlb expected_crlb_trace(const Frame& frame, const NoiseModel& noise, int trials,
                                 std::uint64_t seed, int jobs) {
  return expectation_impl(frame, noise, trials, seed, jobs, true);
}

ExpectedCrlb expected_crlb_trace_serial(const Frame& frame, const NoiseModel& noise, int trials,
                                        std::uint64_t seed) {
  return expectation_impl(frame, noise, trials, seed, 1, false);
}

double lifted_bound(const Frame& frame, const Signal& x, const NoiseModel& noise) {
  const RSpectrum s = factor_R(frame, x);
  const double quad = x.coords.dot(s.solve(x.coords));
  return 0.5 * noise.sigma * noise.sigma * (x.coords.squaredNorm() * s.trace_inv() + quad);
}

Eigen::VectorXd bias_delta(const Frame& frame, const Signal& x) {
  return delta_from(factor_R(frame, x), frame, x);
}

Eigen::MatrixXd delta_matrix(const Frame& frame, const Signal& x) {
  return delta_matrix_from(factor_R(frame, x), frame, x);
}

double mle_mse_bound(const Frame& frame, const Signal& x, const NoiseModel& noise) {
  const RSpectrum s = factor_R(frame, x);
  const Eigen::VectorXd delta = delta_from(s, frame, x);
  const Eigen::MatrixXd dm = delta_matrix_from(s, frame, x);
  const double s2 = noise.sigma * noise.sigma;
  return 0.25 * s2 * s.trace_inv() +
         s2 * s2 / 16.0 * (delta.squaredNorm() + 2.0 * s.solve_mat(dm).trace());
}

Eigen::VectorXd mle_mean(const Frame& frame, const Signal& x, const NoiseModel& noise) {
  return x.coords + 0.25 * noise.sigma * noise.sigma * bias_delta(frame, x);
}

BoundsReport compute_bounds(const Frame& frame, const Signal& x, const NoiseModel& noise) {
  const RSpectrum s = factor_R(frame, x);
  const double s2 = noise.sigma * noise.sigma;

  BoundsReport r;
  r.fisher = fisher_info(frame, x, noise);
  r.crlb_trace = crlb_from(s, noise.sigma);
  r.lifted_bound =
      0.5 * s2 * (x.coords.squaredNorm() * s.trace_inv() + x.coords.dot(s.solve(x.coords)));
  r.delta = delta_from(s, frame, x);
  r.delta_matrix = delta_matrix_from(s, frame, x);
  r.mle_mse_bound = 0.25 * s2 * s.trace_inv() +
                    s2 * s2 / 16.0 *
                        (r.delta.squaredNorm() + 2.0 * s.solve_mat(r.delta_matrix).trace());
  r.mle_mean = x.coords + 0.25 * s2 * r.delta;
  r.similarity = noise.sigma * s.norm_inv();
  return r;
}

nlohmann::json bounds_to_json(const BoundsReport& report) {
  return nlohmann::json{
      {"fisher", matrix_to_json(report.fisher)},
      {"crlb_trace", report.crlb_trace},
      {"lifted_bound", report.lifted_bound},
      {"delta", std::vector<double>(report.delta.data(), report.delta.data() + report.delta.size())},
      {"delta_matrix", matrix_to_json(report.delta_matrix)},
      {"mle_mse_bound", report.mle_mse_bound},
      {"mle_mean",
       std::vector<double>(report.mle_mean.data(), report.mle_mean.data() + report.mle_mean.size())},
      {"similarity", report.similarity}};
}

}  // namespace phaselsq
