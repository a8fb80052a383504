#pragma once

#include <cstdint>

#include <json.hpp>

#include "phaselsq/frame.hpp"

namespace phaselsq {

struct NoiseModel {
  double sigma = 1.0;  // additive Gaussian noise standard deviation, > 0

  NoiseModel() = default;
  explicit NoiseModel(double s);
};

/// Estimation-theoretic quantities for one (frame, signal, sigma) triple.
/// similarity records sigma * |R(x)^-1|, the scale on which the
/// small-noise expansions behind the MLE-corrected numbers are trustworthy.
struct BoundsReport {
  Eigen::MatrixXd fisher;
  double crlb_trace = 0.0;
  double lifted_bound = 0.0;
  Eigen::VectorXd delta;
  Eigen::MatrixXd delta_matrix;
  double mle_mse_bound = 0.0;
  Eigen::VectorXd mle_mean;
  double similarity = 0.0;
};

/// (4 / sigma^2) R(x). Symmetric positive semidefinite; never throws,
/// singularity surfaces in the inverse-based quantities downstream.
Eigen::MatrixXd fisher_info(const Frame& frame, const Signal& x, const NoiseModel& noise);

/// sigma^2/4 * trace(R(x)^-1): mean-square-error floor for unbiased
/// estimators. Throws UnidentifiableError when cond(R) > 1e12.
double crlb_trace(const Frame& frame, const Signal& x, const NoiseModel& noise);

struct ExpectedCrlb {
  double value = 0.0;      // Monte Carlo mean over x ~ N(0, I)
  double std_error = 0.0;  // sample standard error (NaN when < 2 accepted)
  int accepted = 0;
  int rejected = 0;        // draws with near-singular R(x)
};

/// Monte Carlo estimate of E[crlb_trace] over standard normal signals.
/// Draws use per-index substreams of the seed, so the result is identical
/// for every worker count. Near-singular draws are rejected and counted.
ExpectedCrlb expected_crlb_trace(const Frame& frame, const NoiseModel& noise, int trials,
                                 std::uint64_t seed, int jobs = 0);

/// Serial reference for the expectation kernel; bit-identical to the
/// parallel version.
ExpectedCrlb expected_crlb_trace_serial(const Frame& frame, const NoiseModel& noise, int trials,
                                        std::uint64_t seed);

/// sigma^2/2 * (|x|^2 trace(R^-1) + x^T R^-1 x): mean-square-error floor for
/// unbiased estimators of the rank-1 matrix x x^T.
double lifted_bound(const Frame& frame, const Signal& x, const NoiseModel& noise);

/// delta = sum_k <x,f_k> <R^-1 f_k, f_k> R^-1 f_k; the leading
/// maximum-likelihood bias is (sigma^2/4) delta.
Eigen::VectorXd bias_delta(const Frame& frame, const Signal& x);

/// Closed-form Jacobian of delta with respect to x.
Eigen::MatrixXd delta_matrix(const Frame& frame, const Signal& x);

/// sigma^2/4 trace(R^-1) + sigma^4/16 (|delta|^2 + 2 trace(Delta R^-1)).
/// The O((sigma |R^-1|)^6) remainder is dropped; check
/// BoundsReport::similarity before trusting it at low SNR.
double mle_mse_bound(const Frame& frame, const Signal& x, const NoiseModel& noise);

/// x + (sigma^2/4) delta.
Eigen::VectorXd mle_mean(const Frame& frame, const Signal& x, const NoiseModel& noise);

/// All of the above sharing one factorization of R(x).
BoundsReport compute_bounds(const Frame& frame, const Signal& x, const NoiseModel& noise);

/// JSON form of a report; matrices are nested row-major arrays.
nlohmann::json bounds_to_json(const BoundsReport& report);

}  // namespace phaselsq
