#pragma once

#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "phaselsq/frame.hpp"

namespace phaselsq {

enum class MuPolicyKind { max_one_lambda, equal_lambda, constant };

/// How the coupling weight mu follows the decaying lambda:
///   max_one_lambda  mu = max(1, lambda)
///   equal_lambda    mu = lambda
///   constant        mu = value
struct MuPolicy {
  MuPolicyKind kind = MuPolicyKind::max_one_lambda;
  double value = 0.0;

  static MuPolicy parse(const std::string& text);
  std::string str() const;
};

struct SolverConfig {
  double alpha = 0.9;          // initialization scale, in (0, 1]
  double lambda_decay = 1.05;  // per-step divisor, > 1
  MuPolicy mu_policy{};
  double eps = 1e-8;           // stopping tolerance for both stall and floor tests
  int t_max = 2000;            // iteration cap
  int min_steps = 100;         // stall test suppressed before this many steps
  bool relative_stall = false; // stall test relative to |j| instead of absolute

  void validate() const;
};

struct SolverState {
  int t = 0;
  Eigen::VectorXd x;
  double lambda = 0.0;
  double mu = 0.0;
  double j = std::numeric_limits<double>::quiet_NaN();  // last surrogate objective
  double L = std::numeric_limits<double>::infinity();   // last residual
  Eigen::VectorXd best_x;
  double best_L = std::numeric_limits<double>::infinity();
  bool zero_solution = false;  // data admits only the zero least-squares solution
};

enum class StopReason { max_iters, objective_stall, lambda_floor };

const char* stop_reason_name(StopReason r);

struct StepRecord {
  int t;
  double lambda;  // value used to produce iterate t (row t=0 holds the initial values)
  double mu;
  double j;       // NaN on the t=0 row
  double L;
};

struct SolverResult {
  Signal estimate;
  std::vector<double> objective_trace;  // j_0, j_1, ...
  std::vector<StepRecord> trace;        // includes a t=0 row for the initial iterate
  double residual = 0.0;                // |y - phi(estimate)|^2
  int iterations = 0;
  StopReason stop_reason = StopReason::max_iters;
};

/// Four-term surrogate: sum_k (y_k - <u,f_k><f_k,v>)^2
///                      + lambda|u|^2 + mu|u-v|^2 + lambda|v|^2.
/// Symmetric in (u, v).
double objective_J(const Signal& u, const Signal& v, double lambda, double mu,
                   const Frame& frame, const Intensities& y);

/// |y - phi(x)|^2.
double residual_L(const Frame& frame, const Intensities& y, const Signal& x);

/// Principal eigenpair of a symmetric matrix; the eigenvector's
/// largest-magnitude entry is made positive so runs are reproducible.
/// Dense decomposition up to dense_threshold, shifted power iteration above.
std::pair<double, Eigen::VectorXd> principal_eigenpair(const Eigen::MatrixXd& sym,
                                                       int dense_threshold = 512);

/// Spectral-style initialization: lambda_0 = mu_0 = alpha * e1 and
/// x^0 = beta_0 * v1 with (e1, v1) the principal eigenpair of Q and
/// beta_0 = sqrt((1 - alpha) e1 / sum_k <v1, f_k>^4). If e1 <= 0 the
/// returned state is the zero solution and iteration should not start.
SolverState init_state(const Frame& frame, const Intensities& y, const SolverConfig& cfg);

/// One closed-form update: solves (R_t + (lambda_t + mu_t) I) x = (Q + mu_t I) x^t
/// by Cholesky (one refinement pass if the relative residual exceeds 1e-8),
/// then records j_t = J(x^{t+1}, x^t, lambda_t, mu_t) and the new residual.
SolverState iterate_step(const SolverState& state, const Frame& frame, const Intensities& y);

/// lambda <- lambda / decay, mu per policy.
SolverState schedule_update(const SolverState& state, const SolverConfig& cfg);

/// Runs the iteration until the cap, an objective stall, or the lambda floor,
/// and returns the final iterate.
SolverResult run_algorithm1(const Frame& frame, const Intensities& y, const SolverConfig& cfg);

/// Same iteration, but tracks the residual of every visited iterate and
/// returns the best one.
SolverResult run_algorithm2(const Frame& frame, const Intensities& y, const SolverConfig& cfg);

void to_json(nlohmann::json& j, const SolverConfig& cfg);
void from_json(const nlohmann::json& j, SolverConfig& cfg);

/// CSV trace with header t,lambda,mu,j,L.
void write_trace_csv(std::ostream& os, const std::vector<StepRecord>& trace);

}  // namespace phaselsq
