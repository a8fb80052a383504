#include "phaselsq/solver.hpp"

#include <cmath>
#include <cstdio>
#include <optional>

#include "phaselsq/rng.hpp"

namespace phaselsq {

namespace {

void require_dims(const Frame& frame, const Intensities& y) {
  if (frame.m() != y.dim())
    throw DimensionError("measurement count " + std::to_string(y.dim()) +
                         " does not match frame size " + std::to_string(frame.m()));
}

double objective_impl(const Eigen::VectorXd& u, const Eigen::VectorXd& v, double lambda,
                      double mu, const Frame& frame, const Intensities& y) {
  Eigen::ArrayXd cu = (frame.vectors() * u).array();
  Eigen::ArrayXd cv = (frame.vectors() * v).array();
  const double fit = (y.values.array() - cu * cv).square().sum();
  return fit + lambda * u.squaredNorm() + mu * (u - v).squaredNorm() + lambda * v.squaredNorm();
}

void fix_sign(Eigen::VectorXd& v) {
  Eigen::Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  if (v[imax] < 0) v = -v;
}

SolverState init_with_q(const Frame& frame, const Intensities& y, const SolverConfig& cfg,
                        const Eigen::MatrixXd& q) {
  const int n = frame.n();
  auto [e1, v1] = principal_eigenpair(q);

  SolverState s;
  if (e1 <= 0.0) {
    // Q is negative semidefinite: the least-squares optimum is the zero vector.
    s.zero_solution = true;
    s.x = Eigen::VectorXd::Zero(n);
    s.lambda = s.mu = 0.0;
    s.L = y.values.squaredNorm();
    s.best_x = s.x;
    s.best_L = s.L;
    return s;
  }

  const double denom = (frame.vectors() * v1).array().square().square().sum();
  if (denom <= 0.0)
    throw NumericalError("initialization: principal eigenvector is annihilated by every "
                         "frame vector");
  const double beta0 = std::sqrt((1.0 - cfg.alpha) * e1 / denom);

  s.x = beta0 * v1;
  s.lambda = s.mu = cfg.alpha * e1;
  s.L = residual_L(frame, y, Signal(s.x));
  s.best_x = s.x;
  s.best_L = s.L;
  return s;
}

SolverState step_with_q(const SolverState& state, const Frame& frame, const Intensities& y,
                        const Eigen::MatrixXd& q) {
  Eigen::MatrixXd lhs = quadratic_R(frame, Signal(state.x));
  lhs.diagonal().array() += state.lambda + state.mu;

  Eigen::LLT<Eigen::MatrixXd> llt(lhs);
  if (llt.info() != Eigen::Success)
    throw NumericalError("iterate: left-hand side factorization failed "
                         "(lambda + mu = 0 with singular R_t)");

  Eigen::VectorXd rhs = q * state.x + state.mu * state.x;
  Eigen::VectorXd xn = llt.solve(rhs);
  const double rhs_norm = rhs.norm();
  if (rhs_norm > 0.0 && (lhs.selfadjointView<Eigen::Lower>() * xn - rhs).norm() > 1e-8 * rhs_norm)
    xn += llt.solve(rhs - lhs.selfadjointView<Eigen::Lower>() * xn);

  SolverState ns = state;
  ns.t = state.t + 1;
  ns.j = objective_impl(xn, state.x, state.lambda, state.mu, frame, y);
  ns.x = std::move(xn);
  ns.L = residual_L(frame, y, Signal(ns.x));
  if (ns.L < ns.best_L) {
    ns.best_x = ns.x;
    ns.best_L = ns.L;
  }
  return ns;
}

SolverResult run_impl(const Frame& frame, const Intensities& y, const SolverConfig& cfg,
                      bool track_best) {
  cfg.validate();
  require_dims(frame, y);

  const Eigen::MatrixXd q = quadratic_Q(frame, y);
  SolverState state = init_with_q(frame, y, cfg, q);

  SolverResult res;
  res.trace.push_back({0, state.lambda, state.mu, state.j, state.L});

  if (state.zero_solution) {
    res.estimate = Signal(state.x);
    res.residual = state.L;
    res.iterations = 0;
    res.stop_reason = StopReason::lambda_floor;
    return res;
  }
  if (cfg.t_max == 0) {
    res.estimate = Signal(state.x);
    res.residual = state.L;
    res.iterations = 0;
    res.stop_reason = StopReason::max_iters;
    return res;
  }

  StopReason reason = StopReason::max_iters;
  while (true) {
    const double prev_j = state.j;
    const double lam_used = state.lambda;
    const double mu_used = state.mu;

    state = step_with_q(state, frame, y, q);
    state = schedule_update(state, cfg);
    res.trace.push_back({state.t, lam_used, mu_used, state.j, state.L});

    if (state.t >= cfg.t_max) {
      reason = StopReason::max_iters;
      break;
    }
    const double stall_tol =
        cfg.relative_stall ? cfg.eps * std::max(1.0, std::abs(prev_j)) : cfg.eps;
    if (state.t >= cfg.min_steps && !std::isnan(prev_j) && prev_j - state.j < stall_tol) {
      reason = StopReason::objective_stall;
      break;
    }
    if (state.lambda < cfg.eps) {
      reason = StopReason::lambda_floor;
      break;
    }
  }

  res.objective_trace.reserve(res.trace.size() - 1);
  for (size_t i = 1; i < res.trace.size(); ++i) res.objective_trace.push_back(res.trace[i].j);

  if (track_best) {
    res.estimate = Signal(state.best_x);
    res.residual = state.best_L;
  } else {
    res.estimate = Signal(state.x);
    res.residual = residual_L(frame, y, res.estimate);
  }
  res.iterations = state.t;
  res.stop_reason = reason;
  return res;
}

}  // namespace

MuPolicy MuPolicy::parse(const std::string& text) {
  if (text == "max1" || text == "max_one_lambda") return {MuPolicyKind::max_one_lambda, 0.0};
  if (text == "lambda" || text == "equal_lambda") return {MuPolicyKind::equal_lambda, 0.0};
  const auto try_const = [&](const std::string& prefix) -> std::optional<MuPolicy> {
    if (text.rfind(prefix, 0) != 0) return std::nullopt;
    size_t pos = 0;
    const std::string num = text.substr(prefix.size());
    double v = std::stod(num, &pos);
    if (pos != num.size() || !(v >= 0.0) || !std::isfinite(v))
      throw std::invalid_argument("mu policy: bad constant in '" + text + "'");
    return MuPolicy{MuPolicyKind::constant, v};
  };
  if (auto p = try_const("const:")) return *p;
  if (auto p = try_const("constant:")) return *p;
  throw std::invalid_argument("mu policy: expected max1 | lambda | const:C, got '" + text + "'");
}

std::string MuPolicy::str() const {
  switch (kind) {
    case MuPolicyKind::max_one_lambda: return "max_one_lambda";
    case MuPolicyKind::equal_lambda: return "equal_lambda";
    case MuPolicyKind::constant: {
      char buf[48];
      std::snprintf(buf, sizeof buf, "constant:%.17g", value);
      return buf;
    }
  }
  return "max_one_lambda";
}

void SolverConfig::validate() const {
  if (!(alpha > 0.0) || alpha > 1.0) throw std::invalid_argument("solver: alpha must be in (0, 1]");
  if (!(lambda_decay > 1.0)) throw std::invalid_argument("solver: lambda_decay must exceed 1");
  if (!(eps > 0.0)) throw std::invalid_argument("solver: eps must be positive");
  if (t_max < 0) throw std::invalid_argument("solver: t_max must be >= 0");
  if (min_steps < 0) throw std::invalid_argument("solver: min_steps must be >= 0");
  if (mu_policy.kind == MuPolicyKind::constant && !(mu_policy.value >= 0.0))
    throw std::invalid_argument("solver: constant mu must be >= 0");
}

const char* stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::max_iters: return "max_iters";
    case StopReason::objective_stall: return "objective_stall";
    case StopReason::lambda_floor: return "lambda_floor";
  }
  return "max_iters";
}

double objective_J(const Signal& u, const Signal& v, double lambda, double mu,
                   const Frame& frame, const Intensities& y) {
  if (u.dim() != frame.n() || v.dim() != frame.n())
    throw DimensionError("objective: signal dimension does not match frame");
  require_dims(frame, y);
  if (lambda < 0.0 || mu < 0.0)
    throw std::invalid_argument("objective: lambda and mu must be >= 0");
  return objective_impl(u.coords, v.coords, lambda, mu, frame, y);
}

double residual_L(const Frame& frame, const Intensities& y, const Signal& x) {
  require_dims(frame, y);
  return (y.values - analyze(frame, x).values).squaredNorm();
}

std::pair<double, Eigen::VectorXd> principal_eigenpair(const Eigen::MatrixXd& sym,
                                                       int dense_threshold) {
  const Eigen::Index n = sym.rows();
  Eigen::VectorXd v;
  double e = 0.0;
  if (n <= dense_threshold) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    e = es.eigenvalues()(n - 1);
    v = es.eigenvectors().col(n - 1);
  } else {
    // Shift by the 1-norm so the iteration matrix is positive semidefinite
    // and its top eigenvalue is the one we want.
    const double shift = sym.cwiseAbs().colwise().sum().maxCoeff();
    Rng rng(0x5eedu ^ std::uint64_t(n));
    v = rng.gaussian_vector(n).normalized();
    double theta = 0.0;
    for (int it = 0; it < 10000; ++it) {
      Eigen::VectorXd w = sym.selfadjointView<Eigen::Lower>() * v + shift * v;
      const double wn = w.norm();
      if (wn == 0.0) break;  // sym == -shift*I; any direction is an eigenvector
      v = w / wn;
      const double theta_new = v.dot(sym.selfadjointView<Eigen::Lower>() * v);
      if (it > 0 && std::abs(theta_new - theta) <= 1e-12 * std::max(1.0, std::abs(theta_new))) {
        theta = theta_new;
        break;
      }
      theta = theta_new;
    }
    e = theta;
  }
  fix_sign(v);
  return {e, v};
}

SolverState init_state(const Frame& frame, const Intensities& y, const SolverConfig& cfg) {
  cfg.validate();
  require_dims(frame, y);
  return init_with_q(frame, y, cfg, quadratic_Q(frame, y));
}

SolverState iterate_step(const SolverState& state, const Frame& frame, const Intensities& y) {
  require_dims(frame, y);
  if (state.x.size() != frame.n())
    throw DimensionError("iterate: state dimension does not match frame");
  return step_with_q(state, frame, y, quadratic_Q(frame, y));
}

SolverState schedule_update(const SolverState& state, const SolverConfig& cfg) {
  SolverState ns = state;
  ns.lambda = state.lambda / cfg.lambda_decay;
  switch (cfg.mu_policy.kind) {
    case MuPolicyKind::max_one_lambda: ns.mu = std::max(1.0, ns.lambda); break;
    case MuPolicyKind::equal_lambda: ns.mu = ns.lambda; break;
    case MuPolicyKind::constant: ns.mu = cfg.mu_policy.value; break;
  }
  return ns;
}

SolverResult run_algorithm1(const Frame& frame, const Intensities& y, const SolverConfig& cfg) {
  return run_impl(frame, y, cfg, false);
}

SolverResult run_algorithm2(const Frame& frame, const Intensities& y, const SolverConfig& cfg) {
  return run_impl(frame, y, cfg, true);
}

void to_json(nlohmann::json& j, const SolverConfig& cfg) {
  j = nlohmann::json{{"alpha", cfg.alpha},
                     {"lambda_decay", cfg.lambda_decay},
                     {"mu_policy", cfg.mu_policy.str()},
                     {"eps", cfg.eps},
                     {"t_max", cfg.t_max},
                     {"min_steps", cfg.min_steps},
                     {"relative_stall", cfg.relative_stall}};
}

void from_json(const nlohmann::json& j, SolverConfig& cfg) {
  SolverConfig c;
  c.alpha = j.at("alpha").get<double>();
  c.lambda_decay = j.at("lambda_decay").get<double>();
  c.mu_policy = MuPolicy::parse(j.at("mu_policy").get<std::string>());
  c.eps = j.at("eps").get<double>();
  c.t_max = j.at("t_max").get<int>();
  c.min_steps = j.value("min_steps", 100);
  c.relative_stall = j.value("relative_stall", false);
  c.validate();
  cfg = c;
}

void write_trace_csv(std::ostream& os, const std::vector<StepRecord>& trace) {
  os << "t,lambda,mu,j,L\n";
  char buf[512];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", r.t, r.lambda, r.mu, r.j, r.L);
    os << buf;
  }
}

}  // namespace phaselsq
