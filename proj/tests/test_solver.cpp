#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "phaselsq/bench.hpp"
#include "phaselsq/rng.hpp"
#include "phaselsq/solver.hpp"

using namespace phaselsq;

namespace {

Frame star_frame() {
  Eigen::MatrixXd v(3, 2);
  v << 1, 0, 0, 1, 1, 1;
  return Frame(v);
}

const Intensities star_y{Eigen::Vector3d(1, 0, 1)};

SolverConfig paper_cfg() {
  SolverConfig cfg;  // alpha 0.9, decay 1.05, eps 1e-8, max1 policy
  return cfg;
}

}  // namespace

TEST_CASE("objective: corner values and the worked instance") {
  const Frame f = star_frame();
  const Signal zero(Eigen::Vector2d(0, 0));
  const Signal x(Eigen::Vector2d(1, 0));

  CHECK(objective_J(zero, zero, 3.0, 7.0, f, star_y) ==
        doctest::Approx(star_y.values.squaredNorm()));

  // with lambda = 0 and u = v the objective is the plain residual
  CHECK(objective_J(x, x, 0.0, 5.0, f, star_y) ==
        doctest::Approx(residual_L(f, star_y, x)).epsilon(1e-14));

  CHECK(objective_J(x, x, 1.0, 5.0, f, star_y) == doctest::Approx(2.0));
}

TEST_CASE("objective: symmetric in (u, v)") {
  Rng rng = Rng::from(42);
  const Frame f = star_frame();
  for (int i = 0; i < 50; ++i) {
    const Signal u(rng.gaussian_vector(2));
    const Signal v(rng.gaussian_vector(2));
    const double lam = std::abs(rng.gaussian());
    const double mu = std::abs(rng.gaussian());
    CHECK(objective_J(u, v, lam, mu, f, star_y) ==
          doctest::Approx(objective_J(v, u, lam, mu, f, star_y)).epsilon(1e-14));
  }
}

TEST_CASE("init: worked eigenpair, beta, schedule start") {
  const SolverState s = init_state(star_frame(), star_y, paper_cfg());
  const double e1 = (3.0 + std::sqrt(5.0)) / 2.0;

  CHECK_FALSE(s.zero_solution);
  CHECK(s.lambda == doctest::Approx(0.9 * e1).epsilon(1e-12));
  CHECK(s.mu == doctest::Approx(0.9 * e1).epsilon(1e-12));
  CHECK(s.x.norm() == doctest::Approx(0.25).epsilon(1e-12));  // beta0
  const Eigen::Vector2d v1(0.85065080835203988, 0.52573111211913359);
  CHECK((s.x / s.x.norm() - v1).norm() < 1e-10);
}

TEST_CASE("init: alpha = 1 starts from the origin") {
  SolverConfig cfg = paper_cfg();
  cfg.alpha = 1.0;
  const SolverState s = init_state(star_frame(), star_y, cfg);
  CHECK(s.x.norm() == 0.0);
}

TEST_CASE("init: negative-definite data yields the zero solution") {
  const SolverState s =
      init_state(star_frame(), Intensities(Eigen::Vector3d(-1, -1, -1)), paper_cfg());
  CHECK(s.zero_solution);
  CHECK(s.x.isZero(0.0));
}

TEST_CASE("principal eigenpair: dense and power-iteration paths agree") {
  Rng rng = Rng::from(5);
  Eigen::MatrixXd a(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j <= i; ++j) a(i, j) = a(j, i) = rng.gaussian();
  const auto [ed, vd] = principal_eigenpair(a);
  const auto [ep, vp] = principal_eigenpair(a, /*dense_threshold=*/0);
  CHECK(ep == doctest::Approx(ed).epsilon(1e-9));
  CHECK((vp - vd).norm() < 1e-4);  // same sign convention; vector accuracy ~sqrt(eig tol)
}

TEST_CASE("iterate: zero is a fixed point of the update map") {
  SolverState s;
  s.x = Eigen::Vector2d(0, 0);
  s.lambda = 0.5;
  s.mu = 1.0;
  const SolverState ns = iterate_step(s, star_frame(), star_y);
  CHECK(ns.x.isZero(0.0));
  CHECK(ns.t == 1);
}

TEST_CASE("iterate: noiseless solutions are fixed points") {
  SolverState s;
  s.x = Eigen::Vector2d(1, 0);
  s.lambda = 0.0;
  s.mu = 1.0;
  const SolverState ns = iterate_step(s, star_frame(), star_y);
  CHECK((ns.x - Eigen::Vector2d(1, 0)).norm() < 1e-12);
}

TEST_CASE("iterate: scalar instance") {
  const Frame f(Eigen::MatrixXd::Ones(1, 1));
  SolverState s;
  s.x = Eigen::VectorXd::Constant(1, 2.0);
  s.lambda = 0.0;
  s.mu = 0.0;
  const SolverState ns = iterate_step(s, f, Intensities(Eigen::VectorXd::Ones(1)));
  CHECK(ns.x(0) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("iterate: left-hand side stays positive definite along a run") {
  const auto [frame, x] = gen_instance(6, 18, 31);
  const Intensities y = analyze(frame, x);
  SolverConfig cfg = paper_cfg();
  SolverState s = init_state(frame, y, cfg);
  for (int t = 0; t < 25; ++t) {
    Eigen::MatrixXd lhs = quadratic_R(frame, Signal(s.x));
    lhs.diagonal().array() += s.lambda + s.mu;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lhs, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues()(0) >= (s.lambda + s.mu) * (1.0 - 1e-12));
    s = schedule_update(iterate_step(s, frame, y), cfg);
  }
}

TEST_CASE("schedule: the three policies") {
  SolverConfig cfg = paper_cfg();
  SolverState s;
  s.lambda = 2.1;
  s.mu = 99.0;

  SolverState a = schedule_update(s, cfg);
  CHECK(a.lambda == doctest::Approx(2.0));
  CHECK(a.mu == doctest::Approx(2.0));

  s.lambda = 0.5;
  SolverState b = schedule_update(s, cfg);
  CHECK(b.lambda == doctest::Approx(0.5 / 1.05));
  CHECK(b.mu == doctest::Approx(1.0));

  cfg.mu_policy = MuPolicy::parse("lambda");
  SolverState c = schedule_update(s, cfg);
  CHECK(c.lambda == doctest::Approx(0.5 / 1.05));
  CHECK(c.mu == doctest::Approx(0.5 / 1.05));

  cfg.mu_policy = MuPolicy::parse("const:2.5");
  CHECK(schedule_update(s, cfg).mu == doctest::Approx(2.5));
}

TEST_CASE("residual: worked values") {
  const Frame f = star_frame();
  CHECK(residual_L(f, star_y, Signal(Eigen::Vector2d(1, 0))) == doctest::Approx(0.0));
  CHECK(residual_L(f, star_y, Signal(Eigen::Vector2d(0, 0))) == doctest::Approx(2.0));
  CHECK(residual_L(f, Intensities(Eigen::Vector3d(2, 0, 1)), Signal(Eigen::Vector2d(1, 0))) ==
        doctest::Approx(1.0));
}

TEST_CASE("algorithm 1: noiseless recovery on the worked instance") {
  const SolverResult res = run_algorithm1(star_frame(), star_y, paper_cfg());
  const auto align = equiv_distance(Signal(Eigen::Vector2d(1, 0)), res.estimate);
  CHECK(align.dist <= 1e-3);
  CHECK(res.residual == doctest::Approx(residual_L(star_frame(), star_y, res.estimate))
                            .epsilon(1e-10));
}

TEST_CASE("algorithm 1: iteration cap of zero returns the initializer") {
  SolverConfig cfg = paper_cfg();
  cfg.t_max = 0;
  const SolverResult res = run_algorithm1(star_frame(), star_y, cfg);
  CHECK(res.iterations == 0);
  CHECK(res.stop_reason == StopReason::max_iters);
  CHECK(res.estimate.coords.norm() == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("algorithm 1: zero-solution data stops immediately") {
  const SolverResult res =
      run_algorithm1(star_frame(), Intensities(Eigen::Vector3d(-1, -1, -1)), paper_cfg());
  CHECK(res.iterations == 0);
  CHECK(res.stop_reason == StopReason::lambda_floor);
  CHECK(res.estimate.coords.isZero(0.0));
}

TEST_CASE("algorithm 2: best residual tracking") {
  const Frame f = star_frame();
  const SolverResult res = run_algorithm2(f, star_y, paper_cfg());
  CHECK(res.residual <= 1e-6);

  // the reported residual is the minimum over every visited iterate
  double best = res.trace.front().L;  // includes the t = 0 row
  for (const auto& r : res.trace) best = std::min(best, r.L);
  CHECK(res.residual == best);
  CHECK(res.residual == residual_L(f, star_y, res.estimate));
}

TEST_CASE("algorithm 2 never loses to algorithm 1 on the same data") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto [frame, x] = gen_instance(5, 15, 100 + seed);
    Eigen::VectorXd phi = analyze(frame, x).values;
    Rng noise = Rng::from(seed, 77);
    for (int k = 0; k < phi.size(); ++k) phi[k] += 0.3 * noise.gaussian();
    const Intensities y(phi);

    const SolverConfig cfg = paper_cfg();
    const SolverResult r1 = run_algorithm1(frame, y, cfg);
    const SolverResult r2 = run_algorithm2(frame, y, cfg);
    CHECK(r2.residual <= r1.residual + 1e-12);
  }
}

TEST_CASE("surrogate objective is monotone under non-increasing schedules") {
  // random instances, random initializers, both monotone-safe policies
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const int n = 2 + int(seed % 5);
    const auto [frame, x] = gen_instance(n, 3 * n, 200 + seed);
    Eigen::VectorXd phi = analyze(frame, x).values;
    Rng noise = Rng::from(seed, 5);
    for (int k = 0; k < phi.size(); ++k) phi[k] += 0.5 * noise.gaussian();
    const Intensities y(phi);

    SolverConfig cfg = paper_cfg();
    cfg.mu_policy = (seed % 2 == 0) ? MuPolicy::parse("lambda") : MuPolicy::parse("const:1.0");

    SolverState s;
    s.x = Rng::from(seed, 9).gaussian_vector(n);  // arbitrary start
    s.lambda = 3.0;
    s.mu = cfg.mu_policy.kind == MuPolicyKind::constant ? 1.0 : 3.0;

    double prev = std::numeric_limits<double>::infinity();
    for (int t = 0; t < 120; ++t) {
      s = iterate_step(s, frame, y);
      CHECK(s.j <= prev + 1e-9 * std::max(1.0, std::abs(prev)));
      prev = s.j;
      s = schedule_update(s, cfg);
    }
  }
}

TEST_CASE("factorization failure is reported, not patched") {
  // lambda + mu = 0 with singular R_t (x orthogonal to every frame vector)
  Eigen::MatrixXd v(2, 2);
  v << 1, 0, 2, 0;
  SolverState s;
  s.x = Eigen::Vector2d(0, 1);
  s.lambda = 0.0;
  s.mu = 0.0;
  CHECK_THROWS_AS(iterate_step(s, Frame(v), Intensities(Eigen::Vector2d(1, 4))), NumericalError);
}

TEST_CASE("config validation and json round trip") {
  SolverConfig cfg;
  cfg.alpha = 0.75;
  cfg.mu_policy = MuPolicy::parse("const:2.25");
  cfg.relative_stall = true;
  nlohmann::json j = cfg;
  const auto back = j.get<SolverConfig>();
  CHECK(back.alpha == cfg.alpha);
  CHECK(back.mu_policy.kind == MuPolicyKind::constant);
  CHECK(back.mu_policy.value == 2.25);
  CHECK(back.relative_stall);

  SolverConfig bad;
  bad.alpha = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = SolverConfig{};
  bad.lambda_decay = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_THROWS_AS(MuPolicy::parse("bogus"), std::invalid_argument);
}

TEST_CASE("trace export uses the documented CSV header") {
  const SolverResult res = run_algorithm2(star_frame(), star_y, paper_cfg());
  std::ostringstream os;
  write_trace_csv(os, res.trace);
  const std::string s = os.str();
  CHECK(s.rfind("t,lambda,mu,j,L\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == int(res.trace.size()) + 1);
}
