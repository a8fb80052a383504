#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "phaselsq/bench.hpp"
#include "phaselsq/crlb.hpp"
#include "phaselsq/rng.hpp"

using namespace phaselsq;

namespace {

Frame star_frame() {
  Eigen::MatrixXd v(3, 2);
  v << 1, 0, 0, 1, 1, 1;
  return Frame(v);
}

const Signal star_x{Eigen::Vector2d(1, 0)};

// random instance with a comfortably conditioned R(x)
std::pair<Frame, Signal> conditioned_instance(int n, int m, std::uint64_t seed) {
  for (std::uint64_t s = seed;; ++s) {
    auto inst = gen_instance(n, m, s);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(quadratic_R(inst.first, inst.second),
                                                      Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) > 1e-10 * es.eigenvalues()(n - 1)) return inst;
  }
}

}  // namespace

TEST_CASE("fisher information: worked values and scaling") {
  Eigen::MatrixXd expect(2, 2);
  expect << 2, 1, 1, 1;
  const Eigen::MatrixXd f1 = fisher_info(star_frame(), star_x, NoiseModel(1.0));
  CHECK((f1 - 4.0 * expect).cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  CHECK(fisher_info(star_frame(), Signal(Eigen::Vector2d(0, 0)), NoiseModel(1.0)).isZero(0.0));

  const Eigen::MatrixXd f2 = fisher_info(star_frame(), star_x, NoiseModel(2.0));
  CHECK((f2 - 0.25 * f1).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("crlb trace: worked values and the singular guard") {
  CHECK(crlb_trace(star_frame(), star_x, NoiseModel(1.0)) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(crlb_trace(star_frame(), star_x, NoiseModel(0.1)) ==
        doctest::Approx(0.0075).epsilon(1e-12));

  const Frame basis(Eigen::MatrixXd::Identity(2, 2));
  try {
    crlb_trace(basis, star_x, NoiseModel(1.0));
    FAIL("expected UnidentifiableError");
  } catch (const UnidentifiableError& e) {
    REQUIRE(e.null_direction.size() == 2);
    // R((1,0)) = diag(1, 0): the dead direction is the second axis
    CHECK(std::abs(e.null_direction[1]) == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("crlb trace against the dense-inverse oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto [frame, x] = conditioned_instance(4, 12, 40 + seed);
    const double direct = crlb_trace(frame, x, NoiseModel(1.0));
    const double brute = 0.25 * oracles::brute_R_inverse(frame, x).trace();
    CHECK(direct == doctest::Approx(brute).epsilon(1e-9));
  }
}

TEST_CASE("expected crlb: single draw, sigma scaling, determinism") {
  const Frame f = star_frame();

  const ExpectedCrlb one = expected_crlb_trace(f, NoiseModel(1.0), 1, 99);
  Rng rng = Rng::from(99, 201, 0);  // the expectation's draw stream for index 0
  const Signal x0(rng.gaussian_vector(2));
  CHECK(one.value == doctest::Approx(crlb_trace(f, x0, NoiseModel(1.0))).epsilon(1e-14));
  CHECK(one.accepted == 1);

  const ExpectedCrlb s1 = expected_crlb_trace(f, NoiseModel(1.0), 500, 7);
  const ExpectedCrlb s2 = expected_crlb_trace(f, NoiseModel(2.0), 500, 7);
  CHECK(s2.value == doctest::Approx(4.0 * s1.value).epsilon(1e-13));
  CHECK(s2.rejected == s1.rejected);

  const ExpectedCrlb serial = expected_crlb_trace_serial(f, NoiseModel(1.0), 500, 7);
  CHECK(serial.value == s1.value);
  CHECK(serial.std_error == s1.std_error);
  CHECK(serial.accepted == s1.accepted);
}

TEST_CASE("expected crlb: a rank-deficient frame rejects every draw") {
  // a single vector in the plane: R(x) has rank one for every x
  const Frame thin(Eigen::MatrixXd::Ones(1, 2));
  CHECK_THROWS_AS(expected_crlb_trace(thin, NoiseModel(1.0), 50, 3), NumericalError);
}

TEST_CASE("expected crlb: two seeds agree within combined standard errors") {
  const Frame f = star_frame();
  const ExpectedCrlb a = expected_crlb_trace(f, NoiseModel(1.0), 100000, 1);
  const ExpectedCrlb b = expected_crlb_trace(f, NoiseModel(1.0), 100000, 2);
  CHECK(a.value > 0.0);
  const double combined = std::hypot(a.std_error, b.std_error);
  CHECK(std::abs(a.value - b.value) <= 3.0 * combined);
}

TEST_CASE("lifted bound: worked values and sigma scaling") {
  CHECK(lifted_bound(star_frame(), star_x, NoiseModel(1.0)) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(lifted_bound(star_frame(), star_x, NoiseModel(2.0)) == doctest::Approx(8.0).epsilon(1e-12));

  // R((0,1)) = [[1,1],[1,2]]: trace of the inverse is 3 and the quadratic is 1
  CHECK(lifted_bound(star_frame(), Signal(Eigen::Vector2d(0, 1)), NoiseModel(1.0)) ==
        doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("bias delta: scalar law, odd parity, worked vector") {
  const Frame line(Eigen::MatrixXd::Ones(1, 1));
  for (double c : {0.5, 2.0, -3.0}) {
    const Eigen::VectorXd d = bias_delta(line, Signal(Eigen::VectorXd::Constant(1, c)));
    CHECK(d(0) == doctest::Approx(1.0 / (c * c * c)).epsilon(1e-12));
  }

  const Eigen::VectorXd d = bias_delta(star_frame(), star_x);
  CHECK(d(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d(1) == doctest::Approx(0.0));

  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto [frame, x] = conditioned_instance(3, 9, 300 + seed);
    const Eigen::VectorXd dp = bias_delta(frame, x);
    const Eigen::VectorXd dm = bias_delta(frame, Signal(-x.coords));
    CHECK((dp + dm).cwiseAbs().maxCoeff() < 1e-12 * std::max(1.0, dp.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("delta matrix: scalar law, even parity, worked matrix") {
  const Frame line(Eigen::MatrixXd::Ones(1, 1));
  for (double c : {0.5, 2.0}) {
    const Eigen::MatrixXd dm = delta_matrix(line, Signal(Eigen::VectorXd::Constant(1, c)));
    CHECK(dm(0, 0) == doctest::Approx(-3.0 / std::pow(c, 4)).epsilon(1e-12));
  }

  Eigen::MatrixXd expect(2, 2);
  expect << -3, -2, 0, 1;
  const Eigen::MatrixXd dm = delta_matrix(star_frame(), star_x);
  CHECK((dm - expect).cwiseAbs().maxCoeff() < 1e-12);

  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto [frame, x] = conditioned_instance(3, 9, 500 + seed);
    const Eigen::MatrixXd a = delta_matrix(frame, x);
    const Eigen::MatrixXd b = delta_matrix(frame, Signal(-x.coords));
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("delta matrix is the jacobian of delta (finite differences)") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const int n = 2 + int(seed % 4);
    const auto [frame, x] = conditioned_instance(n, 3 * n, 700 + seed);
    const Eigen::MatrixXd closed = delta_matrix(frame, x);
    const Eigen::MatrixXd fd = oracles::fd_delta_jacobian(frame, x);
    const double scale = closed.cwiseAbs().maxCoeff();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double denom = std::max(std::abs(closed(i, j)), 1e-6 * scale);
        CHECK(std::abs(fd(i, j) - closed(i, j)) <= 1e-4 * denom);
      }
  }
}

TEST_CASE("mle mse bound: limits, worked value, coefficient split") {
  const Frame f = star_frame();

  // sigma -> 0: the fourth-order correction dies faster than the crlb term
  const double tiny = mle_mse_bound(f, star_x, NoiseModel(1e-4));
  CHECK(tiny / crlb_trace(f, star_x, NoiseModel(1e-4)) == doctest::Approx(1.0).epsilon(1e-6));

  // recover both coefficients from two evaluations: v(s) = A s^2 + B s^4
  const double v1 = mle_mse_bound(f, star_x, NoiseModel(1.0));
  const double vh = mle_mse_bound(f, star_x, NoiseModel(0.5));
  const double a = (16.0 * vh - v1) / 3.0;
  const double b = v1 - a;
  CHECK(a == doctest::Approx(crlb_trace(f, star_x, NoiseModel(1.0))).epsilon(1e-10));
  // B = (|delta|^2 + 2 trace(Delta R^-1)) / 16 = (1 + 2 * 1) / 16
  CHECK(b == doctest::Approx(3.0 / 16.0).epsilon(1e-10));
  CHECK(v1 == doctest::Approx(0.9375).epsilon(1e-12));
}

TEST_CASE("mle mse bound approaches the crlb at high snr") {
  const auto [frame, x] = conditioned_instance(10, 30, 7);
  for (double snr_db : {30.0, 50.0, 80.0}) {
    const double sigma = sigma_for_snr(frame, x, snr_db);
    const double c = crlb_trace(frame, x, NoiseModel(sigma));
    const double m = mle_mse_bound(frame, x, NoiseModel(sigma));
    CHECK(std::abs(m - c) / c < 0.05);
  }
}

TEST_CASE("mle mean: worked value and sigma^2 linearity") {
  const Eigen::VectorXd mean = mle_mean(star_frame(), star_x, NoiseModel(1.0));
  CHECK(mean(0) == doctest::Approx(1.25).epsilon(1e-12));
  CHECK(mean(1) == doctest::Approx(0.0));

  const Eigen::VectorXd m1 = mle_mean(star_frame(), star_x, NoiseModel(1.0)) - star_x.coords;
  const Eigen::VectorXd m2 = mle_mean(star_frame(), star_x, NoiseModel(2.0)) - star_x.coords;
  CHECK((m2 - 4.0 * m1).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("simulated log-likelihood curvature matches the fisher matrix") {
  const auto [frame, x] = conditioned_instance(2, 6, 17);
  const double sigma = 0.4;
  const auto mc = oracles::mc_loglik_hessian(frame, x, sigma, 20000, 5);
  const Eigen::MatrixXd fisher = fisher_info(frame, x, NoiseModel(sigma));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(std::abs(mc.mean(i, j) - fisher(i, j)) <= 3.0 * mc.std_error(i, j));
}

TEST_CASE("bounds report: shared factorization, similarity scale, json") {
  const NoiseModel noise(0.5);
  const BoundsReport r = compute_bounds(star_frame(), star_x, noise);
  CHECK(r.crlb_trace == doctest::Approx(crlb_trace(star_frame(), star_x, noise)));
  CHECK(r.lifted_bound == doctest::Approx(lifted_bound(star_frame(), star_x, noise)));
  CHECK(r.mle_mse_bound == doctest::Approx(mle_mse_bound(star_frame(), star_x, noise)));
  CHECK((r.mle_mean - mle_mean(star_frame(), star_x, noise)).norm() < 1e-14);
  // |R^-1| = 1 / lambda_min = 2 / (3 - sqrt(5))
  CHECK(r.similarity == doctest::Approx(0.5 * 2.0 / (3.0 - std::sqrt(5.0))).epsilon(1e-12));

  const nlohmann::json j = bounds_to_json(r);
  CHECK(j.at("crlb_trace").get<double>() == r.crlb_trace);
  CHECK(j.at("fisher").size() == 2);
  CHECK(j.at("delta_matrix")[0].size() == 2);
}

TEST_CASE("noise model validation") {
  CHECK_THROWS_AS(NoiseModel(0.0), std::invalid_argument);
  CHECK_THROWS_AS(NoiseModel(-1.0), std::invalid_argument);
}
