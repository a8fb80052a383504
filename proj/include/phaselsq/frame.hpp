#pragma once

#include <string>
#include <utility>

#include <Eigen/Dense>
#include <json.hpp>

#include "phaselsq/errors.hpp"

namespace phaselsq {

/// An ordered list of m real n-vectors, stored as the rows of an m x n
/// matrix. The rows are the measurement system; they form a frame exactly
/// when they span R^n.
class Frame {
 public:
  Frame() = default;
  explicit Frame(Eigen::MatrixXd vectors);

  int n() const { return static_cast<int>(vectors_.cols()); }
  int m() const { return static_cast<int>(vectors_.rows()); }
  const Eigen::MatrixXd& vectors() const { return vectors_; }

  /// True when the rows span R^n (numerical rank test).
  bool is_frame() const;

 private:
  Eigen::MatrixXd vectors_;
};

/// The unknown real n-vector, identified up to global sign.
struct Signal {
  Eigen::VectorXd coords;

  Signal() = default;
  explicit Signal(Eigen::VectorXd c);
  int dim() const { return static_cast<int>(coords.size()); }
};

/// Squared coefficient magnitudes; entries can go negative once noise is
/// added, only the noiseless image of a signal is guaranteed nonnegative.
struct Intensities {
  Eigen::VectorXd values;

  Intensities() = default;
  explicit Intensities(Eigen::VectorXd v);
  int dim() const { return static_cast<int>(values.size()); }
};

/// (|<x, f_k>|^2)_{k=1..m}.
Intensities analyze(const Frame& frame, const Signal& x);

/// Extreme eigenvalues (A, B) of the frame operator sum_k f_k f_k^T.
/// A > 0 exactly when the rows span R^n.
std::pair<double, double> frame_bounds(const Frame& frame);

/// Q = sum_k y_k f_k f_k^T. Symmetric, indefinite in general.
Eigen::MatrixXd quadratic_Q(const Frame& frame, const Intensities& y);

/// R(x) = sum_k |<x, f_k>|^2 f_k f_k^T. Symmetric positive semidefinite;
/// identical to quadratic_Q(frame, analyze(frame, x)).
Eigen::MatrixXd quadratic_R(const Frame& frame, const Signal& x);

struct EquivAlignment {
  double dist;  // min(|a - b|, |a + b|)
  int sign;     // -1 iff flipping b strictly shrinks the distance
};

/// Distance between sign-equivalence classes plus the aligning sign.
/// Exact ties resolve to +1.
EquivAlignment equiv_distance(const Signal& a, const Signal& b);

/// Numerical rank with relative singular-value tolerance
/// max(rows, cols) * eps * sigma_max.
int numerical_rank(const Eigen::MatrixXd& a);

// JSON forms: {"n":..,"m":..,"vectors":[[..],..]}, {"coords":[..]},
// {"values":[..]}. Reading rejects non-finite numbers.
void to_json(nlohmann::json& j, const Frame& f);
void from_json(const nlohmann::json& j, Frame& f);
void to_json(nlohmann::json& j, const Signal& s);
void from_json(const nlohmann::json& j, Signal& s);
void to_json(nlohmann::json& j, const Intensities& y);
void from_json(const nlohmann::json& j, Intensities& y);

}  // namespace phaselsq
