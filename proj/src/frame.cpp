#include "phaselsq/frame.hpp"

#include <cmath>
#include <limits>

namespace phaselsq {

namespace {

void require_finite(const Eigen::Ref<const Eigen::MatrixXd>& m, const char* what) {
  if (!m.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

void require_same_dim(const Frame& frame, const Signal& x) {
  if (frame.n() != x.dim())
    throw DimensionError("signal dimension " + std::to_string(x.dim()) +
                         " does not match frame dimension " + std::to_string(frame.n()));
}

void require_same_count(const Frame& frame, const Intensities& y) {
  if (frame.m() != y.dim())
    throw DimensionError("measurement count " + std::to_string(y.dim()) +
                         " does not match frame size " + std::to_string(frame.m()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from_json(const nlohmann::json& arr, const char* what) {
  if (!arr.is_array()) throw std::invalid_argument(std::string(what) + ": expected an array");
  Eigen::VectorXd v(arr.size());
  Eigen::Index i = 0;
  for (const auto& e : arr) {
    if (!e.is_number()) throw std::invalid_argument(std::string(what) + ": expected a number");
    v[i++] = e.get<double>();
  }
  require_finite(v, what);
  return v;
}

}  // namespace

Frame::Frame(Eigen::MatrixXd vectors) : vectors_(std::move(vectors)) {
  if (vectors_.rows() < 1 || vectors_.cols() < 1)
    throw std::invalid_argument("frame: need at least one vector of dimension >= 1");
  require_finite(vectors_, "frame");
}

bool Frame::is_frame() const { return numerical_rank(vectors_) == n(); }

Signal::Signal(Eigen::VectorXd c) : coords(std::move(c)) {
  if (coords.size() < 1) throw std::invalid_argument("signal: empty coordinate vector");
  require_finite(coords, "signal");
}

Intensities::Intensities(Eigen::VectorXd v) : values(std::move(v)) {
  if (values.size() < 1) throw std::invalid_argument("intensities: empty value vector");
  require_finite(values, "intensities");
}

Intensities analyze(const Frame& frame, const Signal& x) {
  require_same_dim(frame, x);
  Eigen::VectorXd c = frame.vectors() * x.coords;
  return Intensities(c.array().square().matrix());
}

std::pair<double, double> frame_bounds(const Frame& frame) {
  const int n = frame.n();
  Eigen::MatrixXd op = Eigen::MatrixXd::Zero(n, n);
  op.selfadjointView<Eigen::Lower>().rankUpdate(frame.vectors().transpose(), 1.0);
  op = op.selfadjointView<Eigen::Lower>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op, Eigen::EigenvaluesOnly);
  return {es.eigenvalues()(0), es.eigenvalues()(n - 1)};
}

Eigen::MatrixXd quadratic_Q(const Frame& frame, const Intensities& y) {
  require_same_count(frame, y);
  const int n = frame.n();
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  // rank-1 accumulation keeps the result exactly symmetric
  for (int k = 0; k < frame.m(); ++k)
    q.selfadjointView<Eigen::Lower>().rankUpdate(frame.vectors().row(k).transpose(), y.values[k]);
  q = q.selfadjointView<Eigen::Lower>();
  return q;
}

Eigen::MatrixXd quadratic_R(const Frame& frame, const Signal& x) {
  return quadratic_Q(frame, analyze(frame, x));
}

EquivAlignment equiv_distance(const Signal& a, const Signal& b) {
  if (a.dim() != b.dim())
    throw DimensionError("equiv_distance: dimensions " + std::to_string(a.dim()) + " vs " +
                         std::to_string(b.dim()));
  const double keep = (a.coords - b.coords).norm();
  const double flip = (a.coords + b.coords).norm();
  if (flip < keep) return {flip, -1};
  return {keep, +1};
}

int numerical_rank(const Eigen::MatrixXd& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& sv = svd.singularValues();
  const double tol = double(std::max(a.rows(), a.cols())) *
                     std::numeric_limits<double>::epsilon() * sv(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++rank;
  return rank;
}

void to_json(nlohmann::json& j, const Frame& f) {
  nlohmann::json rows = nlohmann::json::array();
  for (int k = 0; k < f.m(); ++k)
    rows.push_back(to_std(f.vectors().row(k).transpose()));
  j = nlohmann::json{{"n", f.n()}, {"m", f.m()}, {"vectors", std::move(rows)}};
}

void from_json(const nlohmann::json& j, Frame& f) {
  const int n = j.at("n").get<int>();
  const int m = j.at("m").get<int>();
  const auto& rows = j.at("vectors");
  if (!rows.is_array() || int(rows.size()) != m)
    throw std::invalid_argument("frame: 'vectors' must hold m rows");
  Eigen::MatrixXd v(m, n);
  for (int k = 0; k < m; ++k) {
    Eigen::VectorXd row = vector_from_json(rows[k], "frame row");
    if (row.size() != n) throw std::invalid_argument("frame: row length differs from n");
    v.row(k) = row.transpose();
  }
  f = Frame(v);
}

void to_json(nlohmann::json& j, const Signal& s) {
  j = nlohmann::json{{"coords", to_std(s.coords)}};
}

void from_json(const nlohmann::json& j, Signal& s) {
  s = Signal(vector_from_json(j.at("coords"), "signal coords"));
}

void to_json(nlohmann::json& j, const Intensities& y) {
  j = nlohmann::json{{"values", to_std(y.values)}};
}

void from_json(const nlohmann::json& j, Intensities& y) {
  y = Intensities(vector_from_json(j.at("values"), "intensity values"));
}

}  // namespace phaselsq
