#include "phaselsq/bench.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "phaselsq/crlb.hpp"
#include "phaselsq/rng.hpp"

namespace phaselsq {

namespace {

// Substream tags under the master seed. gen_instance owns tags 1 and 2, so
// the sweep uses a disjoint range; a collision would correlate the noise
// with the signal it perturbs.
constexpr std::uint64_t kTagPointInstance = 101;
constexpr std::uint64_t kTagNoise = 102;
constexpr std::uint64_t kTagTrialInstance = 103;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct TrialOutcome {
  bool rejected = false;
  double err_sq = 0.0;
  int iterations = 0;
  Eigen::VectorXd deviation;  // sign-aligned estimate minus the trial's truth
};

TrialOutcome execute_trial(const Frame& frame, const Signal& x, const Eigen::VectorXd& phi_x,
                           double sigma, const SweepConfig& cfg, int snr_index, int trial) {
  Rng rng = Rng::from(cfg.master_seed, kTagNoise, std::uint64_t(snr_index), std::uint64_t(trial));
  Eigen::VectorXd noise(frame.m());
  for (int k = 0; k < frame.m(); ++k) noise[k] = sigma * rng.gaussian();
  const Intensities y(phi_x + noise);

  TrialOutcome out;
  try {
    const SolverResult res = cfg.algorithm == 1 ? run_algorithm1(frame, y, cfg.solver)
                                                : run_algorithm2(frame, y, cfg.solver);
    Eigen::VectorXd est = res.estimate.coords;
    if (cfg.sign_convention == SignConvention::fixed_first_positive) {
      if (est[0] < 0) est = -est;
      out.err_sq = (x.coords - est).squaredNorm();
    } else {
      const EquivAlignment a = equiv_distance(x, res.estimate);
      est *= a.sign;
      out.err_sq = a.dist * a.dist;
    }
    out.deviation = est - x.coords;
    out.iterations = res.iterations;
  } catch (const NumericalError&) {
    out.rejected = true;
  }
  return out;
}

SweepResult sweep_impl(const SweepConfig& cfg, bool parallel) {
  cfg.validate();
  const int m = cfg.m();

  std::pair<Frame, Signal> base;
  if (!cfg.per_point_instance) base = gen_instance(cfg.n, m, cfg.master_seed);

  SweepResult result;
  result.rows.reserve(cfg.snr_grid_db.size());

  std::vector<TrialOutcome> slots(cfg.trials);
  for (size_t s = 0; s < cfg.snr_grid_db.size(); ++s) {
    const auto point =
        cfg.per_point_instance
            ? gen_instance(cfg.n, m, Rng::from(cfg.master_seed, kTagPointInstance, s).next_u64())
            : base;
    const Signal& x = point.second;
    const double sigma = sigma_for_snr(point.first, x, cfg.snr_grid_db[s]);
    const Eigen::VectorXd phi_x = analyze(point.first, x).values;

    const auto run_one = [&](int i) {
      if (cfg.redraw_per_trial) {
        const auto inst = gen_instance(
            cfg.n, m,
            Rng::from(cfg.master_seed, kTagTrialInstance, s, std::uint64_t(i)).next_u64());
        const double sig_i = sigma_for_snr(inst.first, inst.second, cfg.snr_grid_db[s]);
        const Eigen::VectorXd phi_i = analyze(inst.first, inst.second).values;
        slots[i] = execute_trial(inst.first, inst.second, phi_i, sig_i, cfg, int(s), i);
      } else {
        slots[i] = execute_trial(point.first, x, phi_x, sigma, cfg, int(s), i);
      }
    };

    if (parallel) {
#ifdef _OPENMP
      const int nthreads = cfg.jobs > 0 ? cfg.jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
      for (int i = 0; i < cfg.trials; ++i) run_one(i);
#else
      for (int i = 0; i < cfg.trials; ++i) run_one(i);
#endif
    } else {
      for (int i = 0; i < cfg.trials; ++i) run_one(i);
    }

    SweepRow row;
    row.n = cfg.n;
    row.m = m;
    row.snr_db = cfg.snr_grid_db[s];
    row.sigma = sigma;
    row.trials = cfg.trials;

    double sum_err = 0.0, sum_iters = 0.0;
    Eigen::VectorXd sum_dev = Eigen::VectorXd::Zero(cfg.n);
    int accepted = 0;
    for (int i = 0; i < cfg.trials; ++i) {
      result.trials.push_back(
          {int(s), i, slots[i].rejected, slots[i].err_sq, slots[i].iterations});
      if (slots[i].rejected) {
        ++row.rejected_trials;
        continue;
      }
      sum_err += slots[i].err_sq;
      sum_iters += slots[i].iterations;
      sum_dev += slots[i].deviation;
      ++accepted;
    }
    if (accepted == 0)
      throw NumericalError("sweep: every trial was rejected at snr_db=" +
                           std::to_string(cfg.snr_grid_db[s]));

    row.mse = sum_err / accepted;
    row.bias_sq = (sum_dev / accepted).squaredNorm();
    row.variance = row.mse - row.bias_sq;
    row.mean_iterations = sum_iters / accepted;

    const NoiseModel noise(sigma);
    row.crlb_trace = crlb_trace(point.first, x, noise);
    row.mle_crlb = mle_mse_bound(point.first, x, noise);
    row.lifted_bound = phaselsq::lifted_bound(point.first, x, noise);

    result.rows.push_back(row);
  }
  return result;
}

void write_plot_svg(const std::vector<SweepRow>& rows, const std::string& path) {
  const double w = 640, h = 400, ml = 70, mr = 20, mt = 20, mb = 50;
  double xmin = rows.front().snr_db, xmax = rows.front().snr_db;
  double ymin = 1e300, ymax = -1e300;
  // log scale: non-positive values (possible for the corrected bound at low
  // SNR, where its expansion is invalid) are left out of the plot
  const auto see = [&](double v) {
    if (v <= 0.0) return;
    const double lv = std::log10(v);
    ymin = std::min(ymin, lv);
    ymax = std::max(ymax, lv);
  };
  for (const auto& r : rows) {
    xmin = std::min(xmin, r.snr_db);
    xmax = std::max(xmax, r.snr_db);
    see(r.mse);
    see(r.crlb_trace);
    see(r.mle_crlb);
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymin > ymax) ymin = 0, ymax = 1;
  if (ymax - ymin < 1e-12) ymax = ymin + 1;

  const auto px = [&](double snr) { return ml + (snr - xmin) / (xmax - xmin) * (w - ml - mr); };
  const auto py = [&](double v) {
    return h - mb - (std::log10(v) - ymin) / (ymax - ymin) * (h - mt - mb);
  };

  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write plot file " + path);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\""
     << h - mb << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb
     << "\" stroke=\"black\"/>\n";

  struct SeriesDef {
    const char* name;
    const char* color;
    double SweepRow::*field;
  };
  const SeriesDef series[] = {{"mse", "#000000", &SweepRow::mse},
                              {"crlb_trace", "#1f77b4", &SweepRow::crlb_trace},
                              {"mle_crlb", "#d62728", &SweepRow::mle_crlb}};
  double ly = mt + 14;
  for (const auto& sd : series) {
    os << "<polyline fill=\"none\" stroke=\"" << sd.color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& r : rows)
      if (r.*sd.field > 0.0) os << px(r.snr_db) << "," << py(r.*sd.field) << " ";
    os << "\"/>\n";
    os << "<text x=\"" << w - mr - 110 << "\" y=\"" << ly << "\" fill=\"" << sd.color
       << "\" font-size=\"12\">" << sd.name << "</text>\n";
    ly += 16;
  }
  for (const auto& r : rows)
    os << "<text x=\"" << px(r.snr_db) - 10 << "\" y=\"" << h - mb + 16
       << "\" font-size=\"10\">" << r.snr_db << "</text>\n";
  os << "<text x=\"" << (w / 2 - 30) << "\" y=\"" << h - 8 << "\" font-size=\"12\">SNR [dB]"
     << "</text>\n";
  os << "<text x=\"12\" y=\"" << (h / 2) << "\" font-size=\"12\" transform=\"rotate(-90 12 "
     << (h / 2) << ")\">MSE (log scale)</text>\n";
  os << "</svg>\n";
}

const char* kCsvHeader =
    "n,m,snr_db,sigma,trials,mse,bias_sq,variance,crlb_trace,mle_crlb,lifted_bound,"
    "mean_iterations,rejected_trials";

}  // namespace

int SweepConfig::m() const {
  const double md = redundancy * n;
  const int mi = int(std::lround(md));
  if (std::abs(md - mi) > 1e-9 || mi < 1)
    throw std::invalid_argument("sweep: redundancy * n must be a positive integer");
  return mi;
}

void SweepConfig::validate() const {
  if (n < 1) throw std::invalid_argument("sweep: n must be >= 1");
  (void)m();
  if (snr_grid_db.empty()) throw std::invalid_argument("sweep: empty SNR grid");
  if (trials < 1) throw std::invalid_argument("sweep: trials must be >= 1");
  if (algorithm != 1 && algorithm != 2)
    throw std::invalid_argument("sweep: algorithm must be 1 or 2");
  if (jobs < 0) throw std::invalid_argument("sweep: jobs must be >= 0");
  solver.validate();
}

double sigma_for_snr(const Frame& frame, const Signal& x, double snr_db) {
  const double s4 = analyze(frame, x).values.array().square().sum();
  if (!(s4 > 0.0))
    throw NumericalError("sigma_for_snr: the signal has zero frame coefficients, SNR is undefined");
  return std::sqrt(s4 / (frame.m() * std::pow(10.0, snr_db / 10.0)));
}

std::pair<Frame, Signal> gen_instance(int n, int m, std::uint64_t seed) {
  if (n < 1 || m < 1) throw std::invalid_argument("gen_instance: need n >= 1 and m >= 1");
  Rng fr = Rng::from(seed, 1);
  Eigen::MatrixXd v(m, n);
  for (int k = 0; k < m; ++k)
    for (int j = 0; j < n; ++j) v(k, j) = fr.gaussian();

  Rng xr = Rng::from(seed, 2);
  Eigen::VectorXd x = xr.gaussian_vector(n);
  while (x[0] == 0.0) x = xr.gaussian_vector(n);
  if (x[0] < 0) x = -x;
  return {Frame(std::move(v)), Signal(std::move(x))};
}

SweepResult run_sweep(const SweepConfig& cfg) { return sweep_impl(cfg, true); }

SweepResult run_sweep_serial(const SweepConfig& cfg) { return sweep_impl(cfg, false); }

std::string rows_to_csv(const std::vector<SweepRow>& rows) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const auto& r : rows) {
    out += std::to_string(r.n) + ',' + std::to_string(r.m) + ',' + fmt17(r.snr_db) + ',' +
           fmt17(r.sigma) + ',' + std::to_string(r.trials) + ',' + fmt17(r.mse) + ',' +
           fmt17(r.bias_sq) + ',' + fmt17(r.variance) + ',' + fmt17(r.crlb_trace) + ',' +
           fmt17(r.mle_crlb) + ',' + fmt17(r.lifted_bound) + ',' + fmt17(r.mean_iterations) +
           ',' + std::to_string(r.rejected_trials) + '\n';
  }
  return out;
}

std::vector<SweepRow> rows_from_csv(const std::string& csv) {
  std::istringstream is(csv);
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader)
    throw std::invalid_argument("sweep csv: unexpected header");
  std::vector<SweepRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f;
    std::vector<std::string> fs;
    while (std::getline(ls, f, ',')) fs.push_back(f);
    if (fs.size() != 13) throw std::invalid_argument("sweep csv: bad field count");
    SweepRow r;
    r.n = std::stoi(fs[0]);
    r.m = std::stoi(fs[1]);
    r.snr_db = std::stod(fs[2]);
    r.sigma = std::stod(fs[3]);
    r.trials = std::stoi(fs[4]);
    r.mse = std::stod(fs[5]);
    r.bias_sq = std::stod(fs[6]);
    r.variance = std::stod(fs[7]);
    r.crlb_trace = std::stod(fs[8]);
    r.mle_crlb = std::stod(fs[9]);
    r.lifted_bound = std::stod(fs[10]);
    r.mean_iterations = std::stod(fs[11]);
    r.rejected_trials = std::stoi(fs[12]);
    rows.push_back(r);
  }
  return rows;
}

nlohmann::json rows_to_json(const std::vector<SweepRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back(nlohmann::json{{"n", r.n},
                                 {"m", r.m},
                                 {"snr_db", r.snr_db},
                                 {"sigma", r.sigma},
                                 {"trials", r.trials},
                                 {"mse", r.mse},
                                 {"bias_sq", r.bias_sq},
                                 {"variance", r.variance},
                                 {"crlb_trace", r.crlb_trace},
                                 {"mle_crlb", r.mle_crlb},
                                 {"lifted_bound", r.lifted_bound},
                                 {"mean_iterations", r.mean_iterations},
                                 {"rejected_trials", r.rejected_trials}});
  }
  return arr;
}

void emit_results(const std::vector<SweepRow>& rows, const std::string& format,
                  const std::string& out_path, const std::string& plot_dir) {
  if (rows.empty()) throw std::invalid_argument("emit_results: no rows");
  if (format != "csv" && format != "json")
    throw std::invalid_argument("emit_results: format must be csv or json");

  {
    std::ofstream os(out_path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write output file " + out_path);
    if (format == "csv")
      os << rows_to_csv(rows);
    else
      os << rows_to_json(rows).dump(2) << '\n';
  }

  if (plot_dir.empty()) return;
  std::filesystem::create_directories(plot_dir);
  std::map<std::pair<int, int>, std::vector<SweepRow>> groups;
  for (const auto& r : rows) groups[{r.n, r.m}].push_back(r);
  for (const auto& [key, group] : groups) {
    const std::string path = plot_dir + "/mse_vs_snr_n" + std::to_string(key.first) + "_m" +
                             std::to_string(key.second) + ".svg";
    write_plot_svg(group, path);
  }
}

std::vector<double> parse_snr_grid(const std::string& text) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);

  const auto num = [](const std::string& s) {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("snr grid: bad number '" + s + "'");
    return v;
  };

  if (parts.size() == 1) return {num(parts[0])};
  if (parts.size() != 3)
    throw std::invalid_argument("snr grid: expected START:STEP:END, got '" + text + "'");
  const double start = num(parts[0]), step = num(parts[1]), end = num(parts[2]);
  if (step == 0.0 || (end - start) * step < 0)
    throw std::invalid_argument("snr grid: step does not reach END from START");
  std::vector<double> grid;
  const int count = int(std::floor((end - start) / step + 0.5)) + 1;
  for (int i = 0; i < count; ++i) {
    const double v = start + i * step;
    if ((step > 0 && v > end + 1e-9 * std::abs(step)) ||
        (step < 0 && v < end - 1e-9 * std::abs(step)))
      break;
    grid.push_back(v);
  }
  return grid;
}

}  // namespace phaselsq
