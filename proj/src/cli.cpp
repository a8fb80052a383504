#include "phaselsq/cli.hpp"

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "phaselsq/bench.hpp"
#include "phaselsq/crlb.hpp"
#include "phaselsq/frame.hpp"
#include "phaselsq/injectivity.hpp"
#include "phaselsq/solver.hpp"

namespace phaselsq::cli {

namespace {

using nlohmann::json;

json load_json(const std::string& path, const std::string& flag) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument(flag + ": cannot open file '" + path + "'");
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument(flag + ": malformed JSON in '" + path + "': " + e.what());
  }
  return j;
}

template <typename T>
T load_as(const std::string& path, const std::string& flag) {
  try {
    return load_json(path, flag).get<T>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(flag + ": bad contents in '" + path + "': " + e.what());
  }
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write file '" + path + "'");
  os << contents;
}

void diag_usage(std::ostream& err, const std::string& msg, bool json_fmt) {
  if (json_fmt)
    err << json{{"error", "usage"}, {"message", msg}}.dump() << "\n";
  else
    err << "error: " << msg << "\n";
}

// Numerical failures always get a machine-parseable line.
int diag_numerical(std::ostream& err, const NumericalError& e) {
  json j{{"error", "numerical"}, {"message", e.what()}};
  if (const auto* u = dynamic_cast<const UnidentifiableError*>(&e))
    j["null_direction"] = u->null_direction;
  err << j.dump() << "\n";
  return 2;
}

std::string fmt4(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct SolverFlags {
  int algorithm = 2;
  SolverConfig cfg{};
  std::string mu_policy = "max1";

  void attach(CLI::App* app, bool with_algorithm = true) {
    if (with_algorithm)
      app->add_option("--algorithm", algorithm, "solver variant: 1 (final iterate) or 2 (best residual)")
          ->check(CLI::IsMember({1, 2}))
          ->capture_default_str();
    app->add_option("--alpha", cfg.alpha, "initialization scale in (0, 1]")->capture_default_str();
    app->add_option("--decay", cfg.lambda_decay, "per-step lambda divisor, > 1")
        ->capture_default_str();
    app->add_option("--eps", cfg.eps, "stopping tolerance (stall and lambda floor)")
        ->capture_default_str();
    app->add_option("--tmax", cfg.t_max, "iteration cap")->capture_default_str();
    app->add_option("--min-steps", cfg.min_steps, "steps before the stall test applies")
        ->capture_default_str();
    app->add_option("--mu-policy", mu_policy, "mu schedule: max1 | lambda | const:C")
        ->capture_default_str();
  }

  SolverConfig config() const {
    SolverConfig c = cfg;
    c.mu_policy = MuPolicy::parse(mu_policy);
    c.validate();
    return c;
  }
};

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Signal reconstruction from squared frame coefficients, with "
               "estimation-bound benchmarking"};
  app.name("phaselsq");
  app.require_subcommand(1);

  std::string format_flag = "csv";
  const auto add_format = [&format_flag](CLI::App* sub, const char* what) {
    sub->add_option("--format", format_flag, what)
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
  };

  // gen-frame
  auto* gen = app.add_subcommand("gen-frame", "generate a random Gaussian frame (and optionally "
                                              "a paired signal) as JSON");
  int gen_n = 0, gen_m = 0;
  std::uint64_t gen_seed = 0;
  std::string gen_out, gen_signal_out;
  gen->add_option("--n", gen_n, "ambient dimension")->required();
  gen->add_option("--m", gen_m, "number of frame vectors")->required();
  gen->add_option("--seed", gen_seed, "random seed")->capture_default_str();
  gen->add_option("--out", gen_out, "output frame JSON path")->required();
  gen->add_option("--signal-out", gen_signal_out,
                  "also write the paired random signal (first coordinate positive)");
  add_format(gen, "diagnostic format on stderr");

  // analyze
  auto* ana = app.add_subcommand("analyze", "squared frame coefficients of a signal");
  std::string ana_frame, ana_signal, ana_out;
  ana->add_option("--frame", ana_frame, "frame JSON path")->required();
  ana->add_option("--signal", ana_signal, "signal JSON path")->required();
  ana->add_option("--out", ana_out, "output JSON path (default: stdout)");
  add_format(ana, "diagnostic format on stderr");

  // check
  auto* chk = app.add_subcommand("check", "injectivity diagnostics: partition enumeration, "
                                          "full-spark certification, a0 estimate");
  std::string chk_frame;
  int chk_a0_samples = 2000;
  std::uint64_t chk_seed = 0;
  chk->add_option("--frame", chk_frame, "frame JSON path")->required();
  chk->add_option("--a0-samples", chk_a0_samples, "sphere samples for the a0 estimate")
      ->capture_default_str();
  chk->add_option("--seed", chk_seed, "seed for a0 sampling")->capture_default_str();
  add_format(chk, "diagnostic format on stderr");

  // solve
  auto* sol = app.add_subcommand("solve", "reconstruct a signal from (possibly noisy) squared "
                                          "coefficients");
  std::string sol_frame, sol_meas, sol_out, sol_trace;
  SolverFlags sol_flags;
  sol->add_option("--frame", sol_frame, "frame JSON path")->required();
  sol->add_option("--measurements", sol_meas, "intensity JSON path")->required();
  sol_flags.attach(sol);
  sol->add_option("--out", sol_out, "result JSON path (default: stdout only)");
  sol->add_option("--trace", sol_trace, "write the per-step trace CSV (t,lambda,mu,j,L)");
  add_format(sol, "diagnostic format on stderr");

  // crlb
  auto* crl = app.add_subcommand("crlb", "estimation bounds at a (frame, signal, sigma) triple");
  std::string crl_frame, crl_signal, crl_out;
  double crl_sigma = 1.0;
  bool crl_lifted = false, crl_mle = false;
  crl->add_option("--frame", crl_frame, "frame JSON path")->required();
  crl->add_option("--signal", crl_signal, "signal JSON path")->required();
  crl->add_option("--sigma", crl_sigma, "noise standard deviation")->required();
  crl->add_flag("--lifted", crl_lifted, "include the rank-1 lifted bound");
  crl->add_flag("--mle", crl_mle, "include the bias-corrected quantities (delta, Delta, "
                                  "MLE mean and MSE bound)");
  crl->add_option("--out", crl_out, "report JSON path (default: stdout)");
  add_format(crl, "diagnostic format on stderr");

  // bench
  auto* ben = app.add_subcommand("bench", "Monte Carlo SNR sweep with CRLB comparison");
  int ben_n = 0, ben_trials = 0, ben_jobs = 0;
  double ben_redundancy = 3.0;
  std::string ben_snr = "-20:10:80";
  std::string ben_sign = "fixed", ben_out, ben_plots;
  std::uint64_t ben_seed = 0;
  bool ben_per_point = false, ben_redraw = false;
  SolverFlags ben_flags;
  ben->add_option("--n", ben_n, "signal dimension")->required();
  ben->add_option("--redundancy", ben_redundancy, "m/n ratio")->capture_default_str();
  ben->add_option("--snr-db", ben_snr, "SNR grid in dB, START:STEP:END inclusive")
      ->capture_default_str();
  ben->add_option("--trials", ben_trials,
                  "noise realizations per SNR point (default: 100 for --algorithm 1, "
                  "1000 for --algorithm 2)");
  ben_flags.attach(ben);
  ben->add_option("--sign", ben_sign, "sign convention: fixed (first coordinate positive) or "
                                      "oracle (closest of +/-)")
      ->check(CLI::IsMember({"fixed", "oracle"}))
      ->capture_default_str();
  ben->add_option("--seed", ben_seed, "master seed")->capture_default_str();
  ben->add_option("--out", ben_out, "output table path")->required();
  ben->add_option("--plots", ben_plots, "directory for SVG plots");
  add_format(ben, "output table format (and stderr diagnostics)");
  ben->add_option("--jobs", ben_jobs, "worker threads for trials (0 = all cores)")
      ->capture_default_str();
  ben->add_flag("--per-point-instance", ben_per_point, "fresh (frame, signal) at every SNR point");
  ben->add_flag("--redraw-per-trial", ben_redraw, "fresh instance every trial");

  bool json_diag = false;
  for (size_t i = 0; i < args.size(); ++i)
    if (args[i] == "--format=json" || (args[i] == "--format" && i + 1 < args.size() &&
                                       args[i + 1] == "json"))
      json_diag = true;

  std::vector<std::string> argv_vec;
  argv_vec.push_back("phaselsq");
  argv_vec.insert(argv_vec.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_vec) argv.push_back(a.c_str());

  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs[0]->help());
    return 0;
  } catch (const CLI::ParseError& e) {
    diag_usage(err, e.what(), json_diag);
    return 1;
  }
  json_diag = format_flag == "json";

  try {
    if (gen->parsed()) {
      const auto [frame, signal] = gen_instance(gen_n, gen_m, gen_seed);
      write_file(gen_out, json(frame).dump(2) + "\n");
      if (!gen_signal_out.empty()) write_file(gen_signal_out, json(signal).dump(2) + "\n");
      out << "wrote " << gen_out << "\n";
      return 0;
    }

    if (ana->parsed()) {
      const auto frame = load_as<Frame>(ana_frame, "--frame");
      const auto signal = load_as<Signal>(ana_signal, "--signal");
      const json j = analyze(frame, signal);
      if (ana_out.empty())
        out << j.dump(2) << "\n";
      else
        write_file(ana_out, j.dump(2) + "\n");
      return 0;
    }

    if (chk->parsed()) {
      const auto frame = load_as<Frame>(chk_frame, "--frame");
      std::optional<FullSparkResult> spark;
      try {
        spark = full_spark_check(frame);
      } catch (const EnumerationCapError&) {
      }
      const std::string spark_text =
          spark ? (spark->full_spark ? "true" : "false") : "skipped (over cap)";

      std::string verdict;
      try {
        const InjectivityVerdict v = partition_injectivity_check(frame);
        verdict = std::string(v.injective ? "true" : "false") + " (partition)";
      } catch (const EnumerationCapError&) {
        // fall back to the full-spark criterion, sufficient once m >= 2n-1
        if (spark && spark->full_spark && frame.m() >= 2 * frame.n() - 1)
          verdict = "true (full-spark sufficiency)";
        else if (spark && !spark->full_spark && frame.m() == 2 * frame.n() - 1)
          verdict = "false (full-spark)";
        else
          verdict = "unknown (enumeration over cap)";
      }
      const double a0 = a0_estimate(frame, chk_a0_samples, chk_seed);
      out << "injective: " << verdict << ", full-spark: " << spark_text << ", a0≈" << fmt4(a0)
          << "\n";
      return 0;
    }

    if (sol->parsed()) {
      const auto frame = load_as<Frame>(sol_frame, "--frame");
      const auto y = load_as<Intensities>(sol_meas, "--measurements");
      const SolverConfig cfg = sol_flags.config();

      const SolverState st = init_state(frame, y, cfg);
      if (st.zero_solution) {
        err << json{{"error", "numerical"},
                    {"message", "largest eigenvalue of Q is not positive; the least-squares "
                                "optimum is the zero vector"}}
                   .dump()
            << "\n";
        return 2;
      }

      const SolverResult res = sol_flags.algorithm == 1 ? run_algorithm1(frame, y, cfg)
                                                        : run_algorithm2(frame, y, cfg);
      json j{{"estimate", json(res.estimate)},
             {"residual", res.residual},
             {"iterations", res.iterations},
             {"stop_reason", stop_reason_name(res.stop_reason)}};
      out << j.dump(2) << "\n";
      if (!sol_out.empty()) write_file(sol_out, j.dump(2) + "\n");
      if (!sol_trace.empty()) {
        std::ostringstream ts;
        write_trace_csv(ts, res.trace);
        write_file(sol_trace, ts.str());
      }
      return 0;
    }

    if (crl->parsed()) {
      const auto frame = load_as<Frame>(crl_frame, "--frame");
      const auto signal = load_as<Signal>(crl_signal, "--signal");
      const NoiseModel noise(crl_sigma);
      const BoundsReport report = compute_bounds(frame, signal, noise);
      json j = bounds_to_json(report);
      if (!crl_lifted) j.erase("lifted_bound");
      if (!crl_mle) {
        j.erase("delta");
        j.erase("delta_matrix");
        j.erase("mle_mse_bound");
        j.erase("mle_mean");
      }
      if (crl_out.empty())
        out << j.dump(2) << "\n";
      else
        write_file(crl_out, j.dump(2) + "\n");
      return 0;
    }

    if (ben->parsed()) {
      SweepConfig cfg;
      cfg.n = ben_n;
      cfg.redundancy = ben_redundancy;
      cfg.snr_grid_db = parse_snr_grid(ben_snr);
      cfg.algorithm = ben_flags.algorithm;
      cfg.trials = ben_trials > 0 ? ben_trials : (cfg.algorithm == 1 ? 100 : 1000);
      cfg.sign_convention = ben_sign == "oracle" ? SignConvention::oracle
                                                 : SignConvention::fixed_first_positive;
      cfg.master_seed = ben_seed;
      cfg.solver = ben_flags.config();
      cfg.jobs = ben_jobs;
      cfg.per_point_instance = ben_per_point;
      cfg.redraw_per_trial = ben_redraw;
      cfg.validate();

      const SweepResult res = run_sweep(cfg);
      emit_results(res.rows, format_flag, ben_out, ben_plots);
      out << "wrote " << ben_out << " (" << res.rows.size() << " rows)\n";
      return 0;
    }

    diag_usage(err, "no subcommand given", json_diag);
    return 1;
  } catch (const NumericalError& e) {
    return diag_numerical(err, e);
  } catch (const EnumerationCapError& e) {
    err << json{{"error", "infeasible"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    diag_usage(err, e.what(), json_diag);
    return 1;
  } catch (const std::exception& e) {
    diag_usage(err, e.what(), json_diag);
    return 1;
  }
}

}  // namespace phaselsq::cli
