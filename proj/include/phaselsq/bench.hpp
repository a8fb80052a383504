#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "phaselsq/frame.hpp"
#include "phaselsq/solver.hpp"

namespace phaselsq {

enum class SignConvention { fixed_first_positive, oracle };

struct SweepConfig {
  int n = 10;
  double redundancy = 3.0;  // m = redundancy * n, must be integral
  std::vector<double> snr_grid_db;
  int trials = 1000;
  int algorithm = 2;  // 1 or 2
  SignConvention sign_convention = SignConvention::fixed_first_positive;
  std::uint64_t master_seed = 0;
  SolverConfig solver{};
  int jobs = 0;                     // worker threads; 0 = library default
  bool per_point_instance = false;  // fresh (frame, x) at every SNR point
  bool redraw_per_trial = false;    // fresh instance every trial (robustness studies)

  int m() const;
  void validate() const;
};

struct SweepRow {
  int n = 0;
  int m = 0;
  double snr_db = 0.0;
  double sigma = 0.0;
  int trials = 0;
  double mse = 0.0;
  double bias_sq = 0.0;
  double variance = 0.0;
  double crlb_trace = 0.0;
  double mle_crlb = 0.0;
  double lifted_bound = 0.0;
  double mean_iterations = 0.0;
  int rejected_trials = 0;
};

struct TrialRecord {
  int snr_index = 0;
  int trial = 0;
  bool rejected = false;
  double err_sq = 0.0;
  int iterations = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<TrialRecord> trials;
};

/// Noise level hitting a target SNR for one instance:
/// sigma = sqrt(sum_k <x,f_k>^4 / (m * 10^(snr_db/10))).
double sigma_for_snr(const Frame& frame, const Signal& x, double snr_db);

/// Seeded standard-normal frame and signal; the signal's first coordinate is
/// made positive (redrawn in the zero-measure case where it is exactly zero).
/// Identical seeds produce bit-identical instances.
std::pair<Frame, Signal> gen_instance(int n, int m, std::uint64_t seed);

/// Full Monte Carlo sweep: per SNR point, fixes an instance, calibrates
/// sigma, runs `trials` independent noise realizations through the selected
/// algorithm, sign-aligns each estimate, and aggregates the error moments
/// next to the bounds evaluated at the same (frame, x, sigma). Trials run in
/// parallel; per-trial noise comes from substreams keyed by
/// (master_seed, snr_index, trial), and aggregation is an ordered reduction,
/// so the output is byte-identical for every worker count.
SweepResult run_sweep(const SweepConfig& cfg);

/// Serial reference executor; bit-identical to run_sweep.
SweepResult run_sweep_serial(const SweepConfig& cfg);

/// Writes rows as CSV or JSON to out_path; when plot_dir is non-empty also
/// renders one SVG per (n, m) group with log-scale mse / crlb / mle-crlb
/// polylines against SNR.
void emit_results(const std::vector<SweepRow>& rows, const std::string& format,
                  const std::string& out_path, const std::string& plot_dir = "");

std::string rows_to_csv(const std::vector<SweepRow>& rows);
std::vector<SweepRow> rows_from_csv(const std::string& csv);
nlohmann::json rows_to_json(const std::vector<SweepRow>& rows);

/// "start:step:end" (inclusive) or a single value.
std::vector<double> parse_snr_grid(const std::string& text);

}  // namespace phaselsq
