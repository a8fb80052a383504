#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "phaselsq/frame.hpp"

namespace phaselsq {

enum class InjectivityMethod { partition_enumeration, full_spark };

struct InjectivityVerdict {
  bool injective = false;
  InjectivityMethod method = InjectivityMethod::partition_enumeration;
  /// On failure, a subset of row indices such that neither the subset nor
  /// its complement spans R^n.
  std::optional<std::vector<int>> witness;
};

/// Decides injectivity of the intensity map by checking every split of the
/// frame into two parts: injective iff one side of every split spans R^n.
/// Enumerates 2^(m-1) splits; throws EnumerationCapError past max_vectors.
InjectivityVerdict partition_injectivity_check(const Frame& frame, int max_vectors = 24);

struct FullSparkResult {
  bool full_spark = false;
  std::optional<std::vector<int>> violating;  // a rank-deficient n-subset
};

/// True iff every subset of n rows has full rank. Enumerates C(m, n)
/// subsets; throws EnumerationCapError past max_subsets.
FullSparkResult full_spark_check(const Frame& frame, std::uint64_t max_subsets = 1000000);

/// Smallest eigenvalue of R(x); the exact inner minimum of the two-vector
/// quadratic form over unit y at a fixed x.
double smallest_R_eigenvalue(const Frame& frame, const Signal& x);

/// Sampled upper estimate of the frame constant a0 = min over unit x of
/// the smallest eigenvalue of R(x). Seeded uniform sphere sampling followed
/// by projected-gradient refinement of the best sample; converges to the
/// true value from above as sampling refines. Always >= 0.
double a0_estimate(const Frame& frame, int num_samples, std::uint64_t seed);

}  // namespace phaselsq
