#pragma once

#include <stdexcept>
#include <string>

namespace lfi {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed model construction or fn misuse (bad probabilities, unknown ids,
/// non-boolean chain tests, ...).
struct ModelError : Error {
  using Error::Error;
};

/// Hard evidence ruled out every explored completion: the upper-pass total
/// mass is exactly zero, so no normalized bounds exist.
struct InconsistentEvidence : Error {
  using Error::Error;
};

/// Trace enumeration exceeded its configured cap.
struct OracleBudgetExceeded : Error {
  using Error::Error;
};

/// Exhaustive joint would exceed the naive-summation size guard.
struct SizeGuardExceeded : Error {
  using Error::Error;
};

/// Sampler had no usable worlds (all rejected or truncated).
struct EstimateUnavailable : Error {
  using Error::Error;
};

/// Broken internal invariant; indicates a bug, not a bad model.
struct InternalError : Error {
  using Error::Error;
};

}  // namespace lfi
