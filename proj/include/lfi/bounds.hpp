#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lfi/bp.hpp"
#include "lfi/factor.hpp"
#include "lfi/model.hpp"
#include "lfi/value.hpp"

namespace lfi {

enum class Algorithm { Ve, Bp };

const char* algorithm_name(Algorithm a);

struct ValueInterval {
  double lower = 0.0;
  double upper = 1.0;
};

/// Normalized probability bounds for one query variable. Regular values carry
/// an interval each; the not-yet-explored remainder is summarized by an upper
/// bound on its total mass.
class Bounds {
 public:
  Bounds() = default;
  Bounds(std::map<Value, ValueInterval, ValueLess> per_value, double star_mass_upper);

  const std::map<Value, ValueInterval, ValueLess>& per_value() const { return per_value_; }
  double star_mass_upper() const { return star_mass_upper_; }
  /// Sum of the lower bounds of the values present in per_value().
  double lower_sum() const { return lower_sum_; }

  /// Interval for a value, whether or not it appeared in the query range.
  /// Absent values get (0, 1 - lower_sum()) clamped to [0, 1].
  ValueInterval for_value(const Value& v) const;

  /// Largest upper-lower width across the values in per_value(). When the
  /// range held nothing but unexplored mass the bounds are vacuous: 1.
  double gap() const;

 private:
  std::map<Value, ValueInterval, ValueLess> per_value_;
  double star_mass_upper_ = 0.0;
  double lower_sum_ = 0.0;
};

/// Turn an unnormalized unary interval factor over the query's extended range
/// into normalized bounds. Throws InconsistentEvidence when the total upper
/// mass is zero. Invariant under scaling both tables by a common positive
/// constant.
Bounds finalize(const Factor& query_factor);

struct DepthResult {
  int depth = 0;
  Bounds bounds;
  double gap = 1.0;
  std::size_t num_variables = 0;
  std::size_t num_factors = 0;
  double elapsed_ms = 0.0;
  Algorithm algorithm = Algorithm::Ve;
  bool approximate = false;
  bool converged = true;
  /// Tightening vs. the previous depth was verified. Skipped (false) for the
  /// first depth, for approximate runs, and when the set of expanded evidence
  /// targets changed between depths.
  bool monotonicity_checked = false;
  bool monotonicity_ok = true;
};

struct AnytimeOptions {
  Algorithm algorithm = Algorithm::Ve;
  BpOptions bp;
  double monotonicity_tolerance = 1e-12;
  /// Invoked after each completed depth, before the next one starts.
  std::function<void(const DepthResult&)> on_result;
  /// Installed on each depth's expansion, one line per (re-)expanded element.
  std::function<void(const std::string&)> trace_sink;
};

struct AnytimeFailure {
  int depth = 0;
  std::string message;
};

struct AnytimeOutcome {
  std::vector<DepthResult> results;
  /// Set when a depth aborted (inconsistent evidence); earlier depths stay.
  std::optional<AnytimeFailure> failure;
  bool ok() const { return !failure.has_value(); }
};

/// Iterative deepening: each depth gets a fresh expansion, evidence pull-in,
/// factor build, a solver pass and finalization. Depths must be nonnegative
/// and strictly increasing. Evidence is taken from the registry.
AnytimeOutcome anytime_run(ProgramRegistry& registry, ElementId query,
                           std::span<const int> depths,
                           const AnytimeOptions& options = {});

}  // namespace lfi
