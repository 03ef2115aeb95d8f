#include "lfi/bounds.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>

#include "lfi/errors.hpp"
#include "lfi/expansion.hpp"
#include "lfi/ve.hpp"

namespace lfi {

const char* algorithm_name(Algorithm a) {
  return a == Algorithm::Ve ? "ve" : "bp";
}

Bounds::Bounds(std::map<Value, ValueInterval, ValueLess> per_value, double star_mass_upper)
    : per_value_(std::move(per_value)), star_mass_upper_(star_mass_upper) {
  for (const auto& [value, interval] : per_value_) lower_sum_ += interval.lower;
}

ValueInterval Bounds::for_value(const Value& v) const {
  auto it = per_value_.find(v);
  if (it != per_value_.end()) return it->second;
  const double upper = std::clamp(1.0 - lower_sum_, 0.0, 1.0);
  return ValueInterval{0.0, upper};
}

double Bounds::gap() const {
  if (per_value_.empty()) return star_mass_upper_ > 0.0 ? 1.0 : 0.0;
  double g = 0.0;
  for (const auto& [value, interval] : per_value_) {
    g = std::max(g, interval.upper - interval.lower);
  }
  return g;
}

Bounds finalize(const Factor& query_factor) {
  if (query_factor.vars().size() != 1) {
    throw InternalError("finalize expects a unary factor, got arity " +
                        std::to_string(query_factor.vars().size()));
  }
  const Var& var = query_factor.vars()[0];

  double total_upper = 0.0;
  for (std::size_t i = 0; i < var.arity(); ++i) total_upper += query_factor.hi_at(i);
  if (!(total_upper > 0.0)) {
    throw InconsistentEvidence("all query mass excluded by the evidence");
  }

  std::map<Value, ValueInterval, ValueLess> per_value;
  double star_mass_upper = 0.0;
  double lower_sum = 0.0;
  for (std::size_t i = 0; i < var.arity(); ++i) {
    const ExtendedValue& v = var.range[i];
    if (v.is_star()) {
      star_mass_upper = query_factor.hi_at(i) / total_upper;
      continue;
    }
    const double lower = query_factor.lo_at(i) / total_upper;
    per_value.emplace(v.value(), ValueInterval{lower, 1.0});
    lower_sum += lower;
  }
  for (auto& [value, interval] : per_value) {
    // Everything the other values are guaranteed to get caps this one.
    const double upper = 1.0 - (lower_sum - interval.lower);
    interval.upper = std::clamp(upper, interval.lower, 1.0);
  }
  return Bounds(std::move(per_value), star_mass_upper);
}

namespace {

bool tightened(const Bounds& prev, const Bounds& next, double tol) {
  std::vector<Value> keys;
  for (const auto& [value, interval] : prev.per_value()) keys.push_back(value);
  for (const auto& [value, interval] : next.per_value()) keys.push_back(value);
  std::sort(keys.begin(), keys.end(), ValueLess{});
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  for (const Value& v : keys) {
    const ValueInterval a = prev.for_value(v);
    const ValueInterval b = next.for_value(v);
    if (b.lower < a.lower - tol) return false;
    if (b.upper > a.upper + tol) return false;
  }
  return true;
}

}  // namespace

AnytimeOutcome anytime_run(ProgramRegistry& registry, ElementId query,
                           std::span<const int> depths, const AnytimeOptions& options) {
  for (std::size_t i = 0; i < depths.size(); ++i) {
    if (depths[i] < 0) throw ModelError("depth schedule entries must be nonnegative");
    if (i > 0 && depths[i] <= depths[i - 1]) {
      throw ModelError("depth schedule must be strictly increasing");
    }
  }

  AnytimeOutcome outcome;
  std::optional<Bounds> prev_bounds;
  std::vector<ElementId> prev_evidence;
  const std::array<ElementId, 1> queries{query};

  for (const int depth : depths) {
    const auto start = std::chrono::steady_clock::now();

    ExpansionState state;
    if (options.trace_sink) state.set_trace_sink(options.trace_sink);
    expand_lazy_evidence(state, registry, queries, depth, registry.evidence());
    state.freeze();
    FactorBuild build = build_all_factors(state, registry, registry.evidence());

    DepthResult r;
    r.depth = depth;
    r.algorithm = options.algorithm;
    r.num_variables = build.variables.size();
    r.num_factors = build.factors.size();

    Factor query_factor = Factor::scalar(0.0, 0.0);
    if (options.algorithm == Algorithm::Ve) {
      query_factor = run_ve(build.factors, query);
    } else {
      BpResult bp = run_bp(build.factors, query, options.bp);
      query_factor = std::move(bp.query_factor);
      r.approximate = bp.approximate;
      r.converged = bp.converged;
    }

    try {
      r.bounds = finalize(query_factor);
    } catch (const InconsistentEvidence& ex) {
      outcome.failure = AnytimeFailure{depth, ex.what()};
      return outcome;
    }
    r.gap = r.bounds.gap();

    std::vector<ElementId> ev_targets = state.expanded_evidence_targets(registry.evidence());
    std::sort(ev_targets.begin(), ev_targets.end());
    if (prev_bounds && options.algorithm == Algorithm::Ve && ev_targets == prev_evidence) {
      r.monotonicity_checked = true;
      r.monotonicity_ok = tightened(*prev_bounds, r.bounds, options.monotonicity_tolerance);
    }
    prev_bounds = r.bounds;
    prev_evidence = std::move(ev_targets);

    const auto end = std::chrono::steady_clock::now();
    r.elapsed_ms = std::chrono::duration<double, std::milli>(end - start).count();

    if (options.on_result) options.on_result(r);
    outcome.results.push_back(std::move(r));
  }
  return outcome;
}

}  // namespace lfi
