#pragma once

#include <cstdint>
#include <span>

#include "lfi/model.hpp"
#include "lfi/value.hpp"

namespace lfi {

struct SampleEstimate {
  double estimate = 0.0;        // positives / usable
  std::uint64_t samples = 0;    // worlds drawn
  std::uint64_t usable = 0;     // resolved within budget and accepted
  std::uint64_t positives = 0;  // usable worlds where query == target
  std::uint64_t truncated = 0;  // query or an evidence target outran the budget
  std::uint64_t rejected = 0;   // observation mismatch or soft-constraint rejection
};

/// Forward-sampling cross-check, independent of the factor pipeline: draws
/// worlds with an explicit counter-based generator, evaluates query and
/// evidence targets under a hard depth budget, applies rejection for the
/// evidence and reports how often the query hit `target`. Throws
/// EstimateUnavailable when not a single world was usable.
SampleEstimate sample_estimate(ProgramRegistry& registry, ElementId query,
                               std::span<const Evidence> evidence, const Value& target,
                               int depth_budget, std::uint64_t num_samples,
                               std::uint64_t seed);

}  // namespace lfi
