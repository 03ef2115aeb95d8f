#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "lfi/factor.hpp"
#include "lfi/model.hpp"
#include "lfi/value.hpp"

namespace lfi {

struct EnumerateOptions {
  std::uint64_t world_cap = 1'000'000;
};

/// Exhaustive reference result: expands the query (with evidence pull-in)
/// exactly like the main pipeline, then enumerates worlds by branching on the
/// atomic elements a world actually reads, evaluating every element at its
/// recorded depth (depth -1 elements yield Star). Returns the accumulated
/// unnormalized weight interval per extended query value, over the query's
/// recorded range. Throws OracleBudgetExceeded past world_cap finished worlds.
Factor enumerate_bounds(ProgramRegistry& registry, ElementId query,
                        std::span<const Evidence> evidence, int depth,
                        const EnumerateOptions& options = {});

/// Second reference: multiplies every factor into the full joint with interval
/// arithmetic and sums out everything but the query. Throws SizeGuardExceeded
/// when the joint table would exceed size_guard entries.
Factor naive_sum(std::span<const Factor> factors, ElementId query_var,
                 std::size_t size_guard = std::size_t{1} << 22);

}  // namespace lfi
