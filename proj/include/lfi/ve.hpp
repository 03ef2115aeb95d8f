#pragma once

#include <span>
#include <vector>

#include "lfi/factor.hpp"

namespace lfi {

/// Greedy min-fill ordering over the interaction graph of `factors`, excluding
/// the query variable. Ties break toward the smaller table created by the
/// elimination, then toward the smaller element id, so the order is a pure
/// function of its inputs.
std::vector<ElementId> elimination_order(std::span<const Factor> factors,
                                         ElementId query_var);

/// Sum-product variable elimination run twice (once on the lo tables, once on
/// the hi tables) along one shared order; returns the paired interval factor
/// over the query variable. Scalar residues of disconnected components are
/// folded into the result.
Factor run_ve(std::span<const Factor> factors, ElementId query_var);

/// Same passes along a caller-supplied order; the order must cover exactly the
/// non-query variables appearing in the factors.
Factor run_ve_with_order(std::span<const Factor> factors, ElementId query_var,
                         std::span<const ElementId> order);

}  // namespace lfi
