#pragma once

#include <optional>
#include <span>

#include "lfi/factor.hpp"

namespace lfi {

struct BpOptions {
  int max_iterations = 100;
  double tolerance = 1e-9;
  double damping = 0.0;  // in [0,1): share of the old message kept per update
  /// Unset means auto: normalize on cyclic graphs, keep raw messages on trees
  /// (raw messages make tree results equal the elimination answer exactly).
  /// When normalizing, the lo and the hi half of a message share the hi-sum
  /// normalizer so their entrywise relationship survives.
  std::optional<bool> normalize_messages;
  /// Accumulate in log space; useful for deep graphs, off by default to keep
  /// results bit-comparable with the elimination path.
  bool log_domain = false;
};

struct BpResult {
  Factor query_factor;  // interval beliefs over the query variable
  bool converged = false;
  int iterations = 0;
  /// True on cyclic graphs: loopy beliefs come without soundness guarantees
  /// and are excluded from bound-soundness checks.
  bool approximate = false;
};

/// Sum-product message passing on the bipartite factor graph with a flooding
/// schedule. Hitting the iteration cap is reported via converged=false, not an
/// error. Residues of components not containing the query (and variable-free
/// factors) are folded into the returned beliefs, mirroring run_ve.
BpResult run_bp(std::span<const Factor> factors, ElementId query_var,
                const BpOptions& options = {});

}  // namespace lfi
