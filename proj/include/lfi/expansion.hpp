#pragma once

#include <functional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lfi/model.hpp"
#include "lfi/value.hpp"

namespace lfi {

/// Per-run expansion record: for every visited element, the maximum depth
/// requested so far and the range computed at that depth (canonically ordered,
/// Star last). Negative recorded depths are normalized to -1, which always
/// pairs with the range {Star}.
class ExpansionState {
 public:
  bool visited(ElementId id) const { return info_.count(id.raw) != 0; }
  int depth_of(ElementId id) const;
  const std::vector<ExtendedValue>& range_of(ElementId id) const;
  const std::set<ElementId>& back_pointers(ElementId id) const;

  /// Visited element ids in ascending order; every one of them is relevant
  /// (contributes a variable and a definition factor), including depth -1 ones.
  std::vector<ElementId> relevant_ids() const;
  std::size_t num_relevant() const { return info_.size(); }

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  /// Evidence targets expanded in this state (any recorded depth).
  std::vector<ElementId> expanded_evidence_targets(std::span<const Evidence> evidence) const;

  /// When set, receives one line per completed (re-)expansion:
  /// "(step) @id Kind depth -> {v1, v2, *}".
  void set_trace_sink(std::function<void(const std::string&)> sink) {
    trace_sink_ = std::move(sink);
  }

 private:
  friend class Expander;
  struct Info {
    int depth = -1;
    std::vector<ExtendedValue> range;
    std::set<ElementId> back_pointers;
  };
  std::unordered_map<std::uint64_t, Info> info_;
  bool frozen_ = false;
  std::size_t trace_step_ = 0;
  std::function<void(const std::string&)> trace_sink_;
};

/// Single recursive pass of the depth-bounded expansion rules rooted at `e`.
/// Already-visited elements whose recorded depth covers a request are reused
/// rather than recomputed, which on tree-shaped programs is exact; programs
/// with shared sub-elements need expand_with_backtracking for a consistent
/// fixpoint. Returns the computed range of `e`.
std::vector<ExtendedValue> expand_basic(ExpansionState& state, ProgramRegistry& registry,
                                        ElementId e, int depth);

/// Worklist fixpoint over (element, depth) requests: a request covered by the
/// recorded depth reuses the cached range; a deeper request re-expands, and a
/// range change re-enqueues every recorded reader at its recorded depth.
/// Pending requests for one element coalesce, keeping the maximum depth.
void expand_with_backtracking(ExpansionState& state, ProgramRegistry& registry,
                              std::span<const std::pair<ElementId, int>> roots);

/// Expands the queries at `depth`, then iteratively pulls in evidence whose
/// transitive argument ancestry touches anything expanded so far, one depth
/// lower per pull-in round, until nothing new enters or the round depth drops
/// below zero. Evidence farther than that stays unexpanded and contributes no
/// factors.
void expand_lazy_evidence(ExpansionState& state, ProgramRegistry& registry,
                          std::span<const ElementId> queries, int depth,
                          std::span<const Evidence> evidence);
void expand_lazy_evidence(ExpansionState& state, ProgramRegistry& registry,
                          std::span<const ElementId> queries, int depth);

}  // namespace lfi
