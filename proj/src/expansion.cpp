#include "lfi/expansion.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

#include "lfi/errors.hpp"

namespace lfi {

int ExpansionState::depth_of(ElementId id) const {
  auto it = info_.find(id.raw);
  if (it == info_.end()) throw InternalError("depth_of on unvisited element");
  return it->second.depth;
}

const std::vector<ExtendedValue>& ExpansionState::range_of(ElementId id) const {
  auto it = info_.find(id.raw);
  if (it == info_.end()) throw InternalError("range_of on unvisited element");
  return it->second.range;
}

const std::set<ElementId>& ExpansionState::back_pointers(ElementId id) const {
  static const std::set<ElementId> kEmpty;
  auto it = info_.find(id.raw);
  return it == info_.end() ? kEmpty : it->second.back_pointers;
}

std::vector<ElementId> ExpansionState::relevant_ids() const {
  std::vector<ElementId> ids;
  ids.reserve(info_.size());
  for (const auto& [raw, info] : info_) ids.push_back(ElementId{raw});
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<ElementId> ExpansionState::expanded_evidence_targets(
    std::span<const Evidence> evidence) const {
  std::vector<ElementId> out;
  for (const Evidence& ev : evidence) {
    if (visited(ev.target)) out.push_back(ev.target);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

std::vector<ExtendedValue> sorted_range(std::vector<ExtendedValue> values) {
  std::sort(values.begin(), values.end(), ExtendedValueLess{});
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return values;
}

}  // namespace

/// Shared engine behind the three expansion entry points. Holds the pending
/// worklist; the state object carries everything that outlives a call.
class Expander {
 public:
  Expander(ExpansionState& state, ProgramRegistry& registry)
      : state_(state), registry_(registry) {}

  void request(ElementId e, int depth) {
    auto it = pending_.find(e.raw);
    if (it != pending_.end()) {
      it->second = std::max(it->second, depth);
      return;
    }
    pending_.emplace(e.raw, depth);
    queue_.push_back(e);
  }

  void drain() {
    while (!queue_.empty()) {
      ElementId e = queue_.front();
      queue_.pop_front();
      auto it = pending_.find(e.raw);
      const int depth = it->second;
      pending_.erase(it);
      expand(e, depth);
    }
  }

  void discard_pending() {
    queue_.clear();
    pending_.clear();
  }

  /// Expands e at max(depth, recorded depth), recording back pointers from
  /// every dependency read. A changed range re-enqueues recorded readers at
  /// their recorded depths.
  const std::vector<ExtendedValue>& expand(ElementId e, int depth) {
    if (state_.frozen()) throw InternalError("expansion state is frozen");
    auto& info = state_.info_[e.raw];
    // A stored range is never empty (at least {Star}), so an empty one marks a
    // freshly created entry.
    const bool fresh = info.range.empty();
    const int req = depth < 0 ? -1 : depth;
    const int target = fresh ? req : std::max(req, info.depth);
    info.depth = target;
    if (fresh) {
      // Provisional answer for reads that arrive through a dependency cycle
      // before this expansion finishes. The comparison below re-enqueues such
      // readers whenever the settled range differs.
      info.range.push_back(ExtendedValue::star());
    }

    std::vector<ExtendedValue> range;
    if (target < 0) {
      range.push_back(ExtendedValue::star());
    } else {
      const Element& elem = registry_.element(e);
      switch (elem.kind()) {
        case Element::Kind::Constant:
        case Element::Kind::Flip:
        case Element::Kind::Select: {
          for (auto& [v, w] : elem.atomic_support()) range.emplace_back(v);
          break;
        }
        case Element::Kind::Apply: {
          range = expand_apply(e, elem, target);
          break;
        }
        case Element::Kind::Chain: {
          range = expand_chain(e, elem, target);
          break;
        }
      }
      range = sorted_range(std::move(range));
    }

    auto& slot = state_.info_[e.raw];  // re-find: recursion may rehash the map
    const bool changed = slot.range != range;
    if (changed) slot.range = std::move(range);
    trace(e, slot);
    if (changed) {
      for (ElementId reader : slot.back_pointers) {
        request(reader, state_.info_[reader.raw].depth);
      }
    }
    return state_.info_[e.raw].range;
  }

 private:
  /// Reads a dependency's range at the needed depth, expanding it on a cache
  /// miss, and records reader for backtracking. A mid-expansion dependency
  /// (cyclic read) returns its possibly stale range; the recorded back pointer
  /// re-enqueues the reader once the dependency settles.
  std::vector<ExtendedValue> read_dep(ElementId dep, int depth, ElementId reader) {
    auto it = state_.info_.find(dep.raw);
    if (it != state_.info_.end() && it->second.depth >= depth) {
      it->second.back_pointers.insert(reader);
      return it->second.range;
    }
    std::vector<ExtendedValue> range = expand(dep, depth);
    state_.info_[dep.raw].back_pointers.insert(reader);
    return range;
  }

  std::vector<ExtendedValue> expand_apply(ElementId e, const Element& elem, int depth) {
    const auto& spec = elem.as_apply();
    std::vector<std::vector<Value>> regular_args;
    bool any_star = false;
    for (ElementId arg : spec.args) {
      std::vector<ExtendedValue> r = read_dep(arg, depth - 1, e);
      std::vector<Value> regs;
      for (const ExtendedValue& v : r) {
        if (v.is_star()) {
          any_star = true;
        } else {
          regs.push_back(v.value());
        }
      }
      regular_args.push_back(std::move(regs));
    }

    std::vector<ExtendedValue> range;
    // Cartesian product over the regular parts of every argument range.
    std::vector<std::size_t> idx(regular_args.size(), 0);
    bool have_combo = true;
    for (const auto& regs : regular_args) {
      if (regs.empty()) have_combo = false;
    }
    while (have_combo) {
      std::vector<Value> tuple;
      tuple.reserve(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) tuple.push_back(regular_args[i][idx[i]]);
      range.emplace_back(eval_apply(e, tuple));
      std::size_t pos = idx.size();
      while (pos > 0) {
        --pos;
        if (++idx[pos] < regular_args[pos].size()) break;
        idx[pos] = 0;
        if (pos == 0) have_combo = false;
      }
      if (idx.size() == 0) break;
    }
    if (any_star) range.push_back(ExtendedValue::star());
    return range;
  }

  std::vector<ExtendedValue> expand_chain(ElementId e, const Element& elem, int depth) {
    const ElementId parent = elem.as_chain().parent;
    std::vector<ExtendedValue> parent_range = read_dep(parent, depth - 1, e);
    std::vector<ExtendedValue> range;
    bool parent_star = false;
    for (const ExtendedValue& pv : parent_range) {
      if (pv.is_star()) {
        parent_star = true;
        continue;
      }
      ElementId result = eval_chain(e, pv.value());
      for (const ExtendedValue& rv : read_dep(result, depth - 1, e)) {
        range.push_back(rv);
      }
    }
    if (parent_star) range.push_back(ExtendedValue::star());
    return range;
  }

  Value eval_apply(ElementId e, std::span<const Value> tuple) {
    try {
      return registry_.apply_result(e, tuple);
    } catch (ModelError& err) {
      throw ModelError(std::string(err.what()) + " (while expanding @" +
                       std::to_string(e.raw) + ")");
    }
  }

  ElementId eval_chain(ElementId e, const Value& v) {
    try {
      return registry_.chain_result(e, v);
    } catch (ModelError& err) {
      throw ModelError(std::string(err.what()) + " (while expanding @" +
                       std::to_string(e.raw) + " with " + v.str() + ")");
    }
  }

  void trace(ElementId e, const ExpansionState::Info& info) {
    if (!state_.trace_sink_) return;
    std::ostringstream line;
    line << "(" << ++state_.trace_step_ << ") @" << e.raw << " "
         << registry_.element(e).kind_name() << " d=" << info.depth << " -> {";
    for (std::size_t i = 0; i < info.range.size(); ++i) {
      if (i > 0) line << ", ";
      line << info.range[i].str();
    }
    line << "}";
    state_.trace_sink_(line.str());
  }

  ExpansionState& state_;
  ProgramRegistry& registry_;
  std::deque<ElementId> queue_;
  std::unordered_map<std::uint64_t, int> pending_;
};

std::vector<ExtendedValue> expand_basic(ExpansionState& state, ProgramRegistry& registry,
                                        ElementId e, int depth) {
  registry.element(e);  // validate id
  Expander engine(state, registry);
  std::vector<ExtendedValue> range = engine.expand(e, depth);
  engine.discard_pending();  // single pass by contract
  return range;
}

void expand_with_backtracking(ExpansionState& state, ProgramRegistry& registry,
                              std::span<const std::pair<ElementId, int>> roots) {
  Expander engine(state, registry);
  for (const auto& [id, depth] : roots) {
    registry.element(id);
    engine.request(id, depth);
  }
  engine.drain();
}

void expand_lazy_evidence(ExpansionState& state, ProgramRegistry& registry,
                          std::span<const ElementId> queries, int depth,
                          std::span<const Evidence> evidence) {
  Expander engine(state, registry);
  for (ElementId q : queries) {
    registry.element(q);
    engine.request(q, depth);
  }
  engine.drain();

  int round_depth = depth;
  while (round_depth >= 0) {
    bool pulled = false;
    for (const Evidence& ev : evidence) {
      if (state.visited(ev.target) && state.depth_of(ev.target) >= round_depth - 1) continue;
      bool reachable = state.visited(ev.target);
      if (!reachable) {
        for (ElementId anc : registry.ancestry(ev.target)) {
          if (state.visited(anc)) {
            reachable = true;
            break;
          }
        }
      }
      if (!reachable) continue;
      engine.request(ev.target, round_depth - 1);
      pulled = true;
    }
    if (!pulled) break;
    engine.drain();
    --round_depth;
  }
}

void expand_lazy_evidence(ExpansionState& state, ProgramRegistry& registry,
                          std::span<const ElementId> queries, int depth) {
  expand_lazy_evidence(state, registry, queries, depth, registry.evidence());
}

}  // namespace lfi
