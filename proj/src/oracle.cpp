#include "lfi/oracle.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lfi/errors.hpp"
#include "lfi/expansion.hpp"

namespace lfi {

namespace {

/// Evaluates elements in one concrete world. Atomic values come from the
/// assignment; hitting an unassigned one suspends the run (returns nullopt and
/// records which atomic is needed) so the caller can branch and rerun.
class WorldEval {
 public:
  WorldEval(ProgramRegistry& registry, const ExpansionState& state,
            const std::unordered_map<std::uint64_t, Value>& assignment)
      : registry_(registry), state_(state), assignment_(assignment) {}

  std::optional<ExtendedValue> eval(ElementId e) {
    if (state_.depth_of(e) < 0) return ExtendedValue::star();
    if (auto it = memo_.find(e.raw); it != memo_.end()) return it->second;
    if (on_stack_.count(e.raw)) {
      // Dependency cycle: such elements never leave the unexplored state.
      return ExtendedValue::star();
    }
    on_stack_.insert(e.raw);
    std::optional<ExtendedValue> result = eval_uncached(e);
    on_stack_.erase(e.raw);
    if (result) {
      if (!Var{e, state_.range_of(e)}.find(*result)) {
        throw InternalError("world value " + result->str() +
                            " outside the recorded range of @" + std::to_string(e.raw));
      }
      memo_.emplace(e.raw, *result);
    }
    return result;
  }

  ElementId pending() const { return pending_; }

 private:
  std::optional<ExtendedValue> eval_uncached(ElementId e) {
    const Element& elem = registry_.element(e);
    switch (elem.kind()) {
      case Element::Kind::Constant:
        return ExtendedValue(elem.as_constant().value);
      case Element::Kind::Flip:
      case Element::Kind::Select: {
        auto it = assignment_.find(e.raw);
        if (it == assignment_.end()) {
          pending_ = e;
          return std::nullopt;
        }
        return ExtendedValue(it->second);
      }
      case Element::Kind::Apply: {
        std::vector<Value> args;
        for (ElementId arg : elem.as_apply().args) {
          std::optional<ExtendedValue> v = eval(arg);
          if (!v) return std::nullopt;
          if (v->is_star()) return ExtendedValue::star();
          args.push_back(v->value());
        }
        return ExtendedValue(registry_.apply_result(e, args));
      }
      case Element::Kind::Chain: {
        std::optional<ExtendedValue> pv = eval(elem.as_chain().parent);
        if (!pv) return std::nullopt;
        if (pv->is_star()) return ExtendedValue::star();
        std::optional<ElementId> result = registry_.cached_chain_result(e, pv->value());
        if (!result) {
          throw InternalError("no recorded continuation of @" + std::to_string(e.raw) +
                              " for " + pv->value().str());
        }
        return eval(*result);
      }
    }
    throw InternalError("unreachable element kind");
  }

  ProgramRegistry& registry_;
  const ExpansionState& state_;
  const std::unordered_map<std::uint64_t, Value>& assignment_;
  std::unordered_map<std::uint64_t, ExtendedValue> memo_;
  std::unordered_set<std::uint64_t> on_stack_;
  ElementId pending_{0};
};

std::pair<double, double> evidence_weight(const Evidence& ev, const ExtendedValue& u) {
  if (ev.is_observation()) {
    if (u.is_star()) return {0.0, 1.0};
    const double w = u.value() == ev.observation().value ? 1.0 : 0.0;
    return {w, w};
  }
  const SoftConstraint& soft = ev.soft();
  if (u.is_star()) return soft.star_bounds;
  const double w = soft.weight(u.value());
  if (!(w >= 0.0 && w <= 1.0)) {
    throw ModelError("soft constraint weight " + std::to_string(w) + " outside [0,1]");
  }
  return {w, w};
}

}  // namespace

Factor enumerate_bounds(ProgramRegistry& registry, ElementId query,
                        std::span<const Evidence> evidence, int depth,
                        const EnumerateOptions& options) {
  ExpansionState state;
  const std::array<ElementId, 1> queries{query};
  expand_lazy_evidence(state, registry, queries, depth, evidence);
  state.freeze();

  std::vector<const Evidence*> active;
  for (const Evidence& ev : evidence) {
    if (state.visited(ev.target)) active.push_back(&ev);
  }

  Var query_var{query, state.range_of(query)};
  std::vector<double> lo(query_var.arity(), 0.0);
  std::vector<double> hi(query_var.arity(), 0.0);

  std::unordered_map<std::uint64_t, Value> assignment;
  std::uint64_t worlds = 0;

  const std::function<void(double)> explore = [&](double prior) {
    WorldEval world(registry, state, assignment);
    std::optional<ExtendedValue> qv = world.eval(query);
    std::vector<ExtendedValue> target_values;
    if (qv) {
      for (const Evidence* ev : active) {
        std::optional<ExtendedValue> tv = world.eval(ev->target);
        if (!tv) {
          qv.reset();
          break;
        }
        target_values.push_back(*tv);
      }
    }
    if (!qv) {
      const ElementId atom = world.pending();
      for (const auto& [value, weight] : registry.element(atom).atomic_support()) {
        if (weight == 0.0) continue;
        assignment.insert_or_assign(atom.raw, value);
        explore(prior * weight);
      }
      assignment.erase(atom.raw);
      return;
    }
    if (++worlds > options.world_cap) {
      throw OracleBudgetExceeded("world enumeration exceeded " +
                                 std::to_string(options.world_cap) + " worlds");
    }
    double w_lo = prior, w_hi = prior;
    for (std::size_t i = 0; i < active.size(); ++i) {
      const auto [e_lo, e_hi] = evidence_weight(*active[i], target_values[i]);
      w_lo *= e_lo;
      w_hi *= e_hi;
    }
    const std::size_t idx = query_var.index_of(*qv);
    lo[idx] += w_lo;
    hi[idx] += w_hi;
  };
  explore(1.0);

  Factor out({query_var});
  for (std::size_t i = 0; i < query_var.arity(); ++i) out.set_at(i, lo[i], hi[i]);
  return out;
}

Factor naive_sum(std::span<const Factor> factors, ElementId query_var,
                 std::size_t size_guard) {
  if (factors.empty()) throw InternalError("naive_sum needs at least one factor");

  std::unordered_map<std::uint64_t, const Var*> seen;
  std::size_t joint_size = 1;
  bool query_present = false;
  for (const Factor& f : factors) {
    for (const Var& v : f.vars()) {
      auto [it, inserted] = seen.emplace(v.id.raw, &v);
      if (!inserted) {
        if (!(*it->second == v)) {
          throw InternalError("variable @" + std::to_string(v.id.raw) +
                              " disagrees between factors");
        }
        continue;
      }
      if (v.id == query_var) query_present = true;
      if (v.arity() != 0 && joint_size > size_guard / v.arity()) {
        throw SizeGuardExceeded("joint table exceeds " + std::to_string(size_guard) +
                                " entries");
      }
      joint_size *= v.arity();
    }
  }
  if (!query_present) {
    throw InternalError("query variable @" + std::to_string(query_var.raw) +
                        " absent from all factors");
  }

  Factor joint = Factor::scalar(1.0, 1.0);
  for (const Factor& f : factors) joint = factor_product(joint, f);
  std::vector<ElementId> to_remove;
  for (const Var& v : joint.vars()) {
    if (!(v.id == query_var)) to_remove.push_back(v.id);
  }
  for (ElementId id : to_remove) joint = factor_marginalize(joint, id);
  return joint;
}

}  // namespace lfi
