#include "lfi/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lfi/errors.hpp"

namespace lfi {

std::vector<ElementId> Element::direct_args() const {
  switch (kind()) {
    case Kind::Apply:
      return as_apply().args;
    case Kind::Chain:
      return {as_chain().parent};
    default:
      return {};
  }
}

std::vector<std::pair<Value, double>> Element::atomic_support() const {
  std::vector<std::pair<Value, double>> support;
  switch (kind()) {
    case Kind::Constant:
      support.emplace_back(as_constant().value, 1.0);
      break;
    case Kind::Flip:
      support.emplace_back(Value::boolean(false), 1.0 - as_flip().p);
      support.emplace_back(Value::boolean(true), as_flip().p);
      break;
    case Kind::Select:
      for (const auto& [w, v] : as_select().branches) support.emplace_back(v, w);
      break;
    default:
      throw InternalError("atomic_support on non-atomic element");
  }
  std::sort(support.begin(), support.end(), [](const auto& a, const auto& b) {
    return Value::compare(a.first, b.first) < 0;
  });
  return support;
}

const char* Element::kind_name() const {
  switch (kind()) {
    case Kind::Constant: return "Constant";
    case Kind::Flip: return "Flip";
    case Kind::Select: return "Select";
    case Kind::Apply: return "Apply";
    case Kind::Chain: return "Chain";
  }
  return "?";
}

ElementId ProgramRegistry::add(
    std::variant<ConstantSpec, FlipSpec, SelectSpec, ApplySpec, ChainSpec> spec) {
  const ElementId id{elements_.size()};
  elements_.emplace_back(id, std::move(spec));
  used_by_.emplace_back();
  for (ElementId dep : elements_.back().direct_args()) {
    used_by_[dep.raw].push_back(id);
  }
  return id;
}

void ProgramRegistry::require_known(ElementId id, const char* role) const {
  if (!contains(id)) {
    throw ModelError(std::string("unknown element id @") + std::to_string(id.raw) +
                     " used as " + role);
  }
}

ElementId ProgramRegistry::constant(Value v) {
  return add(ConstantSpec{std::move(v)});
}

ElementId ProgramRegistry::flip(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ModelError("flip probability must lie in [0,1], got " + std::to_string(p));
  }
  return add(FlipSpec{p});
}

ElementId ProgramRegistry::select(std::vector<std::pair<double, Value>> branches) {
  if (branches.empty()) throw ModelError("select needs at least one branch");
  double total = 0.0;
  for (const auto& [w, v] : branches) {
    if (!(w > 0.0)) {
      throw ModelError("select weights must be positive, got " + std::to_string(w) +
                       " for " + v.str());
    }
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ModelError("select weights must sum to 1, got " + std::to_string(total));
  }
  for (std::size_t i = 0; i < branches.size(); ++i) {
    for (std::size_t j = i + 1; j < branches.size(); ++j) {
      if (branches[i].second == branches[j].second) {
        throw ModelError("select branch values must be distinct; duplicate " +
                         branches[i].second.str());
      }
    }
  }
  return add(SelectSpec{std::move(branches)});
}

ElementId ProgramRegistry::apply(std::vector<ElementId> args, ApplyFn fn) {
  if (args.empty()) throw ModelError("apply needs at least one argument");
  if (!fn) throw ModelError("apply fn must be callable");
  for (ElementId a : args) require_known(a, "apply argument");
  return add(ApplySpec{std::move(args), std::move(fn)});
}

ElementId ProgramRegistry::chain(ElementId parent, ChainFn fn) {
  require_known(parent, "chain parent");
  if (!fn) throw ModelError("chain fn must be callable");
  return add(ChainSpec{parent, std::move(fn)});
}

ElementId ProgramRegistry::if_then_else(ElementId test, ElementId then_elem,
                                        ElementId else_elem) {
  require_known(test, "if test");
  require_known(then_elem, "if branch");
  require_known(else_elem, "if branch");
  return chain(test, [then_elem, else_elem](ProgramRegistry&, const Value& v) {
    return v.as_bool() ? then_elem : else_elem;
  });
}

ElementId ProgramRegistry::equal_to(ElementId elem, Value target) {
  require_known(elem, "equality operand");
  return apply({elem}, [target = std::move(target)](ProgramRegistry&,
                                                    std::span<const Value> vs) {
    return Value::boolean(vs[0] == target);
  });
}

void ProgramRegistry::observe(ElementId target, Value v) {
  require_known(target, "observation target");
  evidence_.push_back(Evidence{target, Observation{std::move(v)}});
}

void ProgramRegistry::soft_constraint(ElementId target,
                                      std::function<double(const Value&)> weight,
                                      std::pair<double, double> star_bounds) {
  require_known(target, "constraint target");
  if (!weight) throw ModelError("soft constraint weight fn must be callable");
  const auto [lo, hi] = star_bounds;
  if (!(0.0 <= lo && lo <= hi && hi <= 1.0)) {
    throw ModelError("soft constraint star bounds must satisfy 0 <= lo <= hi <= 1");
  }
  evidence_.push_back(Evidence{target, SoftConstraint{std::move(weight), star_bounds}});
}

Value ProgramRegistry::apply_result(ElementId apply_id, std::span<const Value> args) {
  require_known(apply_id, "apply evaluation");
  const Element& e = element(apply_id);
  if (e.kind() != Element::Kind::Apply) {
    throw ModelError("apply_result on non-apply element @" + std::to_string(apply_id.raw));
  }
  if (args.size() != e.as_apply().args.size()) {
    throw ModelError("apply arity mismatch on @" + std::to_string(apply_id.raw));
  }
  auto& memo = apply_memo_[apply_id.raw];
  std::vector<Value> key(args.begin(), args.end());
  if (auto it = memo.find(key); it != memo.end()) return it->second;
  Value result = e.as_apply().fn(*this, args);
  // The fn may have registered elements (growing elements_), so look nothing up
  // through stale references past this point.
  auto [it, inserted] = apply_memo_[apply_id.raw].emplace(std::move(key), std::move(result));
  (void)inserted;
  return it->second;
}

ElementId ProgramRegistry::chain_result(ElementId chain_id, const Value& parent_value) {
  require_known(chain_id, "chain evaluation");
  const Element& e = element(chain_id);
  if (e.kind() != Element::Kind::Chain) {
    throw ModelError("chain_result on non-chain element @" + std::to_string(chain_id.raw));
  }
  auto& memo = chain_memo_[chain_id.raw];
  if (auto it = memo.find(parent_value); it != memo.end()) return it->second;
  ElementId result = e.as_chain().fn(*this, parent_value);
  require_known(result, "chain result");
  chain_memo_[chain_id.raw].emplace(parent_value, result);
  return result;
}

std::optional<ElementId> ProgramRegistry::cached_chain_result(ElementId chain_id,
                                                              const Value& v) const {
  auto mit = chain_memo_.find(chain_id.raw);
  if (mit == chain_memo_.end()) return std::nullopt;
  auto it = mit->second.find(v);
  if (it == mit->second.end()) return std::nullopt;
  return it->second;
}

const Element& ProgramRegistry::element(ElementId id) const {
  require_known(id, "lookup");
  return elements_[id.raw];
}

const std::vector<ElementId>& ProgramRegistry::used_by(ElementId id) const {
  require_known(id, "used_by lookup");
  return used_by_[id.raw];
}

std::vector<ElementId> ProgramRegistry::ancestry(ElementId id) const {
  require_known(id, "ancestry lookup");
  std::vector<ElementId> out;
  std::unordered_set<std::uint64_t> seen;
  std::vector<ElementId> stack = element(id).direct_args();
  while (!stack.empty()) {
    ElementId cur = stack.back();
    stack.pop_back();
    if (!seen.insert(cur.raw).second) continue;
    out.push_back(cur);
    for (ElementId dep : element(cur).direct_args()) stack.push_back(dep);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace lfi
