#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "lfi/value.hpp"

namespace lfi {

class ProgramRegistry;

/// Deterministic pure function applied to fully-known argument values. It may
/// create new elements through the registry (that is how recursion stays
/// lazy); the registry memoizes it per argument tuple so repeated evaluation
/// returns the identical value with identical embedded ids.
using ApplyFn = std::function<Value(ProgramRegistry&, std::span<const Value>)>;

/// Deterministic pure function from a parent value to the element that
/// continues the computation. Memoized per input value by the registry.
using ChainFn = std::function<ElementId(ProgramRegistry&, const Value&)>;

struct ConstantSpec {
  Value value;
};

struct FlipSpec {
  double p = 0.5;
};

struct SelectSpec {
  std::vector<std::pair<double, Value>> branches;  // weight, value
};

struct ApplySpec {
  std::vector<ElementId> args;
  ApplyFn fn;
};

struct ChainSpec {
  ElementId parent;
  ChainFn fn;
};

class Element {
 public:
  enum class Kind { Constant, Flip, Select, Apply, Chain };

  Element(ElementId id,
          std::variant<ConstantSpec, FlipSpec, SelectSpec, ApplySpec, ChainSpec> spec)
      : id_(id), spec_(std::move(spec)) {}

  ElementId id() const { return id_; }
  Kind kind() const { return static_cast<Kind>(spec_.index()); }
  bool is_atomic() const {
    return kind() == Kind::Constant || kind() == Kind::Flip || kind() == Kind::Select;
  }

  const ConstantSpec& as_constant() const { return std::get<ConstantSpec>(spec_); }
  const FlipSpec& as_flip() const { return std::get<FlipSpec>(spec_); }
  const SelectSpec& as_select() const { return std::get<SelectSpec>(spec_); }
  const ApplySpec& as_apply() const { return std::get<ApplySpec>(spec_); }
  const ChainSpec& as_chain() const { return std::get<ChainSpec>(spec_); }

  /// Direct dependencies: Apply args or the Chain parent. Empty for atomics.
  std::vector<ElementId> direct_args() const;

  /// Weighted support of an atomic element (Constant/Flip/Select), in
  /// canonical value order. Flip keeps both outcomes even for p in {0,1}.
  std::vector<std::pair<Value, double>> atomic_support() const;

  const char* kind_name() const;

 private:
  ElementId id_;
  std::variant<ConstantSpec, FlipSpec, SelectSpec, ApplySpec, ChainSpec> spec_;
};

struct Observation {
  Value value;
};

struct SoftConstraint {
  std::function<double(const Value&)> weight;  // range [0,1]
  std::pair<double, double> star_bounds{0.0, 1.0};
};

struct Evidence {
  ElementId target;
  std::variant<Observation, SoftConstraint> constraint;

  bool is_observation() const {
    return std::holds_alternative<Observation>(constraint);
  }
  const Observation& observation() const { return std::get<Observation>(constraint); }
  const SoftConstraint& soft() const { return std::get<SoftConstraint>(constraint); }
};

/// Owns every element of one model plus its evidence list, reverse-dependency
/// edges and the fn memo tables. Ids are dense and assigned in creation order;
/// two identical construction scripts produce identical registries.
class ProgramRegistry {
 public:
  ProgramRegistry() = default;
  ProgramRegistry(const ProgramRegistry&) = delete;
  ProgramRegistry& operator=(const ProgramRegistry&) = delete;

  ElementId constant(Value v);
  ElementId flip(double p);
  ElementId select(std::vector<std::pair<double, Value>> branches);
  ElementId apply(std::vector<ElementId> args, ApplyFn fn);
  ElementId chain(ElementId parent, ChainFn fn);

  /// Sugar: Chain over a boolean test picking one of two existing elements.
  ElementId if_then_else(ElementId test, ElementId then_elem, ElementId else_elem);
  /// Sugar: Apply lowering an equality test against a fixed value.
  ElementId equal_to(ElementId elem, Value target);

  void observe(ElementId target, Value v);
  void soft_constraint(ElementId target, std::function<double(const Value&)> weight,
                       std::pair<double, double> star_bounds = {0.0, 1.0});

  /// Memoized evaluation of an Apply fn. First call per distinct tuple runs
  /// the fn (which may register new elements); later calls are cache hits.
  Value apply_result(ElementId apply_id, std::span<const Value> args);
  /// Memoized evaluation of a Chain fn.
  ElementId chain_result(ElementId chain_id, const Value& parent_value);
  /// Cache lookup without evaluation; empty when the fn never ran on v.
  std::optional<ElementId> cached_chain_result(ElementId chain_id, const Value& v) const;

  const Element& element(ElementId id) const;
  bool contains(ElementId id) const { return id.raw < elements_.size(); }
  std::size_t size() const { return elements_.size(); }

  /// Elements that list `id` among their direct args (reverse edges).
  const std::vector<ElementId>& used_by(ElementId id) const;
  /// Transitive direct-arg ancestry of `id`, excluding `id` itself.
  std::vector<ElementId> ancestry(ElementId id) const;

  const std::vector<Evidence>& evidence() const { return evidence_; }

 private:
  ElementId add(std::variant<ConstantSpec, FlipSpec, SelectSpec, ApplySpec, ChainSpec> spec);
  void require_known(ElementId id, const char* role) const;

  struct ValueVecHash {
    std::size_t operator()(const std::vector<Value>& vs) const {
      std::size_t h = 0x9e37;
      for (const auto& v : vs) h = hash_combine(h, v.hash());
      return h;
    }
  };
  struct ValueVecEq {
    bool operator()(const std::vector<Value>& a, const std::vector<Value>& b) const {
      if (a.size() != b.size()) return false;
      for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return false;
      return true;
    }
  };

  std::vector<Element> elements_;
  std::vector<std::vector<ElementId>> used_by_;
  std::vector<Evidence> evidence_;
  std::unordered_map<std::uint64_t,
                     std::unordered_map<std::vector<Value>, Value, ValueVecHash, ValueVecEq>>
      apply_memo_;
  std::unordered_map<std::uint64_t,
                     std::unordered_map<Value, ElementId, ValueHash>>
      chain_memo_;
};

}  // namespace lfi
