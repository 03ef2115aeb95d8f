#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lfi/expansion.hpp"
#include "lfi/model.hpp"
#include "lfi/value.hpp"

namespace lfi {

/// A factor-graph variable: one per relevant element, carrying that element's
/// extended range in canonical order (Star last when present).
struct Var {
  ElementId id;
  std::vector<ExtendedValue> range;

  bool operator==(const Var& other) const {
    return id == other.id && range == other.range;
  }
  std::size_t arity() const { return range.size(); }
  /// Position of v in range; throws InternalError when absent.
  std::size_t index_of(const ExtendedValue& v) const;
  std::optional<std::size_t> find(const ExtendedValue& v) const;
  bool has_star() const;
};

/// One variable per visited element, ascending by element id.
std::vector<Var> relevant_variables(const ExpansionState& state);

/// Dense table over extended assignments with an interval [lo, hi] per entry.
/// Row-major layout, last variable fastest. Definition factors are point
/// valued (lo == hi); only constraint factors carry real intervals.
class Factor {
 public:
  explicit Factor(std::vector<Var> vars);
  /// Variable-free scalar factor (the residue of summing out a component).
  static Factor scalar(double lo, double hi);

  const std::vector<Var>& vars() const { return vars_; }
  std::size_t size() const { return lo_.size(); }
  bool mentions(ElementId id) const;

  double lo_at(std::size_t flat) const { return lo_[flat]; }
  double hi_at(std::size_t flat) const { return hi_[flat]; }
  void set_at(std::size_t flat, double lo, double hi);

  std::size_t flat_index(std::span<const std::size_t> digits) const;
  void set(std::span<const std::size_t> digits, double lo, double hi);
  std::pair<double, double> at(std::span<const std::size_t> digits) const;

  /// Invokes fn with the digit vector for every entry, in flat order.
  void for_each(const std::function<void(std::span<const std::size_t>, std::size_t)>& fn) const;

  std::string str() const;

 private:
  std::vector<Var> vars_;
  std::vector<std::size_t> strides_;
  std::vector<double> lo_, hi_;
};

/// One scalar table (a single bound's view of a Factor); the variable
/// elimination passes run on these.
struct ScalarFactor {
  std::vector<Var> vars;
  std::vector<double> table;

  std::size_t flat_index(std::span<const std::size_t> digits) const;
};

ScalarFactor lower_table(const Factor& f);
ScalarFactor upper_table(const Factor& f);
/// Pairs two scalar results over the same variables back into an interval
/// factor; throws InternalError on var mismatch.
Factor pair_tables(const ScalarFactor& lo, const ScalarFactor& hi);

/// Entrywise interval product over the union of the variable sets. Shared
/// variables must agree exactly (same id, same range).
Factor factor_product(const Factor& a, const Factor& b);
/// Sums one variable out of the table.
Factor factor_marginalize(const Factor& a, ElementId var);

ScalarFactor scalar_product(const ScalarFactor& a, const ScalarFactor& b);
ScalarFactor scalar_marginalize(const ScalarFactor& a, ElementId var);

/// Definition factor of an atomic element at depth >= 0, or of any element
/// recorded at depth < 0 (which gets the unary all-mass-on-Star table).
Factor atomic_factor(const Var& var, const Element& element, int depth);

/// Definition factor of an Apply over its argument variables plus the result:
/// entry 1 when all args are regular and the result equals fn(args), 1 when
/// some arg is Star and the result is Star, 0 otherwise. Repeated argument
/// variables are deduplicated.
Factor apply_factor(ProgramRegistry& registry, const Element& element,
                    std::span<const Var> arg_vars, const Var& result_var);

/// Chain decomposition: one small factor per regular parent value plus an
/// optional Star factor, whose product equals the monolithic chain factor.
struct ChainFactorSet {
  std::vector<std::pair<Value, Factor>> per_value;  // parent value -> phi_x
  std::optional<Factor> star;                       // present iff Star in parent range
  std::vector<Factor> flatten() const;
};

ChainFactorSet chain_factors(const Var& chain_var, const Var& parent_var,
                             const std::map<Value, Var, ValueLess>& result_vars);

/// Interval factor over the target's range: observations pin [1,1]/[0,0] on
/// regular values with [0,1] on Star; soft constraints use the weight fn and
/// its starBounds.
Factor constraint_factor(const Var& var, const Evidence& evidence);

struct FactorBuild {
  std::vector<Factor> factors;      // definition factors by element id, then constraints
  std::vector<Var> variables;       // ascending by element id
  std::size_t num_constraints = 0;
};

/// Builds every definition factor for the frozen expansion plus one constraint
/// factor per evidence whose target was expanded.
FactorBuild build_all_factors(const ExpansionState& state, ProgramRegistry& registry);
FactorBuild build_all_factors(const ExpansionState& state, ProgramRegistry& registry,
                              std::span<const Evidence> evidence);

/// Debug dump: "factor <i> vars=<@id:rangeSize,...>" followed by one
/// "<digits> <lo> <hi>" line per entry.
std::string dump_factors(std::span<const Factor> factors);

}  // namespace lfi
