#include "lfi/factor.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "lfi/errors.hpp"

namespace lfi {

std::size_t Var::index_of(const ExtendedValue& v) const {
  if (auto i = find(v)) return *i;
  throw InternalError("value " + v.str() + " not in range of @" + std::to_string(id.raw));
}

std::optional<std::size_t> Var::find(const ExtendedValue& v) const {
  for (std::size_t i = 0; i < range.size(); ++i) {
    if (range[i] == v) return i;
  }
  return std::nullopt;
}

bool Var::has_star() const {
  return !range.empty() && range.back().is_star();
}

std::vector<Var> relevant_variables(const ExpansionState& state) {
  std::vector<Var> vars;
  for (ElementId id : state.relevant_ids()) {
    vars.push_back(Var{id, state.range_of(id)});
  }
  return vars;
}

namespace {

std::vector<std::size_t> compute_strides(const std::vector<Var>& vars) {
  std::vector<std::size_t> strides(vars.size(), 1);
  for (std::size_t i = vars.size(); i-- > 1;) {
    strides[i - 1] = strides[i] * vars[i].arity();
  }
  return strides;
}

std::size_t table_size(const std::vector<Var>& vars) {
  std::size_t n = 1;
  for (const Var& v : vars) {
    if (v.arity() == 0) throw InternalError("variable with empty range");
    n *= v.arity();
  }
  return n;
}

void check_digits(const std::vector<Var>& vars, std::span<const std::size_t> digits) {
  if (digits.size() != vars.size()) throw InternalError("digit count mismatch");
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (digits[i] >= vars[i].arity()) throw InternalError("digit out of range");
  }
}

std::size_t flat_of(const std::vector<Var>& vars, const std::vector<std::size_t>& strides,
                    std::span<const std::size_t> digits) {
  check_digits(vars, digits);
  std::size_t flat = 0;
  for (std::size_t i = 0; i < digits.size(); ++i) flat += digits[i] * strides[i];
  return flat;
}

/// Iterates every assignment of `vars` in flat order.
void for_each_assignment(const std::vector<Var>& vars,
                         const std::function<void(std::span<const std::size_t>, std::size_t)>& fn) {
  std::vector<std::size_t> digits(vars.size(), 0);
  const std::size_t total = table_size(vars);
  for (std::size_t flat = 0; flat < total; ++flat) {
    fn(digits, flat);
    for (std::size_t pos = digits.size(); pos-- > 0;) {
      if (++digits[pos] < vars[pos].arity()) break;
      digits[pos] = 0;
    }
  }
}

const char* format_double(char* buf, std::size_t n, double x) {
  std::snprintf(buf, n, "%.17g", x);
  return buf;
}

}  // namespace

Factor::Factor(std::vector<Var> vars) : vars_(std::move(vars)) {
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    for (std::size_t j = i + 1; j < vars_.size(); ++j) {
      if (vars_[i].id == vars_[j].id) {
        throw InternalError("factor with repeated variable @" +
                            std::to_string(vars_[i].id.raw));
      }
    }
  }
  strides_ = compute_strides(vars_);
  const std::size_t n = table_size(vars_);
  lo_.assign(n, 0.0);
  hi_.assign(n, 0.0);
}

Factor Factor::scalar(double lo, double hi) {
  Factor f{std::vector<Var>{}};
  f.lo_.assign(1, lo);
  f.hi_.assign(1, hi);
  return f;
}

bool Factor::mentions(ElementId id) const {
  for (const Var& v : vars_) {
    if (v.id == id) return true;
  }
  return false;
}

void Factor::set_at(std::size_t flat, double lo, double hi) {
  lo_[flat] = lo;
  hi_[flat] = hi;
}

std::size_t Factor::flat_index(std::span<const std::size_t> digits) const {
  return flat_of(vars_, strides_, digits);
}

void Factor::set(std::span<const std::size_t> digits, double lo, double hi) {
  set_at(flat_index(digits), lo, hi);
}

std::pair<double, double> Factor::at(std::span<const std::size_t> digits) const {
  const std::size_t flat = flat_index(digits);
  return {lo_[flat], hi_[flat]};
}

void Factor::for_each(
    const std::function<void(std::span<const std::size_t>, std::size_t)>& fn) const {
  for_each_assignment(vars_, fn);
}

std::string Factor::str() const {
  std::ostringstream out;
  out << "vars=";
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    if (i > 0) out << ",";
    out << "@" << vars_[i].id.raw << ":" << vars_[i].arity();
  }
  return out.str();
}

std::size_t ScalarFactor::flat_index(std::span<const std::size_t> digits) const {
  return flat_of(vars, compute_strides(vars), digits);
}

ScalarFactor lower_table(const Factor& f) {
  ScalarFactor s{f.vars(), {}};
  s.table.resize(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) s.table[i] = f.lo_at(i);
  return s;
}

ScalarFactor upper_table(const Factor& f) {
  ScalarFactor s{f.vars(), {}};
  s.table.resize(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) s.table[i] = f.hi_at(i);
  return s;
}

Factor pair_tables(const ScalarFactor& lo, const ScalarFactor& hi) {
  if (!(lo.vars == hi.vars) || lo.table.size() != hi.table.size()) {
    throw InternalError("cannot pair scalar tables over different variables");
  }
  Factor f(lo.vars);
  for (std::size_t i = 0; i < lo.table.size(); ++i) f.set_at(i, lo.table[i], hi.table[i]);
  return f;
}

namespace {

/// Var layout for a binary table operation: result vars plus, per result var,
/// its position in each operand (SIZE_MAX when absent).
struct JoinPlan {
  std::vector<Var> vars;
  std::vector<std::size_t> a_pos, b_pos;
};

constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);

std::size_t position_of(const std::vector<Var>& vars, ElementId id) {
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (vars[i].id == id) return i;
  }
  return kAbsent;
}

JoinPlan join_plan(const std::vector<Var>& a, const std::vector<Var>& b) {
  JoinPlan plan;
  plan.vars = a;
  for (const Var& vb : b) {
    const std::size_t pos = position_of(a, vb.id);
    if (pos == kAbsent) {
      plan.vars.push_back(vb);
    } else if (!(a[pos] == vb)) {
      throw InternalError("shared variable @" + std::to_string(vb.id.raw) +
                          " disagrees between factors");
    }
  }
  for (const Var& v : plan.vars) {
    plan.a_pos.push_back(position_of(a, v.id));
    plan.b_pos.push_back(position_of(b, v.id));
  }
  return plan;
}

template <typename EntryFn>
void join_tables(const JoinPlan& plan, const std::vector<Var>& a_vars,
                 const std::vector<Var>& b_vars, const EntryFn& fn) {
  const std::vector<std::size_t> a_strides = compute_strides(a_vars);
  const std::vector<std::size_t> b_strides = compute_strides(b_vars);
  for_each_assignment(plan.vars, [&](std::span<const std::size_t> digits, std::size_t flat) {
    std::size_t a_flat = 0, b_flat = 0;
    for (std::size_t i = 0; i < digits.size(); ++i) {
      if (plan.a_pos[i] != kAbsent) a_flat += digits[i] * a_strides[plan.a_pos[i]];
      if (plan.b_pos[i] != kAbsent) b_flat += digits[i] * b_strides[plan.b_pos[i]];
    }
    fn(flat, a_flat, b_flat);
  });
}

struct MargPlan {
  std::vector<Var> vars;     // without the eliminated one
  std::size_t dropped_pos = kAbsent;
};

MargPlan marg_plan(const std::vector<Var>& vars, ElementId id) {
  MargPlan plan;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (vars[i].id == id) {
      plan.dropped_pos = i;
    } else {
      plan.vars.push_back(vars[i]);
    }
  }
  if (plan.dropped_pos == kAbsent) {
    throw InternalError("marginalized variable @" + std::to_string(id.raw) +
                        " not in factor");
  }
  return plan;
}

template <typename AccumFn>
void marginalize_tables(const MargPlan& plan, const std::vector<Var>& in_vars,
                        const AccumFn& fn) {
  const std::vector<std::size_t> out_strides = compute_strides(plan.vars);
  for_each_assignment(in_vars, [&](std::span<const std::size_t> digits, std::size_t flat) {
    std::size_t out_flat = 0;
    std::size_t out_i = 0;
    for (std::size_t i = 0; i < digits.size(); ++i) {
      if (i == plan.dropped_pos) continue;
      out_flat += digits[i] * out_strides[out_i];
      ++out_i;
    }
    fn(flat, out_flat);
  });
}

}  // namespace

Factor factor_product(const Factor& a, const Factor& b) {
  JoinPlan plan = join_plan(a.vars(), b.vars());
  Factor out(plan.vars);
  join_tables(plan, a.vars(), b.vars(), [&](std::size_t flat, std::size_t af, std::size_t bf) {
    out.set_at(flat, a.lo_at(af) * b.lo_at(bf), a.hi_at(af) * b.hi_at(bf));
  });
  return out;
}

Factor factor_marginalize(const Factor& a, ElementId var) {
  MargPlan plan = marg_plan(a.vars(), var);
  Factor out(plan.vars);
  marginalize_tables(plan, a.vars(), [&](std::size_t flat, std::size_t out_flat) {
    out.set_at(out_flat, out.lo_at(out_flat) + a.lo_at(flat),
               out.hi_at(out_flat) + a.hi_at(flat));
  });
  return out;
}

ScalarFactor scalar_product(const ScalarFactor& a, const ScalarFactor& b) {
  JoinPlan plan = join_plan(a.vars, b.vars);
  ScalarFactor out{plan.vars, std::vector<double>(table_size(plan.vars), 0.0)};
  join_tables(plan, a.vars, b.vars, [&](std::size_t flat, std::size_t af, std::size_t bf) {
    out.table[flat] = a.table[af] * b.table[bf];
  });
  return out;
}

ScalarFactor scalar_marginalize(const ScalarFactor& a, ElementId var) {
  MargPlan plan = marg_plan(a.vars, var);
  ScalarFactor out{plan.vars, std::vector<double>(table_size(plan.vars), 0.0)};
  marginalize_tables(plan, a.vars, [&](std::size_t flat, std::size_t out_flat) {
    out.table[out_flat] += a.table[flat];
  });
  return out;
}

Factor atomic_factor(const Var& var, const Element& element, int depth) {
  if (depth < 0) {
    if (var.range.size() != 1 || !var.range[0].is_star()) {
      throw InternalError("unexplored element @" + std::to_string(var.id.raw) +
                          " must have range {*}");
    }
    Factor f({var});
    f.set_at(0, 1.0, 1.0);
    return f;
  }
  if (!element.is_atomic()) {
    throw InternalError("atomic_factor on non-atomic @" + std::to_string(var.id.raw));
  }
  const auto support = element.atomic_support();
  if (support.size() != var.range.size()) {
    throw InternalError("range of @" + std::to_string(var.id.raw) +
                        " inconsistent with its support");
  }
  Factor f({var});
  for (const auto& [v, w] : support) {
    const std::size_t i = var.index_of(ExtendedValue(v));
    f.set_at(i, w, w);
  }
  return f;
}

Factor apply_factor(ProgramRegistry& registry, const Element& element,
                    std::span<const Var> arg_vars, const Var& result_var) {
  const auto& spec = element.as_apply();
  if (arg_vars.size() != spec.args.size()) {
    throw InternalError("apply arg var count mismatch for @" +
                        std::to_string(element.id().raw));
  }
  // Factor vars: unique argument vars in first-occurrence order, then result.
  std::vector<Var> vars;
  std::vector<std::size_t> arg_slot(arg_vars.size());  // arg index -> var position
  for (std::size_t i = 0; i < arg_vars.size(); ++i) {
    std::size_t pos = position_of(vars, arg_vars[i].id);
    if (pos == kAbsent) {
      pos = vars.size();
      vars.push_back(arg_vars[i]);
    }
    arg_slot[i] = pos;
  }
  const std::size_t result_pos = vars.size();
  vars.push_back(result_var);

  Factor f(vars);
  std::vector<Value> tuple;
  f.for_each([&](std::span<const std::size_t> digits, std::size_t flat) {
    bool any_star = false;
    tuple.clear();
    for (std::size_t i = 0; i < arg_vars.size(); ++i) {
      const ExtendedValue& v = vars[arg_slot[i]].range[digits[arg_slot[i]]];
      if (v.is_star()) {
        any_star = true;
      } else {
        tuple.push_back(v.value());
      }
    }
    const ExtendedValue& result = result_var.range[digits[result_pos]];
    double entry = 0.0;
    if (any_star) {
      entry = result.is_star() ? 1.0 : 0.0;
    } else if (!result.is_star()) {
      const Value y = registry.apply_result(element.id(), tuple);
      if (!result_var.find(ExtendedValue(y))) {
        throw InternalError("apply @" + std::to_string(element.id().raw) + " produced " +
                            y.str() + " outside its recorded range");
      }
      entry = result.value() == y ? 1.0 : 0.0;
    }
    f.set_at(flat, entry, entry);
  });
  return f;
}

std::vector<Factor> ChainFactorSet::flatten() const {
  std::vector<Factor> out;
  out.reserve(per_value.size() + (star ? 1 : 0));
  for (const auto& [v, f] : per_value) out.push_back(f);
  if (star) out.push_back(*star);
  return out;
}

ChainFactorSet chain_factors(const Var& chain_var, const Var& parent_var,
                             const std::map<Value, Var, ValueLess>& result_vars) {
  ChainFactorSet set;
  for (const ExtendedValue& pv : parent_var.range) {
    if (pv.is_star()) continue;
    const Value& x = pv.value();
    auto it = result_vars.find(x);
    if (it == result_vars.end()) {
      throw InternalError("no result variable for chain @" +
                          std::to_string(chain_var.id.raw) + " at parent value " + x.str());
    }
    const Var& result_var = it->second;
    if (result_var.id == parent_var.id || result_var.id == chain_var.id) {
      throw ModelError("chain @" + std::to_string(chain_var.id.raw) +
                       " result aliases its parent or itself at value " + x.str());
    }
    Factor phi({parent_var, result_var, chain_var});
    phi.for_each([&](std::span<const std::size_t> digits, std::size_t flat) {
      const ExtendedValue& xp = parent_var.range[digits[0]];
      const ExtendedValue& y = result_var.range[digits[1]];
      const ExtendedValue& e = chain_var.range[digits[2]];
      double entry;
      if (xp != ExtendedValue(x)) {
        entry = 1.0;  // other parent values: this slice does not constrain
      } else {
        entry = (e == y) ? 1.0 : 0.0;
      }
      phi.set_at(flat, entry, entry);
    });
    set.per_value.emplace_back(x, std::move(phi));
  }
  if (parent_var.has_star()) {
    Factor phi({parent_var, chain_var});
    phi.for_each([&](std::span<const std::size_t> digits, std::size_t flat) {
      const ExtendedValue& xp = parent_var.range[digits[0]];
      const ExtendedValue& e = chain_var.range[digits[1]];
      const double entry = !xp.is_star() ? 1.0 : (e.is_star() ? 1.0 : 0.0);
      phi.set_at(flat, entry, entry);
    });
    set.star = std::move(phi);
  }
  return set;
}

Factor constraint_factor(const Var& var, const Evidence& evidence) {
  if (evidence.target != var.id) {
    throw InternalError("constraint target does not match variable");
  }
  Factor f({var});
  for (std::size_t i = 0; i < var.range.size(); ++i) {
    const ExtendedValue& u = var.range[i];
    if (evidence.is_observation()) {
      if (u.is_star()) {
        f.set_at(i, 0.0, 1.0);
      } else {
        const double p = (u.value() == evidence.observation().value) ? 1.0 : 0.0;
        f.set_at(i, p, p);
      }
    } else {
      const SoftConstraint& soft = evidence.soft();
      if (u.is_star()) {
        f.set_at(i, soft.star_bounds.first, soft.star_bounds.second);
      } else {
        const double w = soft.weight(u.value());
        if (!(w >= 0.0 && w <= 1.0)) {
          throw ModelError("soft constraint weight " + std::to_string(w) + " for " +
                           u.value().str() + " outside [0,1]");
        }
        f.set_at(i, w, w);
      }
    }
  }
  return f;
}

FactorBuild build_all_factors(const ExpansionState& state, ProgramRegistry& registry,
                              std::span<const Evidence> evidence) {
  if (!state.frozen()) throw InternalError("build_all_factors needs a frozen expansion");
  FactorBuild build;
  build.variables = relevant_variables(state);

  std::unordered_map<std::uint64_t, const Var*> var_of;
  for (const Var& v : build.variables) var_of.emplace(v.id.raw, &v);
  const auto var_for = [&](ElementId id) -> const Var& {
    auto it = var_of.find(id.raw);
    if (it == var_of.end()) {
      throw InternalError("no variable for element @" + std::to_string(id.raw));
    }
    return *it->second;
  };

  for (const Var& var : build.variables) {
    const Element& elem = registry.element(var.id);
    const int depth = state.depth_of(var.id);
    if (depth < 0) {
      build.factors.push_back(atomic_factor(var, elem, depth));
      continue;
    }
    switch (elem.kind()) {
      case Element::Kind::Constant:
      case Element::Kind::Flip:
      case Element::Kind::Select:
        build.factors.push_back(atomic_factor(var, elem, depth));
        break;
      case Element::Kind::Apply: {
        std::vector<Var> arg_vars;
        for (ElementId a : elem.as_apply().args) arg_vars.push_back(var_for(a));
        build.factors.push_back(apply_factor(registry, elem, arg_vars, var));
        break;
      }
      case Element::Kind::Chain: {
        const Var& parent = var_for(elem.as_chain().parent);
        std::map<Value, Var, ValueLess> result_vars;
        for (const ExtendedValue& pv : parent.range) {
          if (pv.is_star()) continue;
          auto result = registry.cached_chain_result(var.id, pv.value());
          if (!result) {
            throw InternalError("chain @" + std::to_string(var.id.raw) +
                                " has no cached result for " + pv.value().str());
          }
          result_vars.emplace(pv.value(), var_for(*result));
        }
        for (Factor& f : chain_factors(var, parent, result_vars).flatten()) {
          build.factors.push_back(std::move(f));
        }
        break;
      }
    }
  }

  for (const Evidence& ev : evidence) {
    if (!state.visited(ev.target)) continue;
    build.factors.push_back(constraint_factor(var_for(ev.target), ev));
    ++build.num_constraints;
  }
  return build;
}

FactorBuild build_all_factors(const ExpansionState& state, ProgramRegistry& registry) {
  return build_all_factors(state, registry, registry.evidence());
}

std::string dump_factors(std::span<const Factor> factors) {
  std::ostringstream out;
  char buf[64];
  for (std::size_t i = 0; i < factors.size(); ++i) {
    const Factor& f = factors[i];
    out << "factor " << i << " " << f.str() << "\n";
    f.for_each([&](std::span<const std::size_t> digits, std::size_t flat) {
      for (std::size_t d : digits) out << d << " ";
      out << format_double(buf, sizeof buf, f.lo_at(flat)) << " ";
      out << format_double(buf, sizeof buf, f.hi_at(flat)) << "\n";
    });
  }
  return out.str();
}

}  // namespace lfi
