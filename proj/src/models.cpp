#include "lfi/models.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <set>
#include <span>
#include <utility>

#include "json.hpp"
#include "lfi/errors.hpp"

namespace lfi::models {

namespace {

constexpr int kTopState = 14;

}  // namespace

RandomListIds random_list_model(ProgramRegistry& registry, bool observe_contains_a) {
  const ElementId c_true = registry.constant(Value::boolean(true));
  const ElementId c_false = registry.constant(Value::boolean(false));

  using Generator = std::function<ElementId(ProgramRegistry&)>;
  auto make_list = std::make_shared<Generator>();
  *make_list = [make_list](ProgramRegistry& reg) -> ElementId {
    const ElementId coin = reg.flip(0.5);
    return reg.apply({coin}, [make_list](ProgramRegistry& r, std::span<const Value> vs) -> Value {
      if (!vs[0].as_bool()) return Value::constructed("Empty", {});
      const ElementId head =
          r.select({{0.6, Value::symbol("a")}, {0.4, Value::symbol("b")}});
      const ElementId tail = (*make_list)(r);
      return Value::constructed("Cons", {ValueField(head), ValueField(tail)});
    });
  };
  const ElementId list = (*make_list)(registry);

  using Membership = std::function<ElementId(ProgramRegistry&, ElementId, const std::string&)>;
  auto contains = std::make_shared<Membership>();
  auto memo = std::make_shared<std::map<std::pair<std::uint64_t, std::string>, ElementId>>();
  *contains = [contains, memo, c_true, c_false](ProgramRegistry& reg, ElementId lst,
                                                const std::string& sym) -> ElementId {
    const auto key = std::make_pair(lst.raw, sym);
    if (auto it = memo->find(key); it != memo->end()) return it->second;
    const ElementId result = reg.chain(
        lst, [contains, c_true, c_false, sym](ProgramRegistry& r, const Value& v) -> ElementId {
          if (v.ctor() == "Empty") return c_false;
          const ElementId eq = r.equal_to(v.field_id(0), Value::symbol(sym));
          const ElementId rest = (*contains)(r, v.field_id(1), sym);
          return r.if_then_else(eq, c_true, rest);
        });
    memo->emplace(key, result);
    return result;
  };

  RandomListIds ids;
  ids.list = list;
  ids.contains_a = (*contains)(registry, list, "a");
  ids.contains_b = (*contains)(registry, list, "b");
  if (observe_contains_a) registry.observe(ids.contains_a, Value::boolean(true));
  return ids;
}

HmmIds infinite_hmm_model(ProgramRegistry& registry, const HmmConfig& config) {
  if (config.initial_state < 0 || config.initial_state > kTopState) {
    throw ModelError("initial state must lie in [0," + std::to_string(kTopState) + "]");
  }
  const ElementId c_true = registry.constant(Value::boolean(true));
  const ElementId c_false = registry.constant(Value::boolean(false));

  // Absorbing states keep landing on one shared constant; interior states get
  // a fresh two-outcome draw per (step, state) through the chain memo.
  auto absorbed = std::make_shared<std::map<int, ElementId>>();
  auto transition_fn = [absorbed](ProgramRegistry& r, const Value& v) -> ElementId {
    const int s = static_cast<int>(v.as_int());
    if (s == 0 || s == kTopState) {
      if (auto it = absorbed->find(s); it != absorbed->end()) return it->second;
      const ElementId id = r.constant(Value::integer(s));
      absorbed->emplace(s, id);
      return id;
    }
    const double up = static_cast<double>(s) / kTopState;
    return r.select({{1.0 - up, Value::integer(s - 1)}, {up, Value::integer(s + 1)}});
  };

  struct Steps {
    std::map<int, ElementId> states;
    std::map<int, ElementId> reaches;
  };
  auto steps = std::make_shared<Steps>();
  steps->states.emplace(0, registry.constant(Value::integer(config.initial_state)));

  using StepFn = std::function<ElementId(ProgramRegistry&, int)>;
  auto make_state = std::make_shared<StepFn>();
  *make_state = [steps, make_state, transition_fn](ProgramRegistry& r, int k) -> ElementId {
    if (auto it = steps->states.find(k); it != steps->states.end()) return it->second;
    const ElementId prev = (*make_state)(r, k - 1);
    const ElementId state = r.chain(prev, transition_fn);
    steps->states.emplace(k, state);
    return state;
  };

  auto make_reach = std::make_shared<StepFn>();
  *make_reach = [steps, make_reach, make_state, c_true, c_false](ProgramRegistry& r,
                                                                 int k) -> ElementId {
    if (auto it = steps->reaches.find(k); it != steps->reaches.end()) return it->second;
    const ElementId state = (*make_state)(r, k);
    const ElementId reach = r.chain(
        state, [make_reach, c_true, c_false, k](ProgramRegistry& r2, const Value& v) -> ElementId {
          const int s = static_cast<int>(v.as_int());
          if (s == kTopState) return c_true;
          if (s == 0) return c_false;
          return (*make_reach)(r2, k + 1);
        });
    steps->reaches.emplace(k, reach);
    return reach;
  };

  for (std::size_t i = 0; i < config.observations.size(); ++i) {
    const ElementId state = (*make_state)(registry, static_cast<int>(i) + 1);
    const ElementId emission =
        registry.chain(state, [](ProgramRegistry& r, const Value& v) -> ElementId {
          return r.flip(static_cast<double>(v.as_int()) / kTopState);
        });
    registry.observe(emission, Value::boolean(config.observations[i]));
  }

  HmmIds ids;
  ids.reach_top = (*make_reach)(registry, 0);
  return ids;
}

void validate(const GnfGrammar& grammar) {
  if (grammar.nonterminals.empty()) throw ModelError("grammar needs at least one nonterminal");
  if (grammar.terminals.empty()) throw ModelError("grammar needs at least one terminal");
  const std::set<std::string> nts(grammar.nonterminals.begin(), grammar.nonterminals.end());
  const std::set<std::string> ts(grammar.terminals.begin(), grammar.terminals.end());
  if (nts.size() != grammar.nonterminals.size()) throw ModelError("duplicate nonterminal");
  if (ts.size() != grammar.terminals.size()) throw ModelError("duplicate terminal");
  for (const std::string& t : grammar.terminals) {
    if (nts.count(t)) throw ModelError("symbol is both terminal and nonterminal: " + t);
  }
  std::map<std::string, double> total;
  for (const GnfProduction& p : grammar.productions) {
    if (!nts.count(p.lhs)) throw ModelError("production head is not a nonterminal: " + p.lhs);
    if (!ts.count(p.terminal)) throw ModelError("unknown terminal: " + p.terminal);
    for (const std::string& b : p.rhs) {
      if (!nts.count(b)) throw ModelError("unknown nonterminal in rhs: " + b);
    }
    if (!(p.prob > 0.0)) throw ModelError("production probabilities must be positive");
    total[p.lhs] += p.prob;
  }
  for (const std::string& nt : grammar.nonterminals) {
    const auto it = total.find(nt);
    if (it == total.end()) throw ModelError("nonterminal has no productions: " + nt);
    if (std::abs(it->second - 1.0) > 1e-9) {
      throw ModelError("production probabilities for " + nt + " sum to " +
                       std::to_string(it->second));
    }
  }
}

GnfGrammar load_grammar_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw ModelError(std::string("grammar file is not valid JSON: ") + ex.what());
  }
  GnfGrammar g;
  try {
    g.nonterminals = j.at("nonterminals").get<std::vector<std::string>>();
    g.terminals = j.at("terminals").get<std::vector<std::string>>();
    for (const auto& jp : j.at("productions")) {
      GnfProduction p;
      p.lhs = jp.at("lhs").get<std::string>();
      p.prob = jp.at("prob").get<double>();
      p.terminal = jp.at("terminal").get<std::string>();
      if (jp.contains("rhs")) p.rhs = jp.at("rhs").get<std::vector<std::string>>();
      g.productions.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ModelError(std::string("grammar file is missing or mistypes a field: ") + ex.what());
  }
  validate(g);
  return g;
}

GnfGrammar finite_example_grammar() {
  GnfGrammar g;
  g.nonterminals = {"S", "T", "V"};
  g.terminals = {"a", "b", "c", "d", "e"};
  g.productions = {
      {"S", 0.2, "a", {"T", "S"}}, {"S", 0.3, "b", {"T"}}, {"S", 0.5, "c", {}},
      {"T", 0.4, "d", {"V"}},      {"T", 0.6, "e", {}},
      {"V", 0.5, "d", {}},         {"V", 0.5, "e", {"T"}},
  };
  return g;
}

GnfGrammar infinite_example_grammar() {
  GnfGrammar g;
  g.nonterminals = {"S"};
  g.terminals = {"a", "b", "c"};
  g.productions = {
      {"S", 0.6, "a", {"S", "S"}}, {"S", 0.2, "b", {}}, {"S", 0.2, "c", {}},
  };
  return g;
}

std::map<std::string, double> extinction_probabilities(const GnfGrammar& grammar,
                                                       int iterations, double tolerance) {
  validate(grammar);
  std::map<std::string, double> x;
  for (const std::string& nt : grammar.nonterminals) x[nt] = 0.0;
  for (int iter = 0; iter < iterations; ++iter) {
    std::map<std::string, double> next;
    for (const std::string& nt : grammar.nonterminals) next[nt] = 0.0;
    for (const GnfProduction& p : grammar.productions) {
      double term = p.prob;
      for (const std::string& b : p.rhs) term *= x.at(b);
      next[p.lhs] += term;
    }
    double delta = 0.0;
    for (const std::string& nt : grammar.nonterminals) {
      delta = std::max(delta, std::abs(next[nt] - x[nt]));
    }
    x = std::move(next);
    if (delta < tolerance) break;
  }
  return x;
}

namespace {

/// Prefix-function automaton over terminal strings; state m (the pattern
/// length) is the accepting sink.
struct PatternAutomaton {
  std::vector<std::string> pattern;
  std::vector<int> fail;

  int match_length() const { return static_cast<int>(pattern.size()); }

  int step(int state, const std::string& c) const {
    while (state > 0 && pattern[static_cast<std::size_t>(state)] != c) {
      state = fail[static_cast<std::size_t>(state) - 1];
    }
    if (pattern[static_cast<std::size_t>(state)] == c) ++state;
    return state;
  }
};

PatternAutomaton build_automaton(std::vector<std::string> pattern) {
  PatternAutomaton a;
  a.pattern = std::move(pattern);
  a.fail.assign(a.pattern.size(), 0);
  for (std::size_t i = 1; i < a.pattern.size(); ++i) {
    int k = a.fail[i - 1];
    while (k > 0 && a.pattern[i] != a.pattern[static_cast<std::size_t>(k)]) {
      k = a.fail[static_cast<std::size_t>(k) - 1];
    }
    if (a.pattern[i] == a.pattern[static_cast<std::size_t>(k)]) ++k;
    a.fail[i] = k;
  }
  return a;
}

using Runner = std::function<ElementId(ProgramRegistry&, ElementId, int)>;

/// Builds the memoized scanner run(seq, state) -> element holding the final
/// automaton state after consuming seq, absorbing at a full match.
std::shared_ptr<Runner> make_runner(std::vector<std::string> pattern) {
  auto kmp = std::make_shared<PatternAutomaton>(build_automaton(std::move(pattern)));
  auto memo = std::make_shared<std::map<std::pair<std::uint64_t, int>, ElementId>>();
  auto consts = std::make_shared<std::map<int, ElementId>>();
  auto state_const = std::make_shared<std::function<ElementId(ProgramRegistry&, int)>>();
  *state_const = [consts](ProgramRegistry& r, int s) -> ElementId {
    if (auto it = consts->find(s); it != consts->end()) return it->second;
    const ElementId id = r.constant(Value::integer(s));
    consts->emplace(s, id);
    return id;
  };

  auto run = std::make_shared<Runner>();
  *run = [kmp, memo, state_const, run](ProgramRegistry& r, ElementId seq, int state) -> ElementId {
    const auto key = std::make_pair(seq.raw, state);
    if (auto it = memo->find(key); it != memo->end()) return it->second;
    const ElementId result = r.chain(
        seq, [kmp, state_const, run, state](ProgramRegistry& r2, const Value& v) -> ElementId {
          if (v.ctor() == "Empty") return (*state_const)(r2, state);
          if (v.ctor() == "Cons") {
            const int next = kmp->step(state, v.field_value(0).symbol_name());
            if (next == kmp->match_length()) return (*state_const)(r2, next);
            return (*run)(r2, v.field_id(1), next);
          }
          if (v.ctor() == "Cont") {
            const ElementId first = (*run)(r2, v.field_id(0), state);
            const ElementId tail = v.field_id(1);
            return r2.chain(
                first, [kmp, state_const, run, tail](ProgramRegistry& r3, const Value& sv) {
                  const int s = static_cast<int>(sv.as_int());
                  if (s == kmp->match_length()) return (*state_const)(r3, s);
                  return (*run)(r3, tail, s);
                });
          }
          throw ModelError("unexpected sequence constructor: " + v.ctor());
        });
    memo->emplace(key, result);
    return result;
  };
  return run;
}

void check_pattern(const GnfGrammar& grammar, const std::vector<std::string>& pattern) {
  if (pattern.empty()) throw ModelError("pattern must be nonempty");
  const std::set<std::string> ts(grammar.terminals.begin(), grammar.terminals.end());
  for (const std::string& c : pattern) {
    if (!ts.count(c)) throw ModelError("pattern symbol is not a grammar terminal: " + c);
  }
}

}  // namespace

PcfgIds pcfg_model(ProgramRegistry& registry, const GnfGrammar& grammar,
                   const PcfgOptions& options) {
  validate(grammar);
  check_pattern(grammar, options.pattern);
  if (options.observe_pattern) check_pattern(grammar, *options.observe_pattern);

  struct GrammarState {
    GnfGrammar grammar;
    std::map<std::string, std::vector<std::size_t>> prods_by_lhs;
    ElementId empty_const;
  };
  auto gs = std::make_shared<GrammarState>();
  gs->grammar = grammar;
  for (std::size_t i = 0; i < grammar.productions.size(); ++i) {
    gs->prods_by_lhs[grammar.productions[i].lhs].push_back(i);
  }
  gs->empty_const = registry.constant(Value::constructed("Empty", {}));

  using SeqFn = std::function<ElementId(ProgramRegistry&, const std::string&)>;
  using RestFn =
      std::function<ElementId(ProgramRegistry&, const std::vector<std::string>&, std::size_t)>;
  auto nt_seq = std::make_shared<SeqFn>();
  auto rest_seq = std::make_shared<RestFn>();

  // Sequence of the nonterminals rhs[from..] as one element: a single
  // nonterminal links straight to its own derivation, longer suffixes become
  // a concatenation node.
  *rest_seq = [gs, nt_seq, rest_seq](ProgramRegistry& r, const std::vector<std::string>& rhs,
                                     std::size_t from) -> ElementId {
    if (from + 1 == rhs.size()) return (*nt_seq)(r, rhs[from]);
    const ElementId next = (*nt_seq)(r, rhs[from]);
    const ElementId tail = (*rest_seq)(r, rhs, from + 1);
    return r.constant(Value::constructed("Cont", {ValueField(next), ValueField(tail)}));
  };

  *nt_seq = [gs, rest_seq](ProgramRegistry& r, const std::string& nt) -> ElementId {
    const std::vector<std::size_t>& choices = gs->prods_by_lhs.at(nt);
    std::vector<std::pair<double, Value>> branches;
    branches.reserve(choices.size());
    for (const std::size_t idx : choices) {
      branches.emplace_back(gs->grammar.productions[idx].prob,
                            Value::integer(static_cast<std::int64_t>(idx)));
    }
    const ElementId pick = r.select(std::move(branches));
    return r.chain(pick, [gs, rest_seq](ProgramRegistry& r2, const Value& v) -> ElementId {
      const GnfProduction& p = gs->grammar.productions[static_cast<std::size_t>(v.as_int())];
      const ElementId tail = p.rhs.empty() ? gs->empty_const : (*rest_seq)(r2, p.rhs, 0);
      return r2.constant(Value::constructed(
          "Cons", {ValueField(Value::symbol(p.terminal)), ValueField(tail)}));
    });
  };

  PcfgIds ids;
  ids.sequence = (*nt_seq)(registry, grammar.nonterminals[0]);

  const std::shared_ptr<Runner> run = make_runner(options.pattern);
  const int m = static_cast<int>(options.pattern.size());
  ids.found = registry.equal_to((*run)(registry, ids.sequence, 0), Value::integer(m));

  if (options.observe_pattern) {
    const std::shared_ptr<Runner> run2 = make_runner(*options.observe_pattern);
    const int m2 = static_cast<int>(options.observe_pattern->size());
    const ElementId found2 =
        registry.equal_to((*run2)(registry, ids.sequence, 0), Value::integer(m2));
    registry.observe(found2, Value::boolean(true));
  }
  return ids;
}

IdentityChainIds identity_chain_model(ProgramRegistry& registry) {
  const ElementId unit_const = registry.constant(Value::unit());
  auto self = std::make_shared<ElementId>();
  const ElementId loop = registry.chain(
      unit_const, [self](ProgramRegistry&, const Value&) -> ElementId { return *self; });
  const ElementId query = registry.apply(
      {loop}, [](ProgramRegistry&, std::span<const Value> vs) -> Value { return vs[0]; });
  *self = query;
  return IdentityChainIds{query};
}

}  // namespace lfi::models
