#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lfi/model.hpp"
#include "lfi/value.hpp"

namespace lfi::models {

struct RandomListIds {
  ElementId list;
  ElementId contains_a;
  ElementId contains_b;
};

/// Recursive random list: each cell continues with probability 1/2 and draws
/// its symbol from {a: 0.6, b: 0.4}. Wires up membership tests for both
/// symbols; when observe_contains_a is set, adds the observation
/// contains(a) == true, making contains(b) the usual conditional query.
RandomListIds random_list_model(ProgramRegistry& registry, bool observe_contains_a = true);

struct HmmConfig {
  int initial_state = 7;
  /// One boolean emission observation per step, starting at step 1. Empty
  /// means no evidence.
  std::vector<bool> observations = std::vector<bool>(10, true);
};

struct HmmIds {
  ElementId reach_top;  // true when the walk hits state 14 before state 0
};

/// Unbounded-horizon walk on states 0..14: from s it moves to s+1 with
/// probability s/14, else to s-1; 0 and 14 absorb. Each step emits
/// Flip(s/14). The query asks whether the walk is eventually absorbed at the
/// top. Time steps are materialized lazily, one per expansion depth level.
HmmIds infinite_hmm_model(ProgramRegistry& registry, const HmmConfig& config = {});

struct GnfProduction {
  std::string lhs;
  double prob = 0.0;
  std::string terminal;
  std::vector<std::string> rhs;  // nonterminals following the terminal
};

/// Stochastic grammar in Greibach normal form: every production emits one
/// terminal followed by zero or more nonterminals. nonterminals[0] is the
/// start symbol.
struct GnfGrammar {
  std::vector<std::string> nonterminals;
  std::vector<std::string> terminals;
  std::vector<GnfProduction> productions;
};

/// Structural checks: symbols nonempty and known, every nonterminal produced,
/// probabilities positive and summing to one per nonterminal (1e-9).
/// Throws ModelError.
void validate(const GnfGrammar& grammar);

/// Parses the JSON object {"nonterminals": [...], "terminals": [...],
/// "productions": [{"lhs", "prob", "terminal", "rhs"}, ...]} and validates it.
GnfGrammar load_grammar_json(const std::string& text);

/// S -> a T S (0.2) | b T (0.3) | c (0.5); T -> d V (0.4) | e (0.6);
/// V -> d (0.5) | e T (0.5). Subcritical: derivations finish almost surely.
GnfGrammar finite_example_grammar();

/// S -> a S S (0.6) | b (0.2) | c (0.2). Supercritical: a derivation runs
/// forever with probability 1/3.
GnfGrammar infinite_example_grammar();

/// Probability that each nonterminal derives a finite string, via fixpoint
/// iteration x(A) <- sum_p prob(p) * prod_{B in rhs(p)} x(B) from zero.
std::map<std::string, double> extinction_probabilities(const GnfGrammar& grammar,
                                                       int iterations = 20000,
                                                       double tolerance = 1e-13);

struct PcfgOptions {
  std::vector<std::string> pattern;  // consecutive terminals to search for
  /// When set, the model observes that this second pattern occurs.
  std::optional<std::vector<std::string>> observe_pattern;
};

struct PcfgIds {
  ElementId sequence;  // lazy terminal sequence derived from the start symbol
  ElementId found;     // true when pattern occurs somewhere in the sequence
};

/// Derivation of the grammar as a lazy terminal sequence, scanned by a prefix
/// automaton that absorbs on the first full match of the pattern.
PcfgIds pcfg_model(ProgramRegistry& registry, const GnfGrammar& grammar,
                   const PcfgOptions& options);

struct IdentityChainIds {
  ElementId query;
};

/// Degenerate self-referential program: the query feeds itself through an
/// identity function, so no finite depth resolves it and every depth reports
/// the vacuous bounds.
IdentityChainIds identity_chain_model(ProgramRegistry& registry);

}  // namespace lfi::models
