#include "lfi/ve.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "lfi/errors.hpp"

namespace lfi {

namespace {

struct Node {
  std::size_t arity = 0;
  std::set<ElementId> neighbors;
  bool eliminated = false;
};

struct Score {
  std::size_t fill = 0;
  double table_size = 1.0;

  bool operator<(const Score& other) const {
    if (fill != other.fill) return fill < other.fill;
    return table_size < other.table_size;
  }
};

Score score_of(const std::unordered_map<std::uint64_t, Node>& graph, const Node& node) {
  Score s;
  s.table_size = 1.0;
  std::vector<ElementId> nb(node.neighbors.begin(), node.neighbors.end());
  for (std::size_t i = 0; i < nb.size(); ++i) {
    s.table_size *= static_cast<double>(graph.at(nb[i].raw).arity);
    for (std::size_t j = i + 1; j < nb.size(); ++j) {
      if (!graph.at(nb[i].raw).neighbors.count(nb[j])) ++s.fill;
    }
  }
  return s;
}

}  // namespace

std::vector<ElementId> elimination_order(std::span<const Factor> factors,
                                         ElementId query_var) {
  std::unordered_map<std::uint64_t, Node> graph;
  bool query_seen = false;
  for (const Factor& f : factors) {
    for (const Var& v : f.vars()) {
      Node& n = graph[v.id.raw];
      n.arity = v.arity();
      if (v.id == query_var) query_seen = true;
    }
    for (std::size_t i = 0; i < f.vars().size(); ++i) {
      for (std::size_t j = i + 1; j < f.vars().size(); ++j) {
        graph[f.vars()[i].id.raw].neighbors.insert(f.vars()[j].id);
        graph[f.vars()[j].id.raw].neighbors.insert(f.vars()[i].id);
      }
    }
  }
  if (!query_seen) {
    throw InternalError("query variable @" + std::to_string(query_var.raw) +
                        " absent from all factors");
  }

  std::vector<ElementId> candidates;
  for (const auto& [raw, node] : graph) {
    if (ElementId{raw} != query_var) candidates.push_back(ElementId{raw});
  }
  std::sort(candidates.begin(), candidates.end());

  std::unordered_map<std::uint64_t, Score> scores;
  for (ElementId id : candidates) scores[id.raw] = score_of(graph, graph.at(id.raw));

  std::vector<ElementId> order;
  order.reserve(candidates.size());
  std::unordered_set<std::uint64_t> remaining;
  for (ElementId id : candidates) remaining.insert(id.raw);

  while (!remaining.empty()) {
    ElementId best{0};
    bool have_best = false;
    for (ElementId id : candidates) {
      if (!remaining.count(id.raw)) continue;
      if (!have_best || scores[id.raw] < scores[best.raw]) {
        best = id;
        have_best = true;  // candidates are ascending, so ties keep the smaller id
      }
    }

    Node& node = graph.at(best.raw);
    std::vector<ElementId> nb(node.neighbors.begin(), node.neighbors.end());
    std::unordered_set<std::uint64_t> dirty;
    for (std::size_t i = 0; i < nb.size(); ++i) {
      dirty.insert(nb[i].raw);
      for (std::size_t j = i + 1; j < nb.size(); ++j) {
        if (graph.at(nb[i].raw).neighbors.insert(nb[j]).second) {
          graph.at(nb[j].raw).neighbors.insert(nb[i]);
          for (ElementId w : graph.at(nb[i].raw).neighbors) dirty.insert(w.raw);
          for (ElementId w : graph.at(nb[j].raw).neighbors) dirty.insert(w.raw);
        }
      }
    }
    for (ElementId n : nb) {
      graph.at(n.raw).neighbors.erase(best);
      for (ElementId w : graph.at(n.raw).neighbors) dirty.insert(w.raw);
    }
    node.eliminated = true;
    order.push_back(best);
    remaining.erase(best.raw);

    for (std::uint64_t raw : dirty) {
      if (remaining.count(raw)) scores[raw] = score_of(graph, graph.at(raw));
    }
  }
  return order;
}

namespace {

ScalarFactor run_scalar_pass(std::vector<ScalarFactor> tables,
                             std::span<const ElementId> order, ElementId query_var) {
  for (ElementId v : order) {
    std::vector<ScalarFactor> group;
    std::vector<ScalarFactor> rest;
    for (auto& t : tables) {
      bool mentions = false;
      for (const Var& var : t.vars) {
        if (var.id == v) {
          mentions = true;
          break;
        }
      }
      (mentions ? group : rest).push_back(std::move(t));
    }
    if (group.empty()) {
      tables = std::move(rest);
      continue;
    }
    ScalarFactor prod = std::move(group[0]);
    for (std::size_t i = 1; i < group.size(); ++i) prod = scalar_product(prod, group[i]);
    rest.push_back(scalar_marginalize(prod, v));
    tables = std::move(rest);
  }

  ScalarFactor result{{}, {1.0}};
  for (const ScalarFactor& t : tables) result = scalar_product(result, t);
  if (result.vars.size() != 1 || !(result.vars[0].id == query_var)) {
    throw InternalError("elimination left variables other than the query");
  }
  return result;
}

}  // namespace

Factor run_ve_with_order(std::span<const Factor> factors, ElementId query_var,
                         std::span<const ElementId> order) {
  std::unordered_set<std::uint64_t> all_vars;
  bool query_seen = false;
  for (const Factor& f : factors) {
    for (const Var& v : f.vars()) {
      all_vars.insert(v.id.raw);
      if (v.id == query_var) query_seen = true;
    }
  }
  if (!query_seen) {
    throw InternalError("query variable @" + std::to_string(query_var.raw) +
                        " absent from all factors");
  }
  std::unordered_set<std::uint64_t> order_set;
  for (ElementId v : order) {
    if (v == query_var) throw InternalError("elimination order contains the query");
    if (!order_set.insert(v.raw).second) {
      throw InternalError("elimination order repeats @" + std::to_string(v.raw));
    }
    if (!all_vars.count(v.raw)) {
      throw InternalError("elimination order names unknown variable @" +
                          std::to_string(v.raw));
    }
  }
  if (order_set.size() != all_vars.size() - 1) {
    throw InternalError("elimination order does not cover all non-query variables");
  }

  std::vector<ScalarFactor> lo, hi;
  lo.reserve(factors.size());
  hi.reserve(factors.size());
  for (const Factor& f : factors) {
    lo.push_back(lower_table(f));
    hi.push_back(upper_table(f));
  }
  ScalarFactor lo_result = run_scalar_pass(std::move(lo), order, query_var);
  ScalarFactor hi_result = run_scalar_pass(std::move(hi), order, query_var);
  return pair_tables(lo_result, hi_result);
}

Factor run_ve(std::span<const Factor> factors, ElementId query_var) {
  const std::vector<ElementId> order = elimination_order(factors, query_var);
  return run_ve_with_order(factors, query_var, order);
}

}  // namespace lfi
