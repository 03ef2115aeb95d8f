#include "lfi/bp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lfi/errors.hpp"

namespace lfi {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

/// Linear- or log-space scalar semantics for the message math.
struct DomainOps {
  bool log = false;
  double one() const { return log ? 0.0 : 1.0; }
  double zero() const { return log ? kNegInf : 0.0; }
  double mul(double a, double b) const { return log ? a + b : a * b; }
  double add(double a, double b) const { return log ? log_sum_exp(a, b) : a + b; }
  double lift(double x) const { return log ? (x > 0.0 ? std::log(x) : kNegInf) : x; }
  double lower(double x) const { return log ? std::exp(x) : x; }
  double mix(double share_old, double old_v, double fresh) const {
    if (share_old <= 0.0) return fresh;
    if (log) {
      return log_sum_exp(std::log(share_old) + old_v, std::log1p(-share_old) + fresh);
    }
    return share_old * old_v + (1.0 - share_old) * fresh;
  }
  /// Distance in probability terms, so convergence thresholds mean the same
  /// thing in both domains.
  double diff(double a, double b) const {
    const double la = lower(a), lb = lower(b);
    if (la == lb) return 0.0;
    return std::abs(la - lb);
  }
};

struct Message {
  std::vector<double> lo, hi;
};

struct Edge {
  std::size_t factor = 0;
  std::size_t var_node = 0;
  std::size_t pos = 0;  // position of the variable inside the factor
};

struct Graph {
  std::vector<Var> var_nodes;
  std::unordered_map<std::uint64_t, std::size_t> node_of;
  std::vector<Edge> edges;
  std::vector<std::vector<std::size_t>> var_edges;     // per var node
  std::vector<std::vector<std::size_t>> factor_edges;  // per factor, aligned with vars
  std::vector<std::size_t> component;                  // per var node
  std::size_t num_components = 0;
  std::vector<bool> component_cyclic;
};

Graph build_graph(std::span<const Factor> factors) {
  Graph g;
  for (std::size_t fi = 0; fi < factors.size(); ++fi) {
    for (const Var& v : factors[fi].vars()) {
      auto [it, inserted] = g.node_of.emplace(v.id.raw, g.var_nodes.size());
      if (inserted) {
        g.var_nodes.push_back(v);
        g.var_edges.emplace_back();
      } else if (!(g.var_nodes[it->second] == v)) {
        throw InternalError("variable @" + std::to_string(v.id.raw) +
                            " disagrees between factors");
      }
    }
  }
  g.factor_edges.resize(factors.size());
  for (std::size_t fi = 0; fi < factors.size(); ++fi) {
    const auto& vars = factors[fi].vars();
    for (std::size_t pos = 0; pos < vars.size(); ++pos) {
      const std::size_t node = g.node_of.at(vars[pos].id.raw);
      const std::size_t edge_idx = g.edges.size();
      g.edges.push_back(Edge{fi, node, pos});
      g.var_edges[node].push_back(edge_idx);
      g.factor_edges[fi].push_back(edge_idx);
    }
  }

  // Connected components over variable nodes (factors of arity >= 2 join them).
  std::vector<std::size_t> parent(g.var_nodes.size());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& fe : g.factor_edges) {
    for (std::size_t i = 1; i < fe.size(); ++i) {
      const std::size_t a = find(g.edges[fe[0]].var_node);
      const std::size_t b = find(g.edges[fe[i]].var_node);
      if (a != b) parent[a] = b;
    }
  }
  std::unordered_map<std::size_t, std::size_t> comp_index;
  g.component.resize(g.var_nodes.size());
  for (std::size_t i = 0; i < g.var_nodes.size(); ++i) {
    const std::size_t root = find(i);
    auto [it, inserted] = comp_index.emplace(root, g.num_components);
    if (inserted) ++g.num_components;
    g.component[i] = it->second;
  }

  // A connected bipartite component is cyclic iff edges exceed nodes - 1.
  std::vector<std::size_t> comp_edges(g.num_components, 0);
  std::vector<std::size_t> comp_nodes(g.num_components, 0);
  std::vector<bool> comp_seen_factor(factors.size(), false);
  for (std::size_t i = 0; i < g.var_nodes.size(); ++i) ++comp_nodes[g.component[i]];
  for (const Edge& e : g.edges) {
    ++comp_edges[g.component[e.var_node]];
    if (!comp_seen_factor[e.factor]) {
      comp_seen_factor[e.factor] = true;
      ++comp_nodes[g.component[e.var_node]];
    }
  }
  g.component_cyclic.assign(g.num_components, false);
  for (std::size_t c = 0; c < g.num_components; ++c) {
    g.component_cyclic[c] = comp_edges[c] + 1 > comp_nodes[c];
  }
  return g;
}

}  // namespace

BpResult run_bp(std::span<const Factor> factors, ElementId query_var,
                const BpOptions& options) {
  if (options.damping < 0.0 || options.damping >= 1.0) {
    throw ModelError("bp damping must lie in [0,1)");
  }
  Graph g = build_graph(factors);
  auto query_it = g.node_of.find(query_var.raw);
  if (query_it == g.node_of.end()) {
    throw InternalError("query variable @" + std::to_string(query_var.raw) +
                        " absent from all factors");
  }
  const std::size_t query_node = query_it->second;

  const bool any_cycle =
      std::any_of(g.component_cyclic.begin(), g.component_cyclic.end(), [](bool b) { return b; });
  const bool normalize = options.normalize_messages.value_or(any_cycle);
  const DomainOps ops{options.log_domain};

  std::vector<Message> var_to_factor(g.edges.size());
  std::vector<Message> factor_to_var(g.edges.size());
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const std::size_t n = g.var_nodes[g.edges[e].var_node].arity();
    var_to_factor[e].lo.assign(n, ops.one());
    var_to_factor[e].hi.assign(n, ops.one());
    factor_to_var[e].lo.assign(n, ops.one());
    factor_to_var[e].hi.assign(n, ops.one());
  }

  const auto finish_message = [&](Message fresh, Message& slot) -> double {
    if (normalize) {
      double total = ops.zero();
      for (double x : fresh.hi) total = ops.add(total, x);
      if (ops.lower(total) > 0.0) {
        for (double& x : fresh.lo) x = ops.log ? x - total : x / ops.lower(total);
        for (double& x : fresh.hi) x = ops.log ? x - total : x / ops.lower(total);
      }
    }
    double delta = 0.0;
    for (std::size_t i = 0; i < fresh.lo.size(); ++i) {
      fresh.lo[i] = ops.mix(options.damping, slot.lo[i], fresh.lo[i]);
      fresh.hi[i] = ops.mix(options.damping, slot.hi[i], fresh.hi[i]);
      delta = std::max(delta, ops.diff(fresh.lo[i], slot.lo[i]));
      delta = std::max(delta, ops.diff(fresh.hi[i], slot.hi[i]));
    }
    slot = std::move(fresh);
    return delta;
  };

  BpResult result{Factor::scalar(0.0, 0.0), false, 0, any_cycle};
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    double delta = 0.0;

    // Variable -> factor: product of the other incoming factor messages.
    std::vector<Message> fresh_vf(g.edges.size());
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      const Edge& edge = g.edges[e];
      const std::size_t n = g.var_nodes[edge.var_node].arity();
      Message m;
      m.lo.assign(n, ops.one());
      m.hi.assign(n, ops.one());
      for (std::size_t other : g.var_edges[edge.var_node]) {
        if (other == e) continue;
        for (std::size_t x = 0; x < n; ++x) {
          m.lo[x] = ops.mul(m.lo[x], factor_to_var[other].lo[x]);
          m.hi[x] = ops.mul(m.hi[x], factor_to_var[other].hi[x]);
        }
      }
      fresh_vf[e] = std::move(m);
    }
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      delta = std::max(delta, finish_message(std::move(fresh_vf[e]), var_to_factor[e]));
    }

    // Factor -> variable: weighted sum over the other variables' assignments.
    for (std::size_t fi = 0; fi < factors.size(); ++fi) {
      const Factor& f = factors[fi];
      if (f.vars().empty()) continue;
      const auto& fe = g.factor_edges[fi];
      std::vector<Message> fresh(fe.size());
      for (std::size_t t = 0; t < fe.size(); ++t) {
        const std::size_t n = f.vars()[t].arity();
        fresh[t].lo.assign(n, ops.zero());
        fresh[t].hi.assign(n, ops.zero());
      }
      f.for_each([&](std::span<const std::size_t> digits, std::size_t flat) {
        const double f_lo = ops.lift(f.lo_at(flat));
        const double f_hi = ops.lift(f.hi_at(flat));
        for (std::size_t t = 0; t < fe.size(); ++t) {
          double term_lo = f_lo, term_hi = f_hi;
          for (std::size_t s = 0; s < fe.size(); ++s) {
            if (s == t) continue;
            term_lo = ops.mul(term_lo, var_to_factor[fe[s]].lo[digits[s]]);
            term_hi = ops.mul(term_hi, var_to_factor[fe[s]].hi[digits[s]]);
          }
          fresh[t].lo[digits[t]] = ops.add(fresh[t].lo[digits[t]], term_lo);
          fresh[t].hi[digits[t]] = ops.add(fresh[t].hi[digits[t]], term_hi);
        }
      });
      for (std::size_t t = 0; t < fe.size(); ++t) {
        delta = std::max(delta, finish_message(std::move(fresh[t]), factor_to_var[fe[t]]));
      }
    }

    result.iterations = iter;
    if (delta < options.tolerance) {
      result.converged = true;
      break;
    }
  }

  // Beliefs: product of incoming messages, in linear space.
  const auto belief = [&](std::size_t node) {
    const std::size_t n = g.var_nodes[node].arity();
    std::vector<std::pair<double, double>> b(n, {ops.one(), ops.one()});
    for (std::size_t e : g.var_edges[node]) {
      for (std::size_t x = 0; x < n; ++x) {
        b[x].first = ops.mul(b[x].first, factor_to_var[e].lo[x]);
        b[x].second = ops.mul(b[x].second, factor_to_var[e].hi[x]);
      }
    }
    for (auto& [lo, hi] : b) {
      lo = ops.lower(lo);
      hi = ops.lower(hi);
    }
    return b;
  };

  // Residues that variable elimination would fold in: variable-free factors
  // and the mass of components not containing the query.
  double scale_lo = 1.0, scale_hi = 1.0;
  for (const Factor& f : factors) {
    if (f.vars().empty()) {
      scale_lo *= f.lo_at(0);
      scale_hi *= f.hi_at(0);
    }
  }
  std::vector<std::size_t> comp_rep(g.num_components, static_cast<std::size_t>(-1));
  for (std::size_t node = 0; node < g.var_nodes.size(); ++node) {
    std::size_t& rep = comp_rep[g.component[node]];
    if (rep == static_cast<std::size_t>(-1) ||
        g.var_nodes[node].id < g.var_nodes[rep].id) {
      rep = node;
    }
  }
  for (std::size_t c = 0; c < g.num_components; ++c) {
    if (c == g.component[query_node]) continue;
    double z_lo = 0.0, z_hi = 0.0;
    for (const auto& [lo, hi] : belief(comp_rep[c])) {
      z_lo += lo;
      z_hi += hi;
    }
    scale_lo *= z_lo;
    scale_hi *= z_hi;
  }

  Factor out({g.var_nodes[query_node]});
  const auto q = belief(query_node);
  for (std::size_t x = 0; x < q.size(); ++x) {
    out.set_at(x, q[x].first * scale_lo, q[x].second * scale_hi);
  }
  result.query_factor = std::move(out);
  return result;
}

}  // namespace lfi
