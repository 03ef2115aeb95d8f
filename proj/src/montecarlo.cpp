#include "lfi/montecarlo.hpp"

#include <map>
#include <utility>
#include <vector>

#include "lfi/errors.hpp"

namespace lfi {

namespace {

struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

/// One sampled world: atomics are drawn once each on first use, derived
/// elements are evaluated recursively with a shrinking depth budget. Star
/// means the budget ran out below this point.
class WorldSampler {
 public:
  WorldSampler(ProgramRegistry& registry, SplitMix64& rng)
      : registry_(registry), rng_(rng) {}

  ExtendedValue eval(ElementId e, int depth) {
    if (depth < 0) return ExtendedValue::star();
    const Element& elem = registry_.element(e);
    if (elem.is_atomic()) {
      if (elem.kind() == Element::Kind::Constant) {
        return ExtendedValue(elem.as_constant().value);
      }
      return ExtendedValue(draw(e, elem));
    }
    const auto key = std::make_pair(e.raw, depth);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    ExtendedValue result = ExtendedValue::star();
    if (elem.kind() == Element::Kind::Apply) {
      std::vector<Value> args;
      bool star = false;
      for (ElementId arg : elem.as_apply().args) {
        const ExtendedValue v = eval(arg, depth - 1);
        if (v.is_star()) {
          star = true;
          break;
        }
        args.push_back(v.value());
      }
      if (!star) result = ExtendedValue(registry_.apply_result(e, args));
    } else {
      const ExtendedValue parent = eval(elem.as_chain().parent, depth - 1);
      if (!parent.is_star()) {
        result = eval(registry_.chain_result(e, parent.value()), depth - 1);
      }
    }
    memo_.emplace(key, result);
    return result;
  }

 private:
  Value draw(ElementId e, const Element& elem) {
    if (auto it = drawn_.find(e.raw); it != drawn_.end()) return it->second;
    const auto support = elem.atomic_support();
    const double u = rng_.uniform();
    double cumulative = 0.0;
    Value picked = support.back().first;
    for (const auto& [value, weight] : support) {
      cumulative += weight;
      if (u < cumulative) {
        picked = value;
        break;
      }
    }
    drawn_.emplace(e.raw, picked);
    return picked;
  }

  ProgramRegistry& registry_;
  SplitMix64& rng_;
  std::map<std::pair<std::uint64_t, int>, ExtendedValue> memo_;
  std::map<std::uint64_t, Value> drawn_;
};

}  // namespace

SampleEstimate sample_estimate(ProgramRegistry& registry, ElementId query,
                               std::span<const Evidence> evidence, const Value& target,
                               int depth_budget, std::uint64_t num_samples,
                               std::uint64_t seed) {
  if (depth_budget < 0) throw ModelError("depth budget must be nonnegative");
  SplitMix64 rng(seed);
  SampleEstimate out;

  for (std::uint64_t i = 0; i < num_samples; ++i) {
    ++out.samples;
    WorldSampler world(registry, rng);

    const ExtendedValue qv = world.eval(query, depth_budget);
    std::vector<ExtendedValue> target_values;
    bool truncated = qv.is_star();
    if (!truncated) {
      for (const Evidence& ev : evidence) {
        const ExtendedValue tv = world.eval(ev.target, depth_budget);
        if (tv.is_star()) {
          truncated = true;
          break;
        }
        target_values.push_back(tv);
      }
    }
    if (truncated) {
      ++out.truncated;
      continue;
    }

    bool accepted = true;
    for (std::size_t k = 0; k < evidence.size(); ++k) {
      const Evidence& ev = evidence[k];
      const Value& u = target_values[k].value();
      if (ev.is_observation()) {
        if (u != ev.observation().value) {
          accepted = false;
          break;
        }
      } else {
        const double w = ev.soft().weight(u);
        if (!(w >= 0.0 && w <= 1.0)) {
          throw ModelError("soft constraint weight " + std::to_string(w) + " outside [0,1]");
        }
        if (rng.uniform() >= w) {
          accepted = false;
          break;
        }
      }
    }
    if (!accepted) {
      ++out.rejected;
      continue;
    }

    ++out.usable;
    if (qv.value() == target) ++out.positives;
  }

  if (out.usable == 0) {
    throw EstimateUnavailable("no usable world in " + std::to_string(num_samples) + " samples");
  }
  out.estimate = static_cast<double>(out.positives) / static_cast<double>(out.usable);
  return out;
}

}  // namespace lfi
