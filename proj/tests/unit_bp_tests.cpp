#include <vector>

#include "doctest.h"
#include "lfi/bp.hpp"
#include "lfi/errors.hpp"
#include "lfi/factor.hpp"
#include "lfi/ve.hpp"
#include "test_util.hpp"

using lfi::BpOptions;
using lfi::BpResult;
using lfi::ElementId;
using lfi::Factor;
using lfi::Var;

namespace {

Var make_var(std::uint64_t raw, int arity) {
  return Var{ElementId{raw}, testutil::int_range(arity)};
}

bool factor_close(const Factor& a, const Factor& b, double tol) {
  if (!(a.vars() == b.vars()) || a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!testutil::close(a.lo_at(i), b.lo_at(i), tol)) return false;
    if (!testutil::close(a.hi_at(i), b.hi_at(i), tol)) return false;
  }
  return true;
}

/// Normalizes both halves by the hi mass so scale-free comparisons work.
Factor normalized(const Factor& f) {
  double total = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) total += f.hi_at(i);
  Factor out = f;
  for (std::size_t i = 0; i < f.size(); ++i) {
    out.set_at(i, f.lo_at(i) / total, f.hi_at(i) / total);
  }
  return out;
}

std::vector<Factor> three_cycle() {
  const Var a = make_var(1, 2), b = make_var(2, 2), c = make_var(3, 2);
  auto coupling = [](const Var& x, const Var& y, double same, double diff) {
    Factor f({x, y});
    f.for_each([&](std::span<const std::size_t> d, std::size_t flat) {
      const double v = d[0] == d[1] ? same : diff;
      f.set_at(flat, v, v);
    });
    return f;
  };
  return {coupling(a, b, 0.9, 0.4), coupling(b, c, 0.8, 0.3), coupling(a, c, 0.7, 0.2)};
}

}  // namespace

TEST_CASE("single variable with unary factors multiplies them") {
  const Var v = make_var(1, 2);
  Factor f1({v});
  f1.set_at(0, 0.25, 0.5);
  f1.set_at(1, 0.5, 0.5);
  Factor f2({v});
  f2.set_at(0, 0.4, 0.4);
  f2.set_at(1, 0.1, 0.3);
  const std::vector<Factor> factors{f1, f2};
  const BpResult res = lfi::run_bp(factors, v.id);
  CHECK(res.converged);
  CHECK_FALSE(res.approximate);
  CHECK(res.query_factor.lo_at(0) == doctest::Approx(0.1));
  CHECK(res.query_factor.hi_at(0) == doctest::Approx(0.2));
  CHECK(res.query_factor.lo_at(1) == doctest::Approx(0.05));
  CHECK(res.query_factor.hi_at(1) == doctest::Approx(0.15));
}

TEST_CASE("tree results equal elimination exactly when normalization is off") {
  testutil::Rng rng(314);
  BpOptions options;
  options.normalize_messages = false;
  for (int round = 0; round < 12; ++round) {
    const auto sys = testutil::random_tree_system(rng, 7, 3);
    const BpResult bp = lfi::run_bp(sys.factors, sys.query, options);
    const Factor ve = lfi::run_ve(sys.factors, sys.query);
    CHECK(bp.converged);
    CHECK_FALSE(bp.approximate);
    CHECK(factor_close(bp.query_factor, ve, 1e-9));
  }
}

TEST_CASE("normalized tree runs agree after rescaling") {
  testutil::Rng rng(2718);
  BpOptions options;
  options.normalize_messages = true;
  for (int round = 0; round < 8; ++round) {
    const auto sys = testutil::random_tree_system(rng, 6, 3);
    const BpResult bp = lfi::run_bp(sys.factors, sys.query, options);
    const Factor ve = lfi::run_ve(sys.factors, sys.query);
    CHECK(bp.converged);
    CHECK(factor_close(normalized(bp.query_factor), normalized(ve), 1e-9));
  }
}

TEST_CASE("log domain matches the linear domain on trees") {
  testutil::Rng rng(55);
  for (int round = 0; round < 8; ++round) {
    const auto sys = testutil::random_tree_system(rng, 6, 3);
    BpOptions linear;
    linear.normalize_messages = false;
    BpOptions logd;
    logd.normalize_messages = false;
    logd.log_domain = true;
    const BpResult a = lfi::run_bp(sys.factors, sys.query, linear);
    const BpResult b = lfi::run_bp(sys.factors, sys.query, logd);
    CHECK(factor_close(a.query_factor, b.query_factor, 1e-9));
  }
}

TEST_CASE("damping still converges to the tree fixpoint") {
  testutil::Rng rng(99);
  const auto sys = testutil::random_tree_system(rng, 6, 3);
  BpOptions options;
  options.normalize_messages = false;
  options.damping = 0.35;
  options.max_iterations = 400;
  const BpResult damped = lfi::run_bp(sys.factors, sys.query, options);
  const Factor ve = lfi::run_ve(sys.factors, sys.query);
  CHECK(damped.converged);
  CHECK(factor_close(damped.query_factor, ve, 1e-7));
}

TEST_CASE("cycles are flagged approximate and beliefs stay sane") {
  const auto factors = three_cycle();
  const BpResult res = lfi::run_bp(factors, ElementId{1});
  CHECK(res.approximate);
  CHECK(res.iterations > 0);
  REQUIRE(res.query_factor.vars().size() == 1);
  for (std::size_t i = 0; i < res.query_factor.size(); ++i) {
    CHECK(res.query_factor.lo_at(i) >= 0.0);
    CHECK(res.query_factor.lo_at(i) == doctest::Approx(res.query_factor.hi_at(i)));
  }
}

TEST_CASE("iteration cap reports non-convergence without throwing") {
  const auto factors = three_cycle();
  BpOptions options;
  options.max_iterations = 1;
  const BpResult res = lfi::run_bp(factors, ElementId{1}, options);
  CHECK_FALSE(res.converged);
  CHECK(res.iterations == 1);
  CHECK(res.query_factor.size() == 2);
}

TEST_CASE("disconnected residues and scalars fold in like elimination") {
  testutil::Rng rng(404);
  // Two independent trees; query sits in the first.
  auto sys = testutil::random_tree_system(rng, 5, 3);
  auto other = testutil::random_tree_system(rng, 4, 3);
  const std::uint64_t offset = 100;
  for (auto& f : other.factors) {
    std::vector<Var> shifted = f.vars();
    for (Var& v : shifted) v.id.raw += offset;
    Factor g(shifted);
    for (std::size_t i = 0; i < f.size(); ++i) g.set_at(i, f.lo_at(i), f.hi_at(i));
    sys.factors.push_back(std::move(g));
  }
  sys.factors.push_back(Factor::scalar(0.5, 2.0));

  BpOptions options;
  options.normalize_messages = false;
  const BpResult bp = lfi::run_bp(sys.factors, sys.query, options);
  const Factor ve = lfi::run_ve(sys.factors, sys.query);
  CHECK(factor_close(bp.query_factor, ve, 1e-9));
}

TEST_CASE("option validation") {
  const Var v = make_var(1, 2);
  Factor f({v});
  f.set_at(0, 1.0, 1.0);
  f.set_at(1, 1.0, 1.0);
  const std::vector<Factor> factors{f};
  BpOptions bad;
  bad.damping = 1.0;
  CHECK_THROWS_AS((void)lfi::run_bp(factors, v.id, bad), lfi::ModelError);
  bad.damping = -0.1;
  CHECK_THROWS_AS((void)lfi::run_bp(factors, v.id, bad), lfi::ModelError);
  CHECK_THROWS_AS((void)lfi::run_bp(factors, ElementId{9}), lfi::InternalError);
}
