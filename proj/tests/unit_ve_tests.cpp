#include <algorithm>
#include <vector>

#include "doctest.h"
#include "lfi/errors.hpp"
#include "lfi/factor.hpp"
#include "lfi/oracle.hpp"
#include "lfi/ve.hpp"
#include "test_util.hpp"

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

}  // namespace

TEST_CASE("hand-checked two-variable chain") {
  const Var a = make_var(1, 2), b = make_var(2, 2);
  Factor pa({a});
  pa.set_at(0, 0.3, 0.3);
  pa.set_at(1, 0.7, 0.7);
  Factor pba({a, b});
  pba.set(std::vector<std::size_t>{0, 0}, 0.9, 0.9);
  pba.set(std::vector<std::size_t>{0, 1}, 0.1, 0.1);
  pba.set(std::vector<std::size_t>{1, 0}, 0.4, 0.4);
  pba.set(std::vector<std::size_t>{1, 1}, 0.6, 0.6);

  const std::vector<Factor> factors{pa, pba};
  const Factor m = lfi::run_ve(factors, b.id);
  REQUIRE(m.vars().size() == 1);
  CHECK(m.vars()[0].id == b.id);
  CHECK(m.lo_at(0) == doctest::Approx(0.3 * 0.9 + 0.7 * 0.4));
  CHECK(m.lo_at(1) == doctest::Approx(0.3 * 0.1 + 0.7 * 0.6));
  CHECK(m.hi_at(0) == doctest::Approx(0.55));
}

TEST_CASE("disconnected components fold in as scalar residues") {
  const Var q = make_var(1, 2), other = make_var(2, 3);
  Factor fq({q});
  fq.set_at(0, 0.2, 0.2);
  fq.set_at(1, 0.5, 0.5);
  Factor fo({other});
  fo.set_at(0, 0.5, 1.0);
  fo.set_at(1, 0.25, 0.5);
  fo.set_at(2, 0.25, 0.5);

  const std::vector<Factor> factors{fq, fo};
  const Factor m = lfi::run_ve(factors, q.id);
  // The other component sums to [1, 2] and scales the query factor.
  CHECK(m.lo_at(0) == doctest::Approx(0.2));
  CHECK(m.hi_at(0) == doctest::Approx(0.4));
  CHECK(m.lo_at(1) == doctest::Approx(0.5));
  CHECK(m.hi_at(1) == doctest::Approx(1.0));
}

TEST_CASE("variable-free factors scale the result") {
  const Var q = make_var(1, 2);
  Factor fq({q});
  fq.set_at(0, 0.5, 0.5);
  fq.set_at(1, 0.5, 0.6);
  const std::vector<Factor> factors{fq, Factor::scalar(2.0, 3.0)};
  const Factor m = lfi::run_ve(factors, q.id);
  CHECK(m.lo_at(0) == doctest::Approx(1.0));
  CHECK(m.hi_at(0) == doctest::Approx(1.5));
  CHECK(m.hi_at(1) == doctest::Approx(1.8));
}

TEST_CASE("query variable missing from the factors is an internal error") {
  const Var a = make_var(1, 2);
  Factor fa({a});
  fa.set_at(0, 1.0, 1.0);
  fa.set_at(1, 1.0, 1.0);
  const std::vector<Factor> factors{fa};
  CHECK_THROWS_AS((void)lfi::run_ve(factors, ElementId{9}), lfi::InternalError);
}

TEST_CASE("elimination order covers exactly the non-query variables") {
  testutil::Rng rng(2024);
  for (int round = 0; round < 20; ++round) {
    const auto sys = testutil::random_system(rng, 6, 3, true);
    const auto order = lfi::elimination_order(sys.factors, sys.query);
    CHECK(order.size() == sys.vars.size() - 1);
    std::vector<ElementId> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
    CHECK(std::find(order.begin(), order.end(), sys.query) == order.end());
  }
}

TEST_CASE("min-fill prefers the leaf and breaks ties toward smaller ids") {
  // Star graph: center 1 connected to 2,3,4; query 4. Eliminating a leaf adds
  // no fill edge; eliminating the center fills the leaf clique.
  const Var center = make_var(1, 2), l2 = make_var(2, 2), l3 = make_var(3, 2),
            q = make_var(4, 2);
  auto edge = [](const Var& x, const Var& y) {
    Factor f({x, y});
    f.for_each([&](std::span<const std::size_t>, std::size_t flat) {
      f.set_at(flat, 1.0, 1.0);
    });
    return f;
  };
  const std::vector<Factor> factors{edge(center, l2), edge(center, l3), edge(center, q)};
  const auto order = lfi::elimination_order(factors, q.id);
  REQUIRE(order.size() == 3);
  CHECK(order[0] == l2.id);  // leaves first, smaller id breaking the tie
  CHECK(order[1] == l3.id);
  CHECK(order[2] == center.id);
}

TEST_CASE("explicit orders validate their inputs") {
  const Var a = make_var(1, 2), b = make_var(2, 2);
  Factor f({a, b});
  f.for_each([&](std::span<const std::size_t>, std::size_t flat) {
    f.set_at(flat, 0.5, 0.5);
  });
  const std::vector<Factor> factors{f};

  const std::vector<ElementId> good{a.id};
  CHECK_NOTHROW((void)lfi::run_ve_with_order(factors, b.id, good));
  const std::vector<ElementId> with_query{a.id, b.id};
  CHECK_THROWS_AS((void)lfi::run_ve_with_order(factors, b.id, with_query), lfi::InternalError);
  const std::vector<ElementId> empty;
  CHECK_THROWS_AS((void)lfi::run_ve_with_order(factors, b.id, empty), lfi::InternalError);
  const std::vector<ElementId> dup{a.id, a.id};
  CHECK_THROWS_AS((void)lfi::run_ve_with_order(factors, b.id, dup), lfi::InternalError);
  const std::vector<ElementId> unknown{a.id, ElementId{42}};
  CHECK_THROWS_AS((void)lfi::run_ve_with_order(factors, b.id, unknown), lfi::InternalError);
}

TEST_CASE("agreement with exhaustive summation on random systems") {
  testutil::Rng rng(77);
  for (int round = 0; round < 40; ++round) {
    const auto sys = testutil::random_system(rng, 6, 3, round % 2 == 0);
    const Factor ve = lfi::run_ve(sys.factors, sys.query);
    const Factor naive = lfi::naive_sum(sys.factors, sys.query);
    CHECK(factor_close(ve, naive, 1e-12));
  }
}

TEST_CASE("any valid elimination order gives the same marginal") {
  testutil::Rng rng(991);
  for (int round = 0; round < 15; ++round) {
    const auto sys = testutil::random_system(rng, 5, 3, true);
    const Factor base = lfi::run_ve(sys.factors, sys.query);
    std::vector<ElementId> order;
    for (const Var& v : sys.vars) {
      if (!(v.id == sys.query)) order.push_back(v.id);
    }
    for (int shuffle = 0; shuffle < 4; ++shuffle) {
      for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.next() % i)]);
      }
      const Factor again = lfi::run_ve_with_order(sys.factors, sys.query, order);
      CHECK(factor_close(base, again, 1e-12));
    }
  }
}
