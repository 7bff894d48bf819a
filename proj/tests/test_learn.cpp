#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "rmdp/error.hpp"
#include "rmdp/learn.hpp"
#include "rmdp/oracle.hpp"
#include "rmdp/transforms.hpp"
#include "support/generators.hpp"

using namespace rmdp;
using namespace rmdp::learn;

TEST_CASE("quantize rounds half away from zero") {
  CHECK(quantize({0.25}, 0.5) == std::vector<std::int64_t>{1});
  CHECK(quantize({-0.25}, 0.5) == std::vector<std::int64_t>{-1});
  CHECK(quantize({0.24, -0.24}, 0.5) == std::vector<std::int64_t>{0, 0});
  CHECK(quantize({1.0, -3.2}, 0.001) == std::vector<std::int64_t>{1000, -3200});
  CHECK(dequantize({1000, -3200}, 0.001) == std::vector<double>{1.0, -3.2});
}

namespace {

// On a single-exit model the multi-exit learner's exit-value vector is always
// the normalized [0], so the two learners must take identical update paths.
// Compare tables through the (comp, vid, action) projection with exact
// equality of values and visit counts.
bool tables_identical(const QTable& a, const QTable& b) {
  if (a.entries.size() != b.entries.size()) return false;
  for (const auto& [k, val] : a.entries) {
    QKey flat{k.comp, k.vid, {}, k.action};
    auto it = b.entries.find(flat);
    if (it == b.entries.end() || it->second != val) return false;
    if (a.visits.at(k) != b.visits.at(flat)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("multi-exit and 1-exit learners coincide on single-exit models") {
  Rng rng(31);
  for (int i = 0; i < 3; ++i) {
    Rmdp m = testgen::proper_1exit(rng);
    Hyperparameters h;
    h.alpha = 0.3;
    h.eps_initial = h.eps_final = 0.2;
    h.total_steps = 5000;
    h.step_cap = 100;
    h.lambda = 1.0;
    h.seed = 1000 + i;
    TrainResult r1 = rql_train(m, h);
    TrainResult r2 = rql1_train(m, h);
    CHECK(tables_identical(r1.q, r2.q));
  }
}

TEST_CASE("rql with alpha=1 solves small deterministic chains exactly") {
  for (int n = 1; n <= 4; ++n) {
    Rmdp m = transforms::hierarchical_chain(n);
    Hyperparameters h;
    h.alpha = 1.0;
    h.eps_initial = h.eps_final = 1.0;  // pure exploration; targets are exact
    h.total_steps = 40000;
    h.step_cap = 1000;
    h.seed = 7;
    TrainResult r = rql_train(m, h);
    GreedyPolicy pol(m, r.q, Algo::Rql);
    Rng rng(1);
    double v = pol.evaluate(0, m.components[0].entries[0], rng, 1000, 1, false);
    CHECK(v == doctest::Approx((1 << n) - 1).epsilon(1e-12));
  }
}

TEST_CASE("1-exit learner picks recursion over a bad shortcut") {
  // e: action a costs 1 and recurses with probability 0.4 (value -5/3);
  // action z exits immediately for -10. The learner must prefer a.
  RmdpBuilder b;
  b.add_component("A");
  b.add_entry("A", "e");
  b.add_exit("A", "x");
  b.add_box("A", "b", "A");
  b.add_transition("A", VRef::n("e"), "a", VRef::port("b", "e"), 0.4);
  b.add_transition("A", VRef::n("e"), "a", VRef::n("x"), 0.6);
  b.set_reward("A", VRef::n("e"), "a", -1.0);
  b.add_transition("A", VRef::n("e"), "z", VRef::n("x"));
  b.set_reward("A", VRef::n("e"), "z", -10.0);
  b.add_transition("A", VRef::port("b", "x"), "a", VRef::n("x"));
  Rmdp m = b.build();

  Hyperparameters h;
  h.alpha = 0.05;
  h.eps_initial = h.eps_final = 0.3;
  h.total_steps = 100000;
  h.step_cap = 200;
  h.seed = 11;
  TrainResult r = rql1_train(m, h);
  GreedyPolicy pol(m, r.q, Algo::Rql1);
  CHECK(pol.action_at(0, 0, {}) == m.components[0].action_index("a"));
  Rng rng(2);
  double v = pol.evaluate(0, m.components[0].entries[0], rng, 500, 2000, false);
  CHECK(std::abs(v - (-5.0 / 3.0)) <= 0.15);
}

TEST_CASE("rql1 rejects multi-exit models; learning curve is recorded") {
  Rmdp chain = transforms::hierarchical_chain(2);
  Hyperparameters h;
  h.total_steps = 1000;
  h.eval_every = 100;
  TrainResult r = flat_q_train(chain, h);
  CHECK(r.curve.points.size() == 10);
  CHECK(r.curve.points.back().first == 1000);

  RmdpBuilder b;
  b.add_component("A");
  b.add_entry("A", "e");
  b.add_exit("A", "x1");
  b.add_exit("A", "x2");
  b.add_transition("A", VRef::n("e"), "a", VRef::n("x1"), 0.5);
  b.add_transition("A", VRef::n("e"), "a", VRef::n("x2"), 0.5);
  CHECK_THROWS_AS(rql1_train(b.build(), h), Error);
}
