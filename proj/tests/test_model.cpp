#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>

#include "doctest.h"
#include "rmdp/envs.hpp"
#include "rmdp/error.hpp"
#include "rmdp/model.hpp"
#include "rmdp/transforms.hpp"
#include "support/generators.hpp"

using namespace rmdp;

namespace {

bool has_rule(const std::vector<Diagnostic>& diags, const std::string& rule) {
  return std::any_of(diags.begin(), diags.end(),
                     [&](const Diagnostic& d) { return d.rule == rule; });
}

}  // namespace

TEST_CASE("cloud model validates cleanly") {
  Rmdp m = envs::cloud_rmdp();
  CHECK(validate(m).empty());
  CHECK(m.components.size() == 3);
  CHECK(m.components[m.component_index("T")].boxes.size() == 3);
}

TEST_CASE("diameter is the largest reward magnitude") {
  CHECK(diameter(envs::cloud_rmdp()) == doctest::Approx(8.0));

  RmdpBuilder b;
  b.add_component("A");
  b.add_entry("A", "e");
  b.add_exit("A", "x");
  b.add_transition("A", VRef::n("e"), "a", VRef::n("x"));
  Rmdp zero = b.build();
  CHECK(diameter(zero) == 0.0);  // missing rewards default to 0

  b.set_reward("A", VRef::n("e"), "a", -1.5);
  CHECK(diameter(b.build()) == doctest::Approx(1.5));
}

TEST_CASE("single-exit detection") {
  CHECK_FALSE(is_single_exit(envs::cloud_rmdp()));  // H has two exits
  CHECK(is_single_exit(envs::spelunking_rmdp(0.5, 0.01, envs::default_spelunk_layout())));

  RmdpBuilder b;
  b.add_component("A");
  b.add_entry("A", "e");
  b.add_exit("A", "x");
  b.add_transition("A", VRef::n("e"), "a", VRef::n("x"));
  CHECK(is_single_exit(b.build()));
}

TEST_CASE("transition out of an exit node is diagnosed") {
  RmdpBuilder b;
  b.add_component("A");
  b.add_entry("A", "e");
  b.add_exit("A", "x");
  b.add_transition("A", VRef::n("e"), "a", VRef::n("x"));
  b.add_transition("A", VRef::n("x"), "a", VRef::n("x"));
  Rmdp m = b.build();
  auto diags = validate(m);
  CHECK(has_rule(diags, "source-in-exit"));
  CHECK(validate(m) == diags);  // idempotent
}

TEST_CASE("non-normalized distribution is diagnosed") {
  RmdpBuilder b;
  b.add_component("A");
  b.add_entry("A", "e");
  b.add_exit("A", "x");
  b.add_node("A", "n");
  b.add_transition("A", VRef::n("e"), "a", VRef::n("x"), 0.5);
  b.add_transition("A", VRef::n("e"), "a", VRef::n("n"), 0.4);
  b.add_transition("A", VRef::n("n"), "a", VRef::n("x"));
  CHECK(has_rule(validate(b.build()), "non-normalized"));
}

TEST_CASE("entry cannot be a transition destination") {
  RmdpBuilder b;
  b.add_component("A");
  b.add_entry("A", "e");
  b.add_exit("A", "x");
  b.add_transition("A", VRef::n("e"), "a", VRef::n("e"));
  CHECK(has_rule(validate(b.build()), "dest-is-entry"));
}

TEST_CASE("vertex enumeration covers nodes plus box ports") {
  Rmdp m = envs::cloud_rmdp();
  for (const Component& c : m.components) {
    size_t expected = c.nodes.size();
    for (const BoxDecl& box : c.boxes)
      expected += m.components[box.callee].entries.size() + m.components[box.callee].exits.size();
    CHECK(c.vertices.size() == expected);
    for (size_t bi = 0; bi < c.boxes.size(); ++bi) {
      const Component& callee = m.components[c.boxes[bi].callee];
      for (size_t e = 0; e < callee.entries.size(); ++e) {
        const Vertex& v = c.vertices[c.call_port((int)bi, (int)e)];
        CHECK(v.kind == VertexKind::CallPort);
        CHECK(v.box == (int)bi);
        CHECK(v.port == (int)e);
      }
      for (size_t x = 0; x < callee.exits.size(); ++x)
        CHECK(c.vertices[c.return_port((int)bi, (int)x)].kind == VertexKind::ReturnPort);
    }
  }
}

TEST_CASE("builder rejects unresolved references") {
  RmdpBuilder b;
  b.add_component("A");
  b.add_entry("A", "e");
  b.add_exit("A", "x");
  b.add_transition("A", VRef::n("e"), "a", VRef::port("ghost", "en"));
  CHECK_THROWS_AS(b.build(), Error);

  RmdpBuilder b2;
  b2.add_component("A");
  b2.add_entry("A", "e");
  b2.add_exit("A", "x");
  b2.add_box("A", "b", "Nowhere");
  b2.add_transition("A", VRef::n("e"), "a", VRef::n("x"));
  CHECK_THROWS_AS(b2.build(), Error);
}

TEST_CASE("generated models validate") {
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    CHECK(validate(testgen::proper_1exit(rng)).empty());
    CHECK(validate(testgen::multi_exit_deterministic(rng)).empty());
    CHECK(validate(testgen::round_trip_model(rng)).empty());
  }
}

TEST_CASE("hierarchical chain shape") {
  Rmdp m = transforms::hierarchical_chain(4);
  CHECK(validate(m).empty());
  CHECK(m.components.size() == 4);
}
