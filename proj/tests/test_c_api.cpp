#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstring>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "rmdp/rmdp_c.h"

using nlohmann::json;

namespace {

struct Str {
  char* p = nullptr;
  ~Str() { rmdp_string_free(p); }
  std::string s() const { return p ? p : ""; }
};

struct Model {
  RmdpModel* m = nullptr;
  ~Model() { rmdp_model_free(m); }
};

}  // namespace

TEST_CASE("builtin models load and serialize") {
  for (const char* name : {"cloud", "spelunking", "palindrome", "chain:4"}) {
    Model m;
    REQUIRE(rmdp_model_builtin(name, &m.m) == RMDP_OK);
    Str text;
    REQUIRE(rmdp_model_serialize(m.m, &text.p) == RMDP_OK);
    Model back;
    REQUIRE(rmdp_model_from_string(text.p, &back.m) == RMDP_OK);
    Str again;
    REQUIRE(rmdp_model_serialize(back.m, &again.p) == RMDP_OK);
    CHECK(text.s() == again.s());
  }
  Model bad;
  CHECK(rmdp_model_builtin("nonesuch", &bad.m) == RMDP_ERR_USAGE);
  CHECK(std::strlen(rmdp_last_error()) > 0);
}

TEST_CASE("validation reports diagnostics as JSON") {
  Model m;
  REQUIRE(rmdp_model_builtin("cloud", &m.m) == RMDP_OK);
  Str diags;
  int count = -1;
  REQUIRE(rmdp_model_validate(m.m, &diags.p, &count) == RMDP_OK);
  CHECK(count == 0);
  CHECK(json::parse(diags.s()).is_array());

  const char* bad =
      "rmdp 1\ncomponent A { entries e; exits x; e --a, p=0.5--> x; }\n";
  Model mb;
  CHECK(rmdp_model_from_string(bad, &mb.m) == RMDP_ERR_DOMAIN);
}

TEST_CASE("queries and solvers") {
  Model cloud;
  REQUIRE(rmdp_model_builtin("cloud", &cloud.m) == RMDP_OK);
  int one_exit = -1;
  REQUIRE(rmdp_model_is_single_exit(cloud.m, &one_exit) == RMDP_OK);
  CHECK(one_exit == 0);
  double d = 0;
  REQUIRE(rmdp_model_diameter(cloud.m, &d) == RMDP_OK);
  CHECK(d == doctest::Approx(8.0));

  Str rep;
  REQUIRE(rmdp_solve(cloud.m, "truncated", 30, 1e-10, &rep.p) == RMDP_OK);
  json j = json::parse(rep.s());
  CHECK(j["algo"] == "truncated");
  CHECK(std::abs(j["values"]["T/u1"].get<double>() - (-5.3425)) < 1e-6);

  // 1exit refuses the multi-exit cloud model.
  Str fail;
  CHECK(rmdp_solve(cloud.m, "1exit", 0, 0, &fail.p) == RMDP_ERR_DOMAIN);
  CHECK(rmdp_solve(cloud.m, "bogus", 0, 0, &fail.p) == RMDP_ERR_USAGE);

  Model chain;
  REQUIRE(rmdp_model_builtin("chain:5", &chain.m) == RMDP_OK);
  Str det;
  REQUIRE(rmdp_solve(chain.m, "deterministic", 64, 0, &det.p) == RMDP_OK);
  json jd = json::parse(det.s());
  CHECK(jd["values"]["M5/en5"].get<double>() == doctest::Approx(31.0));

  Str lp;
  REQUIRE(rmdp_export_lp(chain.m, &lp.p) == RMDP_OK);
  CHECK(lp.s().find("Minimize") != std::string::npos);
}

TEST_CASE("training through the C API") {
  Model chain;
  REQUIRE(rmdp_model_builtin("chain:3", &chain.m) == RMDP_OK);
  RmdpHyper h;
  rmdp_hyper_init(&h);
  h.alpha = 1.0;
  h.eps_initial = h.eps_final = 1.0;
  h.total_steps = 20000;
  h.step_cap = 500;
  h.seed = 3;
  Str csv;
  double final_v = 0;
  long qsize = 0;
  REQUIRE(rmdp_train(chain.m, "rql", &h, &csv.p, &final_v, &qsize) == RMDP_OK);
  CHECK(final_v == doctest::Approx(7.0));
  CHECK(qsize > 0);
  CHECK(csv.s().rfind("step,mean_return\n", 0) == 0);

  Str err;
  double fv;
  long qs;
  CHECK(rmdp_train(chain.m, "mystery", &h, &err.p, &fv, &qs) == RMDP_ERR_USAGE);
}

TEST_CASE("transforms and env specs") {
  Model chain;
  REQUIRE(rmdp_model_builtin("chain:2", &chain.m) == RMDP_OK);
  Model lane;
  REQUIRE(rmdp_add_exit_lane(chain.m, 0.9, &lane.m) == RMDP_OK);
  Str text;
  REQUIRE(rmdp_model_serialize(lane.m, &text.p) == RMDP_OK);
  CHECK(text.s().find("stop_") != std::string::npos);

  for (const char* name : {"cloud", "spelunking", "palindrome"}) {
    Str spec;
    REQUIRE(rmdp_env_spec(name, &spec.p) == RMDP_OK);
    json j = json::parse(spec.s());
    CHECK(j["name"] == name);
    CHECK(j["hyper"].contains("alpha"));
  }
  Str nope;
  CHECK(rmdp_env_spec("nonesuch", &nope.p) == RMDP_ERR_USAGE);
}

TEST_CASE("pda product through the C API") {
  // Two-cell walk monitored by an a^n b^n counter.
  const char* mdp_text =
      "rmdp 1\n"
      "component W {\n"
      "  entries st;\n"
      "  exits halt;\n"
      "  st --go--> l;\n"
      "  l --a, r=-1--> r;\n"
      "  r --b, r=-1--> l;\n"
      "  l --b, r=-1--> l;\n"
      "  r --a, r=-1--> r;\n"
      "}\n";
  const char* pda_text =
      "pda 1\n"
      "states S P;\n"
      "initial S;\n"
      "symbols A;\n"
      "special sp;\n"
      "accepting P;\n"
      "S --a / *--> S, push A;\n"
      "S --sp / A--> P;\n"
      "P --b / A--> P, pop;\n";
  Model flat;
  REQUIRE(rmdp_model_from_string(mdp_text, &flat.m) == RMDP_OK);
  Model prod;
  REQUIRE(rmdp_pda_product(flat.m, pda_text, "l", 10.0, -5.0, -1.0, 0.01, &prod.m) == RMDP_OK);
  Str diags;
  int count = -1;
  REQUIRE(rmdp_model_validate(prod.m, &diags.p, &count) == RMDP_OK);
  CHECK(count == 0);

  Model multi;
  REQUIRE(rmdp_model_builtin("cloud", &multi.m) == RMDP_OK);
  Model bad;
  CHECK(rmdp_pda_product(multi.m, pda_text, "l", 10, -5, -1, 0.01, &bad.m) == RMDP_ERR_DOMAIN);
}
