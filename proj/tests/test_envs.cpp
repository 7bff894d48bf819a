#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "rmdp/envs.hpp"
#include "rmdp/error.hpp"
#include "rmdp/oracle.hpp"

using namespace rmdp;

TEST_CASE("cloud spec is well-formed") {
  envs::EnvSpec s = envs::cloud_spec();
  CHECK(validate(s.model).empty());
  CHECK(diameter(s.model) == doctest::Approx(8.0));
  CHECK(s.model.components[s.start_comp].name == "T");
  CHECK(s.model.components[s.start_comp].is_entry(s.start_entry));
}

TEST_CASE("spelunking model is single-exit and proper") {
  envs::EnvSpec s = envs::spelunking_spec();
  CHECK(validate(s.model).empty());
  CHECK(is_single_exit(s.model));
  CHECK(s.model.components.size() == 2);
}

TEST_CASE("spelunking layout file matches the built-in default") {
  std::ifstream in(std::string(RMDP_SOURCE_DIR) + "/data/spelunking_layout.txt");
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  envs::SpelunkLayout parsed = envs::parse_spelunk_layout(ss.str());
  envs::SpelunkLayout def = envs::default_spelunk_layout();
  CHECK(parsed.type1 == def.type1);
  CHECK(parsed.type2 == def.type2);
  CHECK(envs::spelunking_rmdp(0.5, 0.01, parsed) == envs::spelunking_rmdp(0.5, 0.01, def));
}

TEST_CASE("layout parser rejects malformed input") {
  CHECK_THROWS_AS(envs::parse_spelunk_layout("....\n"), Error);  // one block only
  CHECK_THROWS_AS(envs::spelunking_rmdp(0.5, 0.01, {{"...."}, {"..", ".."}}), Error);
}

TEST_CASE("palindrome env is the product of its parts") {
  envs::PalindromeParts parts = envs::palindrome_parts();
  Rmdp env = envs::palindrome_env();
  CHECK(validate(env).empty());
  CHECK(env == transforms::pda_product(parts.grid, parts.pda, parts.rewards, parts.corruption,
                                       parts.success));
  envs::EnvSpec s = envs::palindrome_spec();
  CHECK(s.model == env);
}

TEST_CASE("cloud optimal value") {
  auto vals = oracle::solve_truncated(envs::cloud_rmdp(), 30, 1e-10);
  envs::EnvSpec s = envs::cloud_spec();
  CHECK(vals[s.start_comp][s.start_entry] == doctest::Approx(-5.3425).epsilon(1e-7));
}
