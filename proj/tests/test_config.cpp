#include <doctest.h>

#include "eltori/config.hpp"

using namespace eltori;

TEST_CASE("config: values, comments and lists") {
  Config c = Config::parse_string("# header\nN = 8\n beta=0.25  # trailing\nIstar = 1e-4, 2e-4\nscheme = sbab3c\n");
  CHECK(c.get_int("N", 0) == 8);
  CHECK(c.get_double("beta", 0) == 0.25);
  CHECK(c.get_string("scheme", "") == "sbab3c");
  auto l = c.get_list("Istar", {});
  REQUIRE(l.size() == 2);
  CHECK(l[1] == 2e-4);
  CHECK(c.get_double("alpha", -1.0) == -1.0);
  CHECK_NOTHROW(c.check_unused());
}

TEST_CASE("config: malformed input is rejected") {
  CHECK_THROWS_AS(Config::parse_string("N 4\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse_string("N = 4\nN = 5\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse_string("N =\n"), ConfigError);
  Config c = Config::parse_string("N = 4.5\nbeta = x\nbogus = 1\n");
  CHECK_THROWS_AS(c.get_int("N", 0), ConfigError);
  CHECK_THROWS_AS(c.get_double("beta", 0), ConfigError);
  CHECK_THROWS_WITH_AS(c.check_unused(), "unknown keys: bogus", ConfigError);
  CHECK_THROWS_AS(Config::load("/nonexistent/cfg"), ConfigError);
}

TEST_CASE("config: hash depends on content, not layout") {
  Config a = Config::parse_string("N = 4\nbeta = 0.25\n");
  Config b = Config::parse_string("# other\nbeta=0.25\n\nN    = 4\n");
  Config c = Config::parse_string("N = 4\nbeta = 0.3\n");
  CHECK(a.canonical() == "N = 4\nbeta = 0.25\n");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
}
