#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "lrurec/config.hpp"

using namespace lrurec;

TEST_CASE("RunConfig defaults, typed getters, and validation") {
  RunConfig c;
  CHECK_FALSE(c.has("h"));
  CHECK(c.get_int("h", 64) == 64);
  CHECK(c.get_double("lr", 1e-3) == 1e-3);
  CHECK(c.get_str("out", "runs") == "runs");
  CHECK(c.get_bool("use_pffn", true));

  c.set("h", "32");
  c.set("lr", "0.005");
  c.set("use_pffn", "false");
  c.set("dropout_grid", "0.2,0.4,0.6");
  CHECK(c.get_int("h", 64) == 32);
  CHECK(c.get_double("lr", 1e-3) == 0.005);
  CHECK_FALSE(c.get_bool("use_pffn", true));
  auto grid = c.get_doubles("dropout_grid", {});
  REQUIRE(grid.size() == 3);
  CHECK(grid[1] == 0.4);

  CHECK_THROWS_AS(c.set("no_such_key", "1"), ConfigError);
  c.set("h", "banana");
  CHECK_THROWS_AS(c.get_int("h", 64), ConfigError);
  c.set("use_pffn", "maybe");
  CHECK_THROWS_AS(c.get_bool("use_pffn", true), ConfigError);
  c.set("dropout_grid", "0.1,x");
  CHECK_THROWS_AS(c.get_doubles("dropout_grid", {}), ConfigError);
}

TEST_CASE("RunConfig file loading with comments and overrides") {
  const char* path = "cfg_test.conf";
  {
    std::ofstream f(path);
    f << "# run settings\n";
    f << "h = 16\n";
    f << "seed=7   # inline comment\n";
    f << "\n";
    f << "dropout\t=\t0.3\n";
  }
  RunConfig c;
  c.load_file(path);
  std::remove(path);
  CHECK(c.get_int("h", 0) == 16);
  CHECK(c.get_int("seed", 0) == 7);
  CHECK(c.get_double("dropout", 0) == 0.3);
  // Flag-style overrides replace file values.
  c.set("h", "8");
  CHECK(c.get_int("h", 0) == 8);

  {
    std::ofstream f(path);
    f << "just words\n";
  }
  RunConfig bad;
  CHECK_THROWS_AS(bad.load_file(path), ConfigError);
  std::remove(path);
  CHECK_THROWS_AS(bad.load_file("missing.conf"), ConfigError);
}

TEST_CASE("RunConfig canonical text and hash are stable") {
  RunConfig a, b;
  a.set("h", "32");
  a.set("lr", "0.001");
  b.set("lr", "0.001");
  b.set("h", "32");
  CHECK(a.canonical_text() == "h=32\nlr=0.001\n");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash_hex() == b.hash_hex());
  CHECK(a.hash_hex().size() == 16);
  b.set("h", "33");
  CHECK(a.hash() != b.hash());
}
