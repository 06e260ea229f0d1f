#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>

#include "depcag/error.hpp"
#include "depcag/model.hpp"
#include "support.hpp"

using namespace depcag;
using depcag::testing::config_from;
using depcag::testing::config_path;

TEST_CASE("uniform grid expansion") {
  TimeGrid g = TimeGrid::uniform(0, 10, 1.0, 0.0);
  REQUIRE(g.intervals() == 10);
  for (int i = 0; i <= 10; ++i) CHECK(g.knots[i] == doctest::Approx(i));
  for (int i = 0; i < 10; ++i) CHECK(g.anchors[i] == g.knots[i]);
  CHECK(g.theta == 1.0);
  CHECK(g.interval_of(3.0) == 3);
  CHECK(g.interval_of(3.5) == 3);
  CHECK(g.interval_of(10.0) == 9);
  CHECK(g.interval_of_left(3.0) == 2);
  CHECK(g.interval_of_left(0.0) == 0);
  CHECK(g.gamma(3.7) == 3.0);
  CHECK_THROWS_AS(g.interval_of(10.5), DomainError);
}

TEST_CASE("anchor outside its interval names A1 and the interval") {
  TimeGrid g = TimeGrid::uniform(0, 6, 1.0, 0.5);
  g.anchors[3] = g.knots[4] + 0.1;
  try {
    g.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.condition() == "A1");
    CHECK(std::string(e.what()).find("A1 violated at interval 3") != std::string::npos);
  }
}

TEST_CASE("theta below the longest interval violates A4") {
  try {
    config_from(R"j({"grid": {"knots": [0, 1, 3], "theta": 1.5}, "system": {"kind": "depcag", "M": [["-1"]]}})j");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.condition() == "A4");
  }
}

TEST_CASE("minimal linear scalar config") {
  Config c = config_from(
      R"j({"grid": {"window": [0, 4], "step": 1}, "system": {"kind": "depcag", "M": "[[-1]]", "M0": "[[0]]"}})j");
  REQUIRE_FALSE(c.is_block());
  const auto& s = std::get<DepcagSystem>(c.system);
  CHECK(s.dim() == 1);
  CHECK_FALSE(s.h.has_value());
  CHECK(s.M(0.3)(0, 0) == -1.0);
  CHECK(s.M0(0.3)(0, 0) == 0.0);
}

TEST_CASE("schema errors carry a JSON pointer") {
  try {
    config_from(R"j({"grid": {"window": [0, 4], "step": 1}, "system": {"kind": "depcag", "M": [["-1", "q"]]}})j");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.path().rfind("/system/M", 0) == 0);
  }
  CHECK_THROWS_AS(config_from(R"j({"grid": {"window": [0, 4], "step": 1}, "system": {"kind": "other"}})j"),
                  ConfigError);
  CHECK_THROWS_AS(config_from(R"j({"grid": {"window": [0, 4], "step": 1}, "system": {"kind": "depcag", "M": [["-1"]]},
                                  "extra": 1})j"),
                  ConfigError);
  CHECK_THROWS_AS(load_config(config_path("does_not_exist.json")), ConfigError);
}

TEST_CASE("declared bounds are spot checked") {
  try {
    config_from(R"j({"grid": {"window": [0, 4], "step": 1},
                    "system": {"kind": "depcag", "M": [["-1"]], "h": {"expr": "0.5*z1", "r": 0.1}}})j");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.condition() == "B2");
  }
}

TEST_CASE("constants are substituted into entries") {
  Config c = config_from(R"j({"constants": {"k": 2.5}, "grid": {"window": [0, 4], "step": 1},
                             "system": {"kind": "depcag", "M": [["-k"]], "M0": [["k*cos(t)"]]}})j");
  const auto& s = std::get<DepcagSystem>(c.system);
  CHECK(s.M(0)(0, 0) == -2.5);
  CHECK(s.M0(1.0)(0, 0) == doctest::Approx(2.5 * std::cos(1.0)));
}

TEST_CASE("serialize and reparse gives an equal model") {
  for (const char* name : {"scalar_decay.json", "rotation.json", "perturbed_block.json", "gronwall_small.json"}) {
    CAPTURE(name);
    Config a = load_config(config_path(name));
    nlohmann::json ja = to_json(a);
    Config b = parse_config(ja);
    CHECK(to_json(b) == ja);
    CHECK(a.grid().knots == b.grid().knots);
    CHECK(a.grid().anchors == b.grid().anchors);
    for (double t : {-0.7, 0.0, 1.3}) {
      if (auto d = std::get_if<DepcagSystem>(&a.system)) {
        const auto& e = std::get<DepcagSystem>(b.system);
        CHECK((d->M(t) - e.M(t)).norm() == 0.0);
        CHECK((d->M0(t) - e.M0(t)).norm() == 0.0);
      }
    }
  }
}

TEST_CASE("block config builds both blocks") {
  Config c = load_config(config_path("perturbed_block.json"));
  REQUIRE(c.is_block());
  const auto& b = std::get<BlockSystem>(c.system);
  CHECK(b.n1() == 1);
  CHECK(b.n2() == 1);
  LinearDepcag full = full_linear(b);
  CHECK(full.dim == 2);
  Mat m = full.M(0.0);
  CHECK(m(0, 0) == -1.0);
  CHECK(m(1, 1) == 1.0);
  CHECK(m(0, 1) == 0.0);
  Vec x(1), w(1);
  x << 2.0;
  w << 0.5;
  CHECK(b.f(0.0, x, w)(0) == doctest::Approx(0.005 * (std::sin(2.0) + std::sin(0.5))));
}
