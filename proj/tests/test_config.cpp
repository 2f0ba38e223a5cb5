#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"

#include "chw/config.hpp"
#include "chw/errors.hpp"

using namespace chw;
using nlohmann::json;
using oracle::frac;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "chw_test_config";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("format_double round trips") {
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(-3.0) == "-3");
  CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");
  CHECK(std::stod(format_double(0.1 + 0.2)) == 0.1 + 0.2);
  CHECK(format_double(1e-300) == "1e-300");
  CHECK(format_double(INFINITY) == "inf");
  CHECK(format_double(-INFINITY) == "-inf");
  CHECK(format_double(NAN) == "nan");
}

TEST_CASE("CSV quoting") {
  const auto path = scratch("quote.csv");
  {
    CsvWriter csv(path, {"a", "b"});
    csv.row(std::string("x,y"), 2);
    csv.row(std::string("say \"hi\""), 0.25);
    csv.row(frac(-1, 3), std::string("line\nbreak"));
    CHECK_THROWS_AS(csv.row(1), Error);
  }
  CHECK(slurp(path) == "a,b\r\n\"x,y\",2\r\n\"say \"\"hi\"\"\",0.25\r\n-1/3,\"line\nbreak\"\r\n");
}

TEST_CASE("run config shapes") {
  const json plain = {{"command", "poisson"}, {"seed", 9}, {"mode", "rational"}, {"m", 2}, {"N", 3}};
  const auto cfg = make_run_config("poisson", plain, {});
  CHECK(cfg.seed == 9);
  CHECK(cfg.mode == ArithmeticMode::Rational);
  CHECK(cfg.params == json({{"m", 2}, {"N", 3}}));

  SUBCASE("a manifest reproduces the same effective config") {
    const json manifest = {{"config", cfg.effective()}, {"config_hash", "x"}, {"outputs", json::array()}};
    const auto again = make_run_config("poisson", manifest, {});
    CHECK(again.effective() == cfg.effective());
    CHECK(again.hash() == cfg.hash());
    CHECK_THROWS_AS(make_run_config("escape", manifest, {}), UsageError);
  }
  SUBCASE("overrides") {
    Overrides ov;
    ov.seed = 4;
    ov.mode = ArithmeticMode::Float;
    ov.threads = 3;
    const auto o = make_run_config("poisson", plain, ov);
    CHECK(o.seed == 4);
    CHECK(o.mode == ArithmeticMode::Float);
    CHECK(o.threads == 3);
    CHECK(o.hash() != cfg.hash());
    Overrides only_threads;
    only_threads.threads = 8;
    CHECK(make_run_config("poisson", plain, only_threads).hash() == cfg.hash());
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(make_run_config("escape", plain, {}), UsageError);
    CHECK_THROWS_AS(make_run_config("poisson", json::array(), {}), UsageError);
    CHECK_THROWS_AS(parse_mode("double"), UsageError);
    CHECK_THROWS_AS(load_run_config("poisson", scratch("missing.json"), {}), UsageError);
    std::ofstream(scratch("broken.json")) << "{\"m\": ";
    CHECK_THROWS_AS(load_run_config("poisson", scratch("broken.json"), {}), UsageError);
  }
}

TEST_CASE("hash is FNV-1a") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("displacement builders") {
  const auto srw = displacement_from_json({{"m", 2}, {"N", 2}, {"preset", "srw"}});
  CHECK(srw.values == std::vector<double>{1, 1, -1, -1});

  const auto affine = displacement_from_json({{"m", 2}, {"N", 1}, {"xi", {{"kind", "affine"}, {"params", {{"a", -1}, {"b", 2}}}}}});
  CHECK(*affine.exact == std::vector<Rational>{frac(-1, 2), frac(1, 2)});

  const json two_state = {{"chain", {{"mode", {{"matrix", {{"1/2", "1/2"}, {1, 0}}}}}}}, {"xi_vector", {-1, 2}}};
  const auto d = poisson_from_json(two_state, ArithmeticMode::Rational);
  CHECK(d.exact->delta == std::vector<Rational>{frac(-1, 3), frac(2, 3)});

  CHECK_THROWS_AS(displacement_from_json({{"m", 2}, {"N", 1}}), UsageError);
  CHECK_THROWS_AS(displacement_from_json({{"N", 1}, {"preset", "srw"}}), UsageError);
  CHECK_THROWS_AS(displacement_from_json({{"m", 3}, {"N", 1}, {"preset", "srw"}}), ValidationError);
  CHECK_THROWS_AS(displacement_from_json({{"m", 2}, {"N", 1}, {"preset", "lazy"}}), UsageError);
  CHECK_THROWS_AS(displacement_from_json({{"m", 2}, {"N", 1}, {"xi_vector", {1, 2, 3}}}), ValidationError);
  CHECK_THROWS_AS(poisson_from_json({{"m", 2}, {"N", 1}, {"preset", "srw"}, {"solver", "fast"}}, ArithmeticMode::Float),
                  UsageError);
  CHECK_THROWS_AS(poisson_from_json({{"m", 2}, {"N", 1}, {"xi", {{"kind", "named"}, {"params", {{"name", "sin2pi"}}}}}},
                                    ArithmeticMode::Rational),
                  ValidationError);
}

TEST_CASE("walk builders") {
  const auto w = walk_from_json({{"m", 2}, {"N", 1}, {"preset", "srw"}, {"increments", "xi"}, {"alpha", 0.5}},
                                ArithmeticMode::Rational);
  REQUIRE(w.increments_exact);
  for (Symbol i = 1; i <= 2; ++i) {
    const auto row = w.chain->row(i);
    for (std::size_t e = 0; e < row.size(); ++e) {
      const auto off = w.chain->matrix().row_offset(i) + e;
      CHECK((*w.increments_exact)[off] == Rational(row[e].to == 1 ? 1 : -1));
      CHECK(w.increments[off] == (row[e].to == 1 ? 1.0 : -1.0));
    }
  }
  CHECK(w.alpha == 0.5);
  CHECK(w.max_step() == 1.5);

  const auto z = walk_from_json({{"m", 2}, {"N", 2}, {"preset", "srw"}, {"previous", 3}}, ArithmeticMode::Float);
  CHECK(z.previous == 3);
  CHECK_THROWS_AS(walk_from_json({{"m", 2}, {"N", 2}, {"preset", "srw"}, {"previous", 5}}, ArithmeticMode::Float),
                  ValidationError);
  CHECK_THROWS_AS(walk_from_json({{"m", 2}, {"N", 1}, {"preset", "srw"}, {"increments", "eta"}}, ArithmeticMode::Float),
                  UsageError);
  CHECK_THROWS_AS(walk_from_json({{"kind", "chaotic"}}, ArithmeticMode::Float), UsageError);

  const auto c = walk_from_json({{"kind", "chaotic"},
                                 {"system", {{"m", 3}, {"N", 1}, {"xi", {{"kind", "affine"}, {"params", {{"a", -1}, {"b", 2}}}}}}},
                                 {"x0_interval", 0.5}},
                                ArithmeticMode::Float);
  CHECK(c.is_chaotic());
  CHECK(c.x0 == 0.0);
}

TEST_CASE("number lists") {
  CHECK(doubles_from_json(json(0.5)) == std::vector<double>{0.5});
  CHECK(doubles_from_json(json::array({"1/4", 2})) == std::vector<double>{0.25, 2.0});
  CHECK(counts_from_json(json(1e5)) == std::vector<std::uint64_t>{100000});
  CHECK_THROWS_AS(counts_from_json(json(0)), UsageError);
  CHECK_THROWS_AS(counts_from_json(json(2.5)), UsageError);
  CHECK_THROWS_AS(counts_from_json(json::array({1, -3})), UsageError);
}
