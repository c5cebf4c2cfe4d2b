#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>

#include "doctest.h"
#include "pcap/lab.hpp"

using namespace pcap;
namespace lab = pcap::lab;
namespace fs = std::filesystem;

namespace {

lab::ExperimentConfig parse(const std::string& text) {
  return lab::ExperimentConfig::from_json(Json::parse(text));
}

const char* kBallConfig = R"({
  "n": 2, "p": 1.5, "scenario": "theorem2",
  "bodies": [{"ball": {"center": [0, 0], "r": 1.0}}],
  "grid": {"half_width": 8.0, "cells": 256},
  "levels": [0.3, 0.5, 0.7],
  "seed": 7
})";

}  // namespace

TEST_CASE("config parsing: defaults, overrides, validation") {
  const lab::ExperimentConfig cfg = parse(kBallConfig);
  CHECK(cfg.n == 2);
  CHECK(cfg.p == 1.5);
  CHECK(cfg.scenario == "theorem2");
  CHECK(cfg.cells == 256);
  CHECK(cfg.levels.size() == 3);
  CHECK(cfg.bodies.size() == 1);
  CHECK(cfg.seed == 7);
  CHECK(cfg.workers == 1);

  CHECK_THROWS_AS(parse(R"({"n": 2, "scenario": "ball"})"), lab::ConfigError);
  CHECK_THROWS_AS(parse(R"({"n": 2, "p": 2.5, "scenario": "ball"})"),
                  lab::ConfigError);
  CHECK_THROWS_AS(parse(R"({"n": 2, "p": 1.5, "scenario": "ball",
                            "grid": {"cells": 4}})"),
                  lab::ConfigError);
  CHECK_THROWS_AS(
      parse(R"({"n": 2, "p": 1.5, "scenario": "ball", "levels": [1.5]})"),
      lab::ConfigError);
  CHECK_THROWS_AS(parse(R"({"n": 2, "p": 1.5, "scenario": "ball",
                            "solver": {"farfield_mode": "weird"}})"),
                  lab::ConfigError);
  CHECK_THROWS_AS(parse(R"({"n": 2, "p": 1.5, "scenario": "nope"})"),
                  lab::ConfigError);  // unknown scenario trips at dispatch
}

TEST_CASE("unknown scenario is a usage error at dispatch") {
  lab::ExperimentConfig cfg = parse(kBallConfig);
  cfg.scenario = "nope";
  CHECK_THROWS_AS(lab::run_scenario(cfg), lab::ConfigError);
}

TEST_CASE("body shorthands") {
  const auto disk = lab::BodyConfig::from_shorthand("disk");
  CHECK(disk.kind == lab::BodyConfig::Kind::Ball);
  CHECK(disk.radius == 1.0);
  const auto ball = lab::BodyConfig::from_shorthand("ball:1,2,0.5");
  CHECK(ball.center[0] == 1.0);
  CHECK(ball.center[1] == 2.0);
  CHECK(ball.radius == 0.5);
  const auto sq = lab::BodyConfig::from_shorthand("square");
  CHECK(sq.kind == lab::BodyConfig::Kind::Polygon);
  CHECK(sq.vertices.size() == 4);
  auto d = make_direction_grid(2, 512);
  const ConvexBody sq_body = sq.build(d);
  CHECK(sq_body.support[0] == doctest::Approx(1.0));
  const auto rot = lab::BodyConfig::from_shorthand("square:rot:45");
  const ConvexBody rot_body = rot.build(d);
  CHECK(rot_body.support[0] == doctest::Approx(std::numbers::sqrt2));
  const auto ell = lab::BodyConfig::from_shorthand("ellipse:2:1");
  CHECK(ell.semi_a == 2.0);
  CHECK(ell.semi_b == 1.0);
  CHECK_THROWS_AS(lab::BodyConfig::from_shorthand("blob"), lab::ConfigError);
  CHECK_THROWS_AS(lab::BodyConfig::from_shorthand("ball:x"), lab::ConfigError);
}

TEST_CASE("config json round trip is stable (hash determinism)") {
  const lab::ExperimentConfig cfg = parse(kBallConfig);
  const std::string dump1 = cfg.to_json().dump();
  const lab::ExperimentConfig cfg2 = lab::ExperimentConfig::from_json(cfg.to_json());
  const std::string dump2 = cfg2.to_json().dump();
  CHECK(dump1 == dump2);
  CHECK(sha256_hex(dump1) == sha256_hex(dump2));
}

TEST_CASE("sha256 reference vectors") {
  CHECK(sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("theorem2 on the ball: PASS, deterministic, exit contract") {
  lab::ExperimentConfig cfg = parse(kBallConfig);
  cfg.out_dir = "lab_test_out/pass";
  const int code = lab::run_config(cfg);
  CHECK(code == 0);
  REQUIRE(fs::exists("lab_test_out/pass/report.json"));
  const std::string rep1 = read_text_file("lab_test_out/pass/report.json");
  const Json doc = Json::parse(rep1);
  CHECK(doc["verdict"] == "PASS");
  CHECK(doc["scenario"] == "theorem2");
  CHECK(doc["provenance"].contains("config_sha"));
  CHECK(doc["provenance"]["tolerances"].contains("homothety_rel"));
  CHECK(fs::exists("lab_test_out/pass/homothety.csv"));
  CHECK(fs::exists("lab_test_out/pass/meta.json"));

  // byte-identical on a re-run (timestamps live in meta.json)
  cfg.out_dir = "lab_test_out/pass2";
  CHECK(lab::run_config(cfg) == 0);
  const std::string rep2 = read_text_file("lab_test_out/pass2/report.json");
  CHECK(rep1 == rep2);
}

TEST_CASE("under-resolved run is INCONCLUSIVE (exit 2)") {
  lab::ExperimentConfig cfg = parse(kBallConfig);
  cfg.cells = 64;  // 4 cells across the body inradius: indicator trips
  cfg.out_dir = "lab_test_out/coarse";
  const int code = lab::run_config(cfg);
  CHECK(code == 2);
  const Json doc =
      Json::parse(read_text_file("lab_test_out/coarse/report.json"));
  CHECK(doc["verdict"] == "INCONCLUSIVE");
}

TEST_CASE("solver starvation is a FAIL (exit 1)") {
  lab::ExperimentConfig cfg = parse(kBallConfig);
  cfg.max_inner = 2;
  cfg.tol = 1e-14;
  cfg.out_dir = "lab_test_out/fail";
  const int code = lab::run_config(cfg);
  CHECK(code == 1);
  const Json doc = Json::parse(read_text_file("lab_test_out/fail/report.json"));
  CHECK(doc["verdict"] == "FAIL");
  CHECK(doc["metrics"].contains("error"));
}

TEST_CASE("malformed configs map to ConfigError (exit 3 at the CLI)") {
  CHECK_THROWS_AS(lab::load_config("lab_test_out/does_not_exist.json"),
                  lab::ConfigError);
  write_text_file("lab_test_out/bad.json", "{ not json");
  CHECK_THROWS_AS(lab::load_config("lab_test_out/bad.json"), lab::ConfigError);
  write_text_file("lab_test_out/missing_p.json",
                  R"({"n": 2, "scenario": "ball"})");
  CHECK_THROWS_AS(lab::load_config("lab_test_out/missing_p.json"),
                  lab::ConfigError);
}

TEST_CASE("cli overrides take precedence") {
  write_text_file("lab_test_out/ov.json", kBallConfig);
  lab::CliOverrides ov;
  ov.cells = 128;
  ov.seed = 99;
  ov.workers = 2;
  ov.out_dir = "lab_test_out/ov_out";
  const lab::ExperimentConfig cfg = lab::load_config("lab_test_out/ov.json", ov);
  CHECK(cfg.cells == 128);
  CHECK(cfg.seed == 99);
  CHECK(cfg.workers == 2);
  CHECK(cfg.out_dir == "lab_test_out/ov_out");
}
