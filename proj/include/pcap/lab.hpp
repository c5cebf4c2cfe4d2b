#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcap/brunn_minkowski.hpp"
#include "pcap/capacity.hpp"
#include "pcap/concavity.hpp"
#include "pcap/report_io.hpp"

namespace pcap::lab {

/// Anything wrong with a config or the CLI usage; maps to exit code 3.
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Verdict { Pass, Fail, Inconclusive };
const char* verdict_name(Verdict v);
int verdict_exit_code(Verdict v);

struct BodyConfig {
  enum class Kind { Ball, Polygon, Ellipse };
  Kind kind = Kind::Ball;
  std::string label;
  Vec center;
  double radius = 1.0;        // ball
  std::vector<Vec> vertices;  // polygon
  double semi_a = 1.0;        // ellipse
  double semi_b = 1.0;

  ConvexBody build(std::shared_ptr<const DirectionGrid> dirs) const;
  Json to_json() const;
  static BodyConfig from_json(const Json& j);
  /// "disk", "ball", "square", "ball:cx,cy,r", "ellipse:a:b",
  /// "square:half_width", "square:rot:<degrees>"
  static BodyConfig from_shorthand(const std::string& text);
};

/// Every tolerance and error-indicator threshold a verdict can depend on.
/// Reports echo these so INCONCLUSIVE outcomes are auditable.
struct Thresholds {
  double alpha_tol = 0.05;          // |alpha(ball) - alpha*|
  double alpha_margin = 0.05;       // required gap alpha* - alpha(non-ball)
  double alpha_estimator_agree = 0.05;
  double cap_exact_tol = 0.05;      // estimators vs exact ball value
  double estimator_agree = 0.05;    // ENERGY vs ASYMPTOTIC
  double homothety_rel = 1e-3;      // residual / diameter
  double scaling_lo = 0.97;
  double scaling_hi = 1.03;
  double ratio_law_tol = 0.02;
  double min_body_cells = 16.0;     // inradius / h resolution indicator
  double farfield_resid_max = 0.05;
  double support_gap_cells = 2.0;   // replay noise floor, in grid spacings

  Json to_json() const;
  static Thresholds from_json(const Json& j);
};

struct ExperimentConfig {
  int n = 2;
  double p = 1.5;
  std::string scenario;
  std::vector<BodyConfig> bodies;
  double half_width = 8.0;
  int cells = 512;
  double epsilon_reg = 1e-8;
  double tol = 1e-9;
  int max_inner = 500;
  int max_outer = 3;
  FarfieldMode farfield_mode = FarfieldMode::AsymptoticDirichlet;
  std::vector<double> levels{0.2, 0.4, 0.6, 0.8};
  std::vector<double> lambdas{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> support_levels;  // empty -> geometric(0.1, 0.9, 17)
  Thresholds thresholds;
  std::uint64_t seed = 0;
  int workers = 1;
  bool plots = false;
  int dirs_count = 512;
  std::string out_dir = "out";

  Params params() const;
  SolverConfig solver_proto() const;  // grid left for the per-body driver
  std::vector<double> effective_support_levels() const;
  Json to_json() const;
  static ExperimentConfig from_json(const Json& j);
};

struct ScenarioReport {
  std::string scenario;
  Verdict verdict = Verdict::Inconclusive;
  Json doc;
  /// name -> rows keyed for CSV emission
  std::vector<std::pair<std::string,
                        std::pair<std::vector<std::string>,
                                  std::vector<std::vector<double>>>>>
      csvs;
  /// extra files (SVG plots) emitted next to the report
  std::vector<std::pair<std::string, std::string>> artifacts;
};

ScenarioReport verify_ball(const ExperimentConfig& cfg);
ScenarioReport verify_theorem1(const ExperimentConfig& cfg);
ScenarioReport verify_theorem2(const ExperimentConfig& cfg);
ScenarioReport run_bm_scenario(const ExperimentConfig& cfg);
ScenarioReport run_scaling_scenario(const ExperimentConfig& cfg);

/// Dispatch on cfg.scenario: ball | theorem1 | theorem2 | bm | scaling.
ScenarioReport run_scenario(const ExperimentConfig& cfg);

struct CliOverrides {
  std::optional<std::string> out_dir;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::optional<int> cells;
  std::optional<bool> plots;
};

ExperimentConfig load_config(const std::string& path,
                             const CliOverrides& overrides = {});

/// Runs the scenario and writes report.json, CSVs, meta.json (and SVG plots
/// when enabled) into the output directory. Returns the exit code
/// (0 pass, 1 fail, 2 inconclusive; ConfigError propagates for 3).
int run_config(const ExperimentConfig& cfg);

}  // namespace pcap::lab
