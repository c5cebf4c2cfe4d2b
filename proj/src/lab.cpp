#include "pcap/lab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "pcap/kernels.hpp"
#include "pcap/level_set.hpp"
#include "pcap/parallel.hpp"

namespace pcap::lab {

namespace {

Json vec_to_json(const Vec& v, int dim) {
  Json a = Json::array();
  for (int d = 0; d < dim; ++d) a.push_back(v[d]);
  return a;
}

Vec vec_from_json(const Json& j) {
  if (!j.is_array() || j.size() < 2 || j.size() > 3) {
    throw ConfigError("expected a coordinate array of length 2 or 3");
  }
  Vec v;
  for (std::size_t d = 0; d < j.size(); ++d) v[static_cast<int>(d)] = j[d];
  return v;
}

double get_num(const Json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) {
    throw ConfigError(std::string("field \"") + key + "\" must be a number");
  }
  return j[key].get<double>();
}

// Scenario-level bookkeeping: checks decide PASS/FAIL, indicators decide
// whether the run can be trusted at all (INCONCLUSIVE when breached).
class ReportBuilder {
 public:
  explicit ReportBuilder(std::string scenario) : scenario_(std::move(scenario)) {
    doc_["scenario"] = scenario_;
    doc_["verdict"] = "";
    doc_["metrics"] = Json::object();
    doc_["metrics"]["checks"] = Json::array();
    doc_["metrics"]["indicators"] = Json::array();
  }

  Json& metrics() { return doc_["metrics"]; }

  void check(const std::string& name, bool ok, double value, double threshold,
             const std::string& detail = "") {
    Json c;
    c["name"] = name;
    c["ok"] = ok;
    c["value"] = value;
    c["threshold"] = threshold;
    if (!detail.empty()) c["detail"] = detail;
    doc_["metrics"]["checks"].push_back(c);
    checks_ok_ = checks_ok_ && ok;
  }

  void indicator(const std::string& name, bool ok, double value,
                 double threshold) {
    Json c;
    c["name"] = name;
    c["ok"] = ok;
    c["value"] = value;
    c["threshold"] = threshold;
    doc_["metrics"]["indicators"].push_back(c);
    indicators_ok_ = indicators_ok_ && ok;
  }

  void hard_failure(const std::string& msg) {
    hard_failure_ = true;
    doc_["metrics"]["error"] = msg;
  }

  ScenarioReport finish(const ExperimentConfig& cfg) {
    ScenarioReport rep;
    rep.scenario = scenario_;
    if (hard_failure_) {
      rep.verdict = Verdict::Fail;
    } else if (!indicators_ok_) {
      rep.verdict = Verdict::Inconclusive;
    } else {
      rep.verdict = checks_ok_ ? Verdict::Pass : Verdict::Fail;
    }
    doc_["verdict"] = verdict_name(rep.verdict);
    Json prov;
    prov["config_sha"] = sha256_hex(cfg.to_json().dump());
    Json grid;
    grid["n"] = cfg.n;
    grid["half_width"] = cfg.half_width;
    grid["cells"] = cfg.cells;
    prov["grid"] = grid;
    prov["tolerances"] = cfg.thresholds.to_json();
    doc_["provenance"] = prov;
    rep.doc = std::move(doc_);
    return rep;
  }

 private:
  std::string scenario_;
  Json doc_;
  bool checks_ok_ = true;
  bool indicators_ok_ = true;
  bool hard_failure_ = false;
};

struct BodyRun {
  ConvexBody body;
  SolverConfig cfg;
  SolveReport report;
  CapacityEstimate cap_energy;
  CapacityEstimate cap_asym;
};

SolverConfig body_solver_config(const ExperimentConfig& cfg,
                                const ConvexBody& body) {
  SolverConfig sc = cfg.solver_proto();
  const Vec c = support_center(body);
  const double hw =
      std::max(cfg.half_width, 5.2 * circumradius(body, c));
  sc.grid = make_grid_centered(cfg.n, c, hw, cfg.cells);
  return sc;
}

BodyRun solve_body(const ExperimentConfig& cfg, const ConvexBody& body) {
  BodyRun run;
  run.body = body;
  run.cfg = body_solver_config(cfg, body);
  run.report = solve_exterior(body, run.cfg);
  run.cap_energy = capacity_energy(run.report, run.cfg.params);
  run.cap_asym = capacity_asymptotic(run.report, run.cfg.params);
  return run;
}

void add_solve_indicators(ReportBuilder& rb, const std::string& prefix,
                          const BodyRun& run, const Thresholds& th) {
  const double h = run.report.field.grid.spacing();
  const double cells_across =
      inradius(run.body, support_center(run.body)) / h;
  rb.indicator(prefix + "resolution_cells", cells_across >= th.min_body_cells,
               cells_across, th.min_body_cells);
  rb.indicator(prefix + "farfield_fit_residual",
               run.report.farfield_residual <= th.farfield_resid_max,
               run.report.farfield_residual, th.farfield_resid_max);
  const double agree =
      std::abs(run.cap_energy.value - run.cap_asym.value) /
      std::max(run.cap_energy.value, 1e-300);
  rb.indicator(prefix + "capacity_estimator_agreement",
               agree <= th.estimator_agree, agree, th.estimator_agree);
}

Json capacity_json(const CapacityEstimate& e) {
  Json j;
  switch (e.method) {
    case CapacityMethod::Energy:
      j["method"] = "ENERGY";
      break;
    case CapacityMethod::Asymptotic:
      j["method"] = "ASYMPTOTIC";
      break;
    case CapacityMethod::ExactBall:
      j["method"] = "EXACT_BALL";
      break;
  }
  j["value"] = e.value;
  j["error_indicator"] = e.error_indicator;
  j["reliable"] = e.reliable;
  return j;
}

struct LevelBodies {
  std::vector<double> levels;
  std::vector<ConvexBody> bodies;
  std::vector<std::string> skipped;  // "t: reason"
};

LevelBodies extract_levels(const ScalarField& field,
                           std::span<const double> levels,
                           std::shared_ptr<const DirectionGrid> dirs) {
  LevelBodies out;
  for (double t : levels) {
    try {
      out.bodies.push_back(level_set_extract(field, t, dirs));
      out.levels.push_back(t);
    } catch (const std::exception& ex) {
      out.skipped.push_back(format_double(t) + ": " + ex.what());
    }
  }
  return out;
}

struct PairFit {
  double t_small = 0.0;  // lower level, larger set
  double t_large = 0.0;
  HomothetyFit fit;      // larger = rho * smaller-level-set... see below
  double rel_residual = 0.0;
  double ratio_law_err = 0.0;
};

// Pairwise fits Omega(r) ~ rho Omega(s) + xi for r < s, residual relative
// to the larger set's diameter, plus the homothety ratio law
// r/s = rho^((p-n)/(p-1)).
std::vector<PairFit> pairwise_fits(const LevelBodies& lb, const Params& mp) {
  std::vector<PairFit> out;
  for (std::size_t a = 0; a < lb.levels.size(); ++a) {
    for (std::size_t b = a + 1; b < lb.levels.size(); ++b) {
      // levels ascend; r = lower level -> larger set
      const double r = std::min(lb.levels[a], lb.levels[b]);
      const double s = std::max(lb.levels[a], lb.levels[b]);
      const ConvexBody& omega_r =
          lb.levels[a] < lb.levels[b] ? lb.bodies[a] : lb.bodies[b];
      const ConvexBody& omega_s =
          lb.levels[a] < lb.levels[b] ? lb.bodies[b] : lb.bodies[a];
      PairFit pf;
      pf.t_small = r;
      pf.t_large = s;
      pf.fit = homothety_fit(omega_s, omega_r);
      pf.rel_residual = pf.fit.residual / std::max(diameter(omega_r), 1e-300);
      const double law = (r / s) * std::pow(pf.fit.rho, mp.q_rad);
      pf.ratio_law_err = std::abs(law - 1.0);
      out.push_back(pf);
    }
  }
  return out;
}

std::string svg_polylines(const std::vector<std::vector<Vec>>& polys,
                          const std::vector<std::string>& labels) {
  double lo = 1e300, hi = -1e300;
  for (const auto& poly : polys) {
    for (const Vec& v : poly) {
      lo = std::min({lo, v[0], v[1]});
      hi = std::max({hi, v[0], v[1]});
    }
  }
  if (!(hi > lo)) {
    lo = -1;
    hi = 1;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  const double size = 800.0;
  const double scale = size / (hi - lo);
  auto tx = [&](double x) { return (x - lo) * scale; };
  auto ty = [&](double y) { return size - (y - lo) * scale; };
  std::ostringstream ss;
  ss << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"800\" "
        "viewBox=\"0 0 800 800\">\n";
  ss << "<rect width=\"800\" height=\"800\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < polys.size(); ++i) {
    const int hue = static_cast<int>((i * 67) % 360);
    ss << "<polygon fill=\"none\" stroke=\"hsl(" << hue
       << ",70%,40%)\" stroke-width=\"1.5\" points=\"";
    for (const Vec& v : polys[i]) {
      ss << format_double(tx(v[0])) << ',' << format_double(ty(v[1])) << ' ';
    }
    ss << "\"/>\n";
    if (i < labels.size()) {
      ss << "<text x=\"10\" y=\"" << 20 + 18 * i << "\" fill=\"hsl(" << hue
         << ",70%,40%)\" font-size=\"14\">" << labels[i] << "</text>\n";
    }
  }
  ss << "</svg>\n";
  return ss.str();
}

std::vector<Vec> hull_of(const ConvexBody& b) {
  if (const auto* pf = std::get_if<PolygonForm>(&b.exact)) return pf->vertices;
  // sample the support polygon
  std::vector<Vec> pts;
  const int m = b.dirs->count();
  for (int i = 0; i < m; ++i) {
    const Vec& th = b.dirs->dirs[static_cast<std::size_t>(i)];
    const Vec& th2 = b.dirs->dirs[static_cast<std::size_t>((i + 1) % m)];
    const double det = th[0] * th2[1] - th[1] * th2[0];
    if (std::abs(det) < 1e-14) continue;
    const double h1 = b.support_at(i), h2 = b.support_at((i + 1) % m);
    pts.emplace_back((h1 * th2[1] - h2 * th[1]) / det,
                     (h2 * th[0] - h1 * th2[0]) / det);
  }
  return convex_hull_2d(pts);
}

}  // namespace

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Pass:
      return "PASS";
    case Verdict::Fail:
      return "FAIL";
    case Verdict::Inconclusive:
      return "INCONCLUSIVE";
  }
  return "?";
}

int verdict_exit_code(Verdict v) {
  switch (v) {
    case Verdict::Pass:
      return 0;
    case Verdict::Fail:
      return 1;
    case Verdict::Inconclusive:
      return 2;
  }
  return 1;
}

ConvexBody BodyConfig::build(std::shared_ptr<const DirectionGrid> dirs) const {
  switch (kind) {
    case Kind::Ball:
      return make_ball(center, radius, std::move(dirs));
    case Kind::Polygon:
      return make_polygon(vertices, std::move(dirs));
    case Kind::Ellipse:
      return make_ellipse(center, semi_a, semi_b, std::move(dirs));
  }
  throw ConfigError("unknown body kind");
}

Json BodyConfig::to_json() const {
  Json j;
  switch (kind) {
    case Kind::Ball: {
      Json b;
      b["center"] = vec_to_json(center, center[2] != 0.0 ? 3 : 2);
      b["r"] = radius;
      j["ball"] = b;
      break;
    }
    case Kind::Polygon: {
      Json b;
      Json verts = Json::array();
      for (const Vec& v : vertices) verts.push_back(vec_to_json(v, 2));
      b["vertices"] = verts;
      j["polygon"] = b;
      break;
    }
    case Kind::Ellipse: {
      Json b;
      b["center"] = vec_to_json(center, 2);
      b["semi_axes"] = Json::array({semi_a, semi_b});
      j["ellipse"] = b;
      break;
    }
  }
  if (!label.empty()) j["label"] = label;
  return j;
}

BodyConfig BodyConfig::from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("body must be an object");
  BodyConfig bc;
  if (j.contains("label")) bc.label = j["label"].get<std::string>();
  if (j.contains("ball")) {
    const Json& b = j["ball"];
    bc.kind = Kind::Ball;
    if (b.contains("center")) bc.center = vec_from_json(b["center"]);
    bc.radius = get_num(b, "r", get_num(b, "radius", 1.0));
    if (!(bc.radius > 0.0)) throw ConfigError("ball radius must be positive");
  } else if (j.contains("polygon")) {
    const Json& b = j["polygon"];
    bc.kind = Kind::Polygon;
    if (!b.contains("vertices") || !b["vertices"].is_array()) {
      throw ConfigError("polygon needs a \"vertices\" array");
    }
    for (const Json& v : b["vertices"]) bc.vertices.push_back(vec_from_json(v));
    if (bc.vertices.size() < 3) {
      throw ConfigError("polygon needs at least 3 vertices");
    }
  } else if (j.contains("ellipse")) {
    const Json& b = j["ellipse"];
    bc.kind = Kind::Ellipse;
    if (b.contains("center")) bc.center = vec_from_json(b["center"]);
    if (!b.contains("semi_axes") || !b["semi_axes"].is_array() ||
        b["semi_axes"].size() != 2) {
      throw ConfigError("ellipse needs \"semi_axes\": [a, b]");
    }
    bc.semi_a = b["semi_axes"][0];
    bc.semi_b = b["semi_axes"][1];
    if (!(bc.semi_a > 0.0 && bc.semi_b > 0.0)) {
      throw ConfigError("ellipse semi-axes must be positive");
    }
  } else {
    throw ConfigError("body must contain one of: ball, polygon, ellipse");
  }
  if (bc.label.empty()) {
    bc.label = j.begin().key();
  }
  return bc;
}

BodyConfig BodyConfig::from_shorthand(const std::string& text) {
  BodyConfig bc;
  auto split = [](const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
      if (c == sep) {
        parts.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    parts.push_back(cur);
    return parts;
  };
  const std::vector<std::string> parts = split(text, ':');
  const std::string& head = parts[0];
  bc.label = text;
  try {
    if (head == "disk" || head == "ball") {
      bc.kind = Kind::Ball;
      if (parts.size() >= 2) {
        const auto nums = split(parts[1], ',');
        if (nums.size() == 1) {
          bc.radius = std::stod(nums[0]);
        } else if (nums.size() >= 3) {
          bc.center = Vec(std::stod(nums[0]), std::stod(nums[1]));
          bc.radius = std::stod(nums[2]);
        } else {
          throw ConfigError("ball shorthand: ball:r or ball:cx,cy,r");
        }
      }
    } else if (head == "square") {
      bc.kind = Kind::Polygon;
      double hw = 1.0;
      double rot = 0.0;
      for (std::size_t i = 1; i < parts.size(); ++i) {
        if (parts[i].rfind("rot", 0) == 0 && i + 1 < parts.size()) {
          rot = std::stod(parts[i + 1]) * std::numbers::pi / 180.0;
          ++i;
        } else {
          hw = std::stod(parts[i]);
        }
      }
      for (int k = 0; k < 4; ++k) {
        const double phi = rot + std::numbers::pi * (0.25 + 0.5 * k);
        const double r = hw * std::numbers::sqrt2;
        bc.vertices.emplace_back(r * std::cos(phi), r * std::sin(phi));
      }
    } else if (head == "ellipse") {
      bc.kind = Kind::Ellipse;
      if (parts.size() != 3) throw ConfigError("ellipse shorthand: ellipse:a:b");
      bc.semi_a = std::stod(parts[1]);
      bc.semi_b = std::stod(parts[2]);
    } else {
      throw ConfigError("unknown body shorthand: " + text);
    }
  } catch (const std::invalid_argument&) {
    throw ConfigError("malformed number in body shorthand: " + text);
  }
  return bc;
}

Json Thresholds::to_json() const {
  Json j;
  j["alpha_tol"] = alpha_tol;
  j["alpha_margin"] = alpha_margin;
  j["alpha_estimator_agree"] = alpha_estimator_agree;
  j["cap_exact_tol"] = cap_exact_tol;
  j["estimator_agree"] = estimator_agree;
  j["homothety_rel"] = homothety_rel;
  j["scaling_lo"] = scaling_lo;
  j["scaling_hi"] = scaling_hi;
  j["ratio_law_tol"] = ratio_law_tol;
  j["min_body_cells"] = min_body_cells;
  j["farfield_resid_max"] = farfield_resid_max;
  j["support_gap_cells"] = support_gap_cells;
  return j;
}

Thresholds Thresholds::from_json(const Json& j) {
  Thresholds t;
  t.alpha_tol = get_num(j, "alpha_tol", t.alpha_tol);
  t.alpha_margin = get_num(j, "alpha_margin", t.alpha_margin);
  t.alpha_estimator_agree =
      get_num(j, "alpha_estimator_agree", t.alpha_estimator_agree);
  t.cap_exact_tol = get_num(j, "cap_exact_tol", t.cap_exact_tol);
  t.estimator_agree = get_num(j, "estimator_agree", t.estimator_agree);
  t.homothety_rel = get_num(j, "homothety_rel", t.homothety_rel);
  t.scaling_lo = get_num(j, "scaling_lo", t.scaling_lo);
  t.scaling_hi = get_num(j, "scaling_hi", t.scaling_hi);
  t.ratio_law_tol = get_num(j, "ratio_law_tol", t.ratio_law_tol);
  t.min_body_cells = get_num(j, "min_body_cells", t.min_body_cells);
  t.farfield_resid_max =
      get_num(j, "farfield_resid_max", t.farfield_resid_max);
  t.support_gap_cells = get_num(j, "support_gap_cells", t.support_gap_cells);
  return t;
}

Params ExperimentConfig::params() const {
  try {
    return make_params(n, p);
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
}

SolverConfig ExperimentConfig::solver_proto() const {
  SolverConfig sc;
  sc.params = params();
  sc.epsilon_reg = epsilon_reg;
  sc.tol = tol;
  sc.max_inner = max_inner;
  sc.max_outer = max_outer;
  sc.farfield_mode = farfield_mode;
  sc.grid = make_grid_centered(n, Vec(), half_width, cells);
  return sc;
}

std::vector<double> ExperimentConfig::effective_support_levels() const {
  if (!support_levels.empty()) return support_levels;
  return geometric_levels(0.1, 0.9, 17);
}

Json ExperimentConfig::to_json() const {
  Json j;
  j["n"] = n;
  j["p"] = p;
  j["scenario"] = scenario;
  Json bodies_json = Json::array();
  for (const BodyConfig& b : bodies) bodies_json.push_back(b.to_json());
  j["bodies"] = bodies_json;
  Json grid;
  grid["half_width"] = half_width;
  grid["cells"] = cells;
  j["grid"] = grid;
  Json solver;
  solver["epsilon_reg"] = epsilon_reg;
  solver["tol"] = tol;
  solver["max_inner"] = max_inner;
  solver["max_outer"] = max_outer;
  solver["farfield_mode"] =
      farfield_mode == FarfieldMode::AsymptoticDirichlet ? "asymptotic"
                                                         : "zero";
  j["solver"] = solver;
  j["levels"] = levels;
  j["lambdas"] = lambdas;
  if (!support_levels.empty()) j["support_levels"] = support_levels;
  j["thresholds"] = thresholds.to_json();
  j["seed"] = seed;
  j["workers"] = workers;
  j["plots"] = plots;
  j["dirs_count"] = dirs_count;
  j["out_dir"] = out_dir;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
  ExperimentConfig cfg;
  for (const char* key : {"n", "p", "scenario"}) {
    if (!j.contains(key)) {
      throw ConfigError(std::string("missing required field \"") + key + "\"");
    }
  }
  if (!j["n"].is_number_integer()) throw ConfigError("\"n\" must be an integer");
  cfg.n = j["n"].get<int>();
  if (!j["p"].is_number()) throw ConfigError("\"p\" must be a number");
  cfg.p = j["p"].get<double>();
  cfg.scenario = j["scenario"].get<std::string>();
  cfg.params();  // validates (n, p)
  if (j.contains("bodies")) {
    if (!j["bodies"].is_array()) throw ConfigError("\"bodies\" must be an array");
    for (const Json& b : j["bodies"]) {
      if (b.is_string()) {
        cfg.bodies.push_back(BodyConfig::from_shorthand(b.get<std::string>()));
      } else {
        cfg.bodies.push_back(BodyConfig::from_json(b));
      }
    }
  }
  if (j.contains("grid")) {
    cfg.half_width = get_num(j["grid"], "half_width", cfg.half_width);
    cfg.cells = static_cast<int>(get_num(j["grid"], "cells", cfg.cells));
  }
  if (cfg.cells < 16) throw ConfigError("grid cells must be >= 16");
  if (!(cfg.half_width > 0.0)) throw ConfigError("half_width must be positive");
  if (j.contains("solver")) {
    const Json& s = j["solver"];
    cfg.epsilon_reg = get_num(s, "epsilon_reg", cfg.epsilon_reg);
    cfg.tol = get_num(s, "tol", cfg.tol);
    cfg.max_inner = static_cast<int>(get_num(s, "max_inner", cfg.max_inner));
    cfg.max_outer = static_cast<int>(get_num(s, "max_outer", cfg.max_outer));
    if (s.contains("farfield_mode")) {
      const std::string mode = s["farfield_mode"].get<std::string>();
      if (mode == "asymptotic") {
        cfg.farfield_mode = FarfieldMode::AsymptoticDirichlet;
      } else if (mode == "zero") {
        cfg.farfield_mode = FarfieldMode::ZeroDirichlet;
      } else {
        throw ConfigError("farfield_mode must be \"asymptotic\" or \"zero\"");
      }
    }
  }
  auto load_levels = [&](const char* key, std::vector<double>& dst) {
    if (!j.contains(key)) return;
    if (!j[key].is_array()) {
      throw ConfigError(std::string("\"") + key + "\" must be an array");
    }
    dst.clear();
    for (const Json& v : j[key]) dst.push_back(v.get<double>());
  };
  load_levels("levels", cfg.levels);
  load_levels("lambdas", cfg.lambdas);
  load_levels("support_levels", cfg.support_levels);
  for (double t : cfg.levels) {
    if (!(t > 0.0 && t <= 1.0)) {
      throw ConfigError("levels must lie in (0, 1]");
    }
  }
  for (double l : cfg.lambdas) {
    if (l < 0.0 || l > 1.0) throw ConfigError("lambdas must lie in [0, 1]");
  }
  if (j.contains("thresholds")) {
    cfg.thresholds = Thresholds::from_json(j["thresholds"]);
  }
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("workers")) cfg.workers = j["workers"].get<int>();
  if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
  if (j.contains("plots")) cfg.plots = j["plots"].get<bool>();
  if (j.contains("dirs_count")) cfg.dirs_count = j["dirs_count"].get<int>();
  if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
  return cfg;
}

namespace {

void require_2d(const ExperimentConfig& cfg) {
  if (cfg.n != 2) {
    throw ConfigError("scenario \"" + cfg.scenario +
                      "\" requires n=2 (3-d runs are limited to the radial "
                      "oracles and capacity tools)");
  }
}

// Shared concavity pipeline on a solved field.
struct AlphaPair {
  PointwiseAlphaResult pointwise;
  SupportAlphaResult support;
  bool support_ok = true;
  std::string support_note;
};

AlphaPair alpha_estimates(const ExperimentConfig& cfg, const BodyRun& run,
                          std::shared_ptr<const DirectionGrid> dirs) {
  AlphaPair ap;
  ap.pointwise =
      concavity_number_pointwise(run.report.field, *dirs, 1e-3, 3, nullptr);
  try {
    const std::vector<double> tg = cfg.effective_support_levels();
    const SupportMatrix sm = support_matrix(run.report.field, tg, dirs);
    ap.support = alpha_from_support(sm);
  } catch (const std::exception& ex) {
    ap.support_ok = false;
    ap.support_note = ex.what();
  }
  return ap;
}

Json alpha_json(const AlphaPair& ap) {
  Json j;
  j["alpha_pointwise"] = ap.pointwise.alpha;
  j["pointwise_samples_used"] = ap.pointwise.samples_used;
  j["pointwise_excluded_fraction"] = ap.pointwise.excluded_fraction;
  if (ap.support_ok) {
    j["alpha_support"] = ap.support.alpha;
    j["support_argmin_t"] = ap.support.argmin_t;
    j["support_excluded_fraction"] = ap.support.excluded_fraction;
  } else {
    j["alpha_support_error"] = ap.support_note;
  }
  return j;
}

}  // namespace

ScenarioReport verify_ball(const ExperimentConfig& cfg) {
  require_2d(cfg);
  ReportBuilder rb("ball");
  if (cfg.bodies.empty() || cfg.bodies[0].kind != BodyConfig::Kind::Ball) {
    throw ConfigError("scenario \"ball\" needs a ball body first");
  }
  const Params mp = cfg.params();
  const Thresholds& th = cfg.thresholds;
  auto dirs = make_direction_grid(cfg.n, cfg.dirs_count);
  const ConvexBody body = cfg.bodies[0].build(dirs);
  const double radius = cfg.bodies[0].radius;

  ScenarioReport out;
  BodyRun run;
  try {
    run = solve_body(cfg, body);
  } catch (const SolveError& ex) {
    rb.hard_failure(ex.what());
    return rb.finish(cfg);
  }
  add_solve_indicators(rb, "", run, th);

  const CapacityEstimate exact = capacity_ball_exact(radius, mp);
  rb.metrics()["capacity_energy"] = capacity_json(run.cap_energy);
  rb.metrics()["capacity_asymptotic"] = capacity_json(run.cap_asym);
  rb.metrics()["capacity_exact"] = capacity_json(exact);
  rb.check("capacity_energy_vs_exact",
           std::abs(run.cap_energy.value - exact.value) / exact.value <=
               th.cap_exact_tol,
           std::abs(run.cap_energy.value - exact.value) / exact.value,
           th.cap_exact_tol);
  rb.check("capacity_asymptotic_vs_exact",
           std::abs(run.cap_asym.value - exact.value) / exact.value <=
               th.cap_exact_tol,
           std::abs(run.cap_asym.value - exact.value) / exact.value,
           th.cap_exact_tol);

  const AlphaPair ap = alpha_estimates(cfg, run, dirs);
  rb.metrics()["concavity"] = alpha_json(ap);
  rb.check("alpha_pointwise_at_star",
           std::abs(ap.pointwise.alpha - mp.alpha_star) <= th.alpha_tol,
           ap.pointwise.alpha - mp.alpha_star, th.alpha_tol);
  if (ap.support_ok) {
    rb.check("alpha_support_at_star",
             std::abs(ap.support.alpha - mp.alpha_star) <= th.alpha_tol,
             ap.support.alpha - mp.alpha_star, th.alpha_tol);
    rb.indicator("alpha_estimator_agreement",
                 std::abs(ap.pointwise.alpha - ap.support.alpha) <=
                     th.alpha_estimator_agree,
                 std::abs(ap.pointwise.alpha - ap.support.alpha),
                 th.alpha_estimator_agree);
  } else {
    rb.indicator("alpha_support_available", false, 0.0, 1.0);
  }
  rb.indicator("pointwise_excluded_fraction",
               ap.pointwise.excluded_fraction < 0.5,
               ap.pointwise.excluded_fraction, 0.5);

  const MidpointReport midpoint = midpoint_concavity_test(
      run.report.field, mp.alpha_star, 2000, cfg.seed);
  Json mj;
  mj["worst_violation"] = midpoint.worst_violation;
  mj["pairs_evaluated"] = midpoint.pairs_evaluated;
  mj["tolerance"] = midpoint.tolerance;
  mj["passed"] = midpoint.passed;
  rb.metrics()["midpoint_at_alpha_star"] = mj;

  // level-set homothety
  const LevelBodies lb = extract_levels(run.report.field, cfg.levels, dirs);
  rb.metrics()["levels_skipped"] = lb.skipped;
  rb.indicator("levels_resolved", lb.levels.size() >= 2,
               static_cast<double>(lb.levels.size()), 2.0);
  std::vector<std::vector<double>> homothety_rows;
  if (lb.levels.size() >= 2) {
    const std::vector<PairFit> fits = pairwise_fits(lb, mp);
    double worst = 0.0;
    for (const PairFit& pf : fits) {
      worst = std::max(worst, pf.rel_residual);
      homothety_rows.push_back({pf.t_small, pf.t_large, pf.fit.rho,
                                pf.fit.residual, pf.rel_residual,
                                pf.ratio_law_err});
    }
    rb.check("level_sets_mutually_homothetic", worst <= th.homothety_rel,
             worst, th.homothety_rel);
  }
  out.csvs.emplace_back(
      "homothety.csv",
      std::make_pair(
          std::vector<std::string>{"t_low", "t_high", "rho", "residual",
                                   "rel_residual", "ratio_law_err"},
          homothety_rows));

  // scaling law
  const ScalingReport sc =
      scaling_check(run.report, run.cfg, cfg.levels, dirs, cfg.workers);
  Json scaling = Json::array();
  std::vector<std::vector<double>> scaling_rows;
  bool scaling_ok = true;
  double scaling_worst = 1.0;
  int scaling_used = 0;
  for (const ScalingEntry& e : sc.entries) {
    Json je;
    je["t"] = e.t;
    je["skipped"] = e.skipped;
    if (e.skipped) {
      je["note"] = e.note;
    } else {
      je["ratio_resolve"] = e.ratio_resolve;
      je["ratio_rescale"] = e.ratio_rescale;
      je["route_discrepancy"] = e.route_discrepancy;
      for (double rat : {e.ratio_resolve, e.ratio_rescale}) {
        if (std::abs(rat - 1.0) > std::abs(scaling_worst - 1.0)) {
          scaling_worst = rat;
        }
        scaling_ok = scaling_ok && rat >= th.scaling_lo && rat <= th.scaling_hi;
      }
      ++scaling_used;
      scaling_rows.push_back(
          {e.t, e.ratio_resolve, e.ratio_rescale, e.route_discrepancy});
    }
    scaling.push_back(je);
  }
  rb.metrics()["scaling"] = scaling;
  rb.indicator("scaling_levels_resolved", scaling_used >= 1,
               static_cast<double>(scaling_used), 1.0);
  rb.check("scaling_law_ratios", scaling_ok, scaling_worst, th.scaling_hi);
  out.csvs.emplace_back(
      "scaling.csv",
      std::make_pair(std::vector<std::string>{"t", "ratio_resolve",
                                              "ratio_rescale",
                                              "route_discrepancy"},
                     scaling_rows));

  rb.metrics()["solve"] = Json{{"energy", run.report.energy},
                               {"residual", run.report.residual},
                               {"picard_iterations", run.report.picard_iterations},
                               {"outer_iterations", run.report.outer_iterations},
                               {"cg_iterations", run.report.cg_iterations},
                               {"farfield_coeff", run.report.farfield_coeff},
                               {"farfield_residual", run.report.farfield_residual},
                               {"converged", run.report.converged}};

  if (cfg.plots) {
    std::vector<std::vector<Vec>> polys;
    std::vector<std::string> labels;
    polys.push_back(hull_of(body));
    labels.push_back("body");
    for (std::size_t i = 0; i < lb.bodies.size(); ++i) {
      polys.push_back(hull_of(lb.bodies[i]));
      labels.push_back("t=" + format_double(lb.levels[i]));
    }
    out.artifacts.emplace_back("contours.svg", svg_polylines(polys, labels));
  }

  ScenarioReport rep = rb.finish(cfg);
  rep.csvs = std::move(out.csvs);
  rep.artifacts = std::move(out.artifacts);
  return rep;
}

ScenarioReport verify_theorem1(const ExperimentConfig& cfg) {
  require_2d(cfg);
  ReportBuilder rb("theorem1");
  const Params mp = cfg.params();
  const Thresholds& th = cfg.thresholds;
  auto dirs = make_direction_grid(cfg.n, cfg.dirs_count);

  std::vector<BodyConfig> family = cfg.bodies;
  if (family.empty()) {
    BodyConfig ball;
    ball.kind = BodyConfig::Kind::Ball;
    ball.label = "ball";
    family.push_back(ball);
    for (double ratio : {1.5, 2.0, 3.0}) {
      BodyConfig e;
      e.kind = BodyConfig::Kind::Ellipse;
      e.semi_a = std::sqrt(ratio);  // area-normalized: a*b = 1
      e.semi_b = 1.0 / std::sqrt(ratio);
      e.label = "ellipse_" + format_double(ratio);
      family.push_back(e);
    }
  }

  struct BodyResult {
    std::string label;
    double ratio = 1.0;
    bool is_ball = false;
    AlphaPair alpha;
    BMReport bm;
    bool bm_ok = true;
    std::string bm_note;
    double replay_max_gap_h = 0.0;
    double replay_min_gap_h = 0.0;
    double replay_t = 0.0;
    bool replay_ok = true;
    std::string replay_note;
  };
  std::vector<BodyResult> results;
  Json bodies_json = Json::array();
  std::vector<std::vector<double>> alpha_rows;
  std::vector<std::vector<double>> bm_rows;
  std::vector<std::vector<double>> replay_rows;

  for (std::size_t bi = 0; bi < family.size(); ++bi) {
    const BodyConfig& bc = family[bi];
    BodyResult res;
    res.label = bc.label.empty() ? ("body_" + std::to_string(bi)) : bc.label;
    res.is_ball = bc.kind == BodyConfig::Kind::Ball;
    res.ratio = res.is_ball
                    ? 1.0
                    : (bc.kind == BodyConfig::Kind::Ellipse
                           ? std::max(bc.semi_a, bc.semi_b) /
                                 std::min(bc.semi_a, bc.semi_b)
                           : 0.0);
    const ConvexBody body = bc.build(dirs);
    BodyRun run;
    try {
      run = solve_body(cfg, body);
    } catch (const SolveError& ex) {
      rb.hard_failure(std::string("solve failed for ") + res.label + ": " +
                      ex.what());
      return rb.finish(cfg);
    }
    const std::string prefix = res.label + ".";
    add_solve_indicators(rb, prefix, run, th);
    res.alpha = alpha_estimates(cfg, run, dirs);
    if (res.is_ball && res.alpha.support_ok) {
      rb.indicator("ball_alpha_estimator_agreement",
                   std::abs(res.alpha.pointwise.alpha -
                            res.alpha.support.alpha) <=
                       th.alpha_estimator_agree,
                   std::abs(res.alpha.pointwise.alpha -
                            res.alpha.support.alpha),
                   th.alpha_estimator_agree);
    }

    // Brunn-Minkowski deficit between two level sets of this body's
    // potential (strictly positive unless they are homothetic).
    const double t_lo = 0.3, t_hi = 0.7, lambda = 0.5;
    try {
      const ConvexBody om_lo = level_set_extract(run.report.field, t_lo, dirs);
      const ConvexBody om_hi = level_set_extract(run.report.field, t_hi, dirs);
      SolverConfig proto = run.cfg;
      res.bm = bm_deficit(om_hi, om_lo, lambda, proto, cfg.workers);
    } catch (const std::exception& ex) {
      res.bm_ok = false;
      res.bm_note = ex.what();
    }

    // Proof-pipeline replay: Omega(t) vs (1-l) Omega(r) + l Omega(s) with
    // t = [(1-l) r^a* + l s^a*]^(1/a*).
    try {
      const double r = t_lo, s = t_hi, l = lambda;
      const double t_mix = std::pow(
          (1.0 - l) * std::pow(r, mp.alpha_star) +
              l * std::pow(s, mp.alpha_star),
          1.0 / mp.alpha_star);
      res.replay_t = t_mix;
      const ConvexBody om_r = level_set_extract(run.report.field, r, dirs);
      const ConvexBody om_s = level_set_extract(run.report.field, s, dirs);
      const ConvexBody om_t = level_set_extract(run.report.field, t_mix, dirs);
      const ConvexBody comb = minkowski_combination(om_r, om_s, l);
      const double h = run.report.field.grid.spacing();
      double gmax = -1e300, gmin = 1e300;
      for (int d = 0; d < dirs->count(); ++d) {
        const double gap = om_t.support_at(d) - comb.support_at(d);
        gmax = std::max(gmax, gap);
        gmin = std::min(gmin, gap);
      }
      res.replay_max_gap_h = gmax / h;
      res.replay_min_gap_h = gmin / h;
    } catch (const std::exception& ex) {
      res.replay_ok = false;
      res.replay_note = ex.what();
    }

    Json bj;
    bj["label"] = res.label;
    bj["axis_ratio"] = res.ratio;
    bj["is_ball"] = res.is_ball;
    bj["alpha"] = alpha_json(res.alpha);
    if (res.bm_ok) {
      bj["bm_levels"] = Json{{"lambda", res.bm.lambda},
                             {"lhs", res.bm.lhs},
                             {"rhs", res.bm.rhs},
                             {"deficit", res.bm.deficit},
                             {"tolerance", res.bm.tolerance},
                             {"equality_floor", res.bm.equality_floor},
                             {"homothety_residual", res.bm.homothety.residual}};
      bm_rows.push_back({static_cast<double>(bi), res.bm.lambda, res.bm.lhs,
                         res.bm.rhs, res.bm.deficit, res.bm.tolerance});
    } else {
      bj["bm_levels_error"] = res.bm_note;
    }
    if (res.replay_ok) {
      bj["replay"] = Json{{"t", res.replay_t},
                          {"max_gap_h", res.replay_max_gap_h},
                          {"min_gap_h", res.replay_min_gap_h}};
      replay_rows.push_back({static_cast<double>(bi), res.replay_t,
                             res.replay_max_gap_h, res.replay_min_gap_h});
    } else {
      bj["replay_error"] = res.replay_note;
    }
    bodies_json.push_back(bj);
    alpha_rows.push_back({static_cast<double>(bi), res.ratio,
                          res.alpha.pointwise.alpha,
                          res.alpha.support_ok ? res.alpha.support.alpha
                                               : std::nan("")});
    results.push_back(std::move(res));
  }
  rb.metrics()["bodies"] = bodies_json;
  rb.metrics()["alpha_star"] = mp.alpha_star;

  // checks: ball control attains alpha*, non-balls sit strictly below with
  // margins, alpha decreases with the axis ratio, deficits behave.
  std::vector<const BodyResult*> balls, nonballs;
  for (const BodyResult& r : results) {
    (r.is_ball ? balls : nonballs).push_back(&r);
  }
  rb.indicator("has_ball_control", !balls.empty(),
               static_cast<double>(balls.size()), 1.0);
  for (const BodyResult* r : balls) {
    rb.check("ball_alpha_pointwise",
             std::abs(r->alpha.pointwise.alpha - mp.alpha_star) <= th.alpha_tol,
             r->alpha.pointwise.alpha - mp.alpha_star, th.alpha_tol);
    if (r->alpha.support_ok) {
      rb.check("ball_alpha_support",
               std::abs(r->alpha.support.alpha - mp.alpha_star) <=
                   th.alpha_tol,
               r->alpha.support.alpha - mp.alpha_star, th.alpha_tol);
    }
    if (r->bm_ok) {
      rb.check("ball_levelset_bm_deficit_zero",
               std::abs(r->bm.deficit) <= r->bm.tolerance,
               r->bm.deficit, r->bm.tolerance);
    }
    if (r->replay_ok) {
      rb.check("ball_replay_inclusion_equality",
               std::max(std::abs(r->replay_max_gap_h),
                        std::abs(r->replay_min_gap_h)) <= th.support_gap_cells,
               std::max(std::abs(r->replay_max_gap_h),
                        std::abs(r->replay_min_gap_h)),
               th.support_gap_cells);
    }
  }
  for (const BodyResult* r : nonballs) {
    const std::string nm = r->label;
    rb.check(nm + ".alpha_pointwise_below_star",
             mp.alpha_star - r->alpha.pointwise.alpha > th.alpha_margin,
             mp.alpha_star - r->alpha.pointwise.alpha, th.alpha_margin);
    if (r->alpha.support_ok) {
      rb.check(nm + ".alpha_support_below_star",
               mp.alpha_star - r->alpha.support.alpha > th.alpha_margin,
               mp.alpha_star - r->alpha.support.alpha, th.alpha_margin);
    }
    if (r->bm_ok) {
      rb.check(nm + ".levelset_bm_deficit_positive",
               r->bm.deficit > r->bm.equality_floor, r->bm.deficit,
               r->bm.equality_floor);
    }
    if (r->replay_ok) {
      rb.check(nm + ".replay_inclusion_strict",
               std::max(std::abs(r->replay_max_gap_h),
                        std::abs(r->replay_min_gap_h)) > th.support_gap_cells,
               std::max(std::abs(r->replay_max_gap_h),
                        std::abs(r->replay_min_gap_h)),
               th.support_gap_cells);
    }
  }
  // monotone in the ratio (sorted by ratio, small slack for noise)
  std::vector<const BodyResult*> sorted;
  for (const BodyResult& r : results) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const BodyResult* a, const BodyResult* b) {
              return a->ratio < b->ratio;
            });
  bool monotone_pw = true, monotone_sup = true;
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i]->ratio <= sorted[i - 1]->ratio) continue;
    monotone_pw = monotone_pw &&
                  sorted[i]->alpha.pointwise.alpha <
                      sorted[i - 1]->alpha.pointwise.alpha + 0.005;
    if (sorted[i]->alpha.support_ok && sorted[i - 1]->alpha.support_ok) {
      monotone_sup = monotone_sup &&
                     sorted[i]->alpha.support.alpha <
                         sorted[i - 1]->alpha.support.alpha + 0.005;
    }
  }
  if (sorted.size() >= 2) {
    rb.check("alpha_pointwise_monotone_in_ratio", monotone_pw,
             monotone_pw ? 1.0 : 0.0, 1.0);
    rb.check("alpha_support_monotone_in_ratio", monotone_sup,
             monotone_sup ? 1.0 : 0.0, 1.0);
  }

  ScenarioReport rep = rb.finish(cfg);
  rep.csvs.emplace_back(
      "alpha.csv",
      std::make_pair(std::vector<std::string>{"body", "axis_ratio",
                                              "alpha_pointwise",
                                              "alpha_support"},
                     alpha_rows));
  rep.csvs.emplace_back(
      "bm_levels.csv",
      std::make_pair(std::vector<std::string>{"body", "lambda", "lhs", "rhs",
                                              "deficit", "tolerance"},
                     bm_rows));
  rep.csvs.emplace_back(
      "replay.csv",
      std::make_pair(std::vector<std::string>{"body", "t", "max_gap_h",
                                              "min_gap_h"},
                     replay_rows));
  return rep;
}

ScenarioReport verify_theorem2(const ExperimentConfig& cfg) {
  require_2d(cfg);
  ReportBuilder rb("theorem2");
  if (cfg.bodies.empty()) {
    throw ConfigError("scenario \"theorem2\" needs a body");
  }
  const Params mp = cfg.params();
  const Thresholds& th = cfg.thresholds;
  auto dirs = make_direction_grid(cfg.n, cfg.dirs_count);
  const BodyConfig& bc = cfg.bodies[0];
  const bool is_ball = bc.kind == BodyConfig::Kind::Ball;
  const ConvexBody body = bc.build(dirs);

  BodyRun run;
  try {
    run = solve_body(cfg, body);
  } catch (const SolveError& ex) {
    rb.hard_failure(ex.what());
    return rb.finish(cfg);
  }
  add_solve_indicators(rb, "", run, th);

  const LevelBodies lb = extract_levels(run.report.field, cfg.levels, dirs);
  rb.metrics()["levels_skipped"] = lb.skipped;
  rb.indicator("levels_resolved", lb.levels.size() >= 2,
               static_cast<double>(lb.levels.size()), 2.0);

  std::vector<std::vector<double>> rows;
  Json pairs = Json::array();
  if (lb.levels.size() >= 2) {
    const std::vector<PairFit> fits = pairwise_fits(lb, mp);
    for (const PairFit& pf : fits) {
      Json pj;
      pj["t_low"] = pf.t_small;
      pj["t_high"] = pf.t_large;
      pj["rho"] = pf.fit.rho;
      pj["residual"] = pf.fit.residual;
      pj["rel_residual"] = pf.rel_residual;
      pj["ratio_law_err"] = pf.ratio_law_err;
      pairs.push_back(pj);
      rows.push_back({pf.t_small, pf.t_large, pf.fit.rho, pf.fit.residual,
                      pf.rel_residual, pf.ratio_law_err});
    }
    rb.metrics()["pairs"] = pairs;

    if (is_ball) {
      double worst_res = 0.0, worst_law = 0.0;
      for (const PairFit& pf : fits) {
        worst_res = std::max(worst_res, pf.rel_residual);
        worst_law = std::max(worst_law, pf.ratio_law_err);
      }
      rb.check("all_pairs_homothetic", worst_res <= th.homothety_rel,
               worst_res, th.homothety_rel);
      rb.check("ratio_law", worst_law <= th.ratio_law_tol, worst_law,
               th.ratio_law_tol);
    } else {
      // the near-body pair must break homothety...
      const PairFit* top_pair = nullptr;
      for (const PairFit& pf : fits) {
        if (!top_pair || pf.t_small > top_pair->t_small ||
            (pf.t_small == top_pair->t_small &&
             pf.t_large > top_pair->t_large)) {
          top_pair = &pf;
        }
      }
      if (top_pair) {
        rb.check("near_body_pair_not_homothetic",
                 top_pair->rel_residual > th.homothety_rel,
                 top_pair->rel_residual, th.homothety_rel,
                 "levels (" + format_double(top_pair->t_small) + ", " +
                     format_double(top_pair->t_large) + ")");
      }
      // ... and the level sets round off as t -> 0: the residual of
      // consecutive pairs decreases from the top of the ladder to the bottom.
      std::vector<double> consecutive;
      for (std::size_t i = 0; i + 1 < lb.levels.size(); ++i) {
        for (const PairFit& pf : fits) {
          if (pf.t_small == std::min(lb.levels[i], lb.levels[i + 1]) &&
              pf.t_large == std::max(lb.levels[i], lb.levels[i + 1])) {
            consecutive.push_back(pf.rel_residual);
          }
        }
      }
      rb.metrics()["consecutive_residuals"] = consecutive;
      if (consecutive.size() >= 2) {
        rb.check("asymptotic_roundness",
                 consecutive.front() < consecutive.back(),
                 consecutive.front() / std::max(consecutive.back(), 1e-300),
                 1.0,
                 "smallest-level pair residual vs largest-level pair");
      }
    }
  }

  rb.metrics()["is_ball"] = is_ball;
  ScenarioReport rep = rb.finish(cfg);
  rep.csvs.emplace_back(
      "homothety.csv",
      std::make_pair(std::vector<std::string>{"t_low", "t_high", "rho",
                                              "residual", "rel_residual",
                                              "ratio_law_err"},
                     rows));
  if (cfg.plots) {
    std::vector<std::vector<Vec>> polys;
    std::vector<std::string> labels;
    polys.push_back(hull_of(body));
    labels.push_back("body");
    for (std::size_t i = 0; i < lb.bodies.size(); ++i) {
      polys.push_back(hull_of(lb.bodies[i]));
      labels.push_back("t=" + format_double(lb.levels[i]));
    }
    rep.artifacts.emplace_back("contours.svg", svg_polylines(polys, labels));
  }
  return rep;
}

ScenarioReport run_bm_scenario(const ExperimentConfig& cfg) {
  require_2d(cfg);
  ReportBuilder rb("bm");
  if (cfg.bodies.size() != 2) {
    throw ConfigError("scenario \"bm\" needs exactly two bodies");
  }
  const Thresholds& th = cfg.thresholds;
  auto dirs = make_direction_grid(cfg.n, cfg.dirs_count);
  const ConvexBody k1 = cfg.bodies[0].build(dirs);
  const ConvexBody k2 = cfg.bodies[1].build(dirs);

  SolverConfig proto = cfg.solver_proto();
  std::vector<BMReport> sweep;
  try {
    sweep = bm_sweep(k1, k2, cfg.lambdas, proto, cfg.workers);
  } catch (const SolveError& ex) {
    rb.hard_failure(ex.what());
    return rb.finish(cfg);
  }

  const double homothety_rel_residual =
      sweep.empty() ? 0.0
                    : sweep[0].homothety.residual /
                          std::max(diameter(k2), 1e-300);
  const bool homothetic = sweep.empty()
                              ? false
                              : (sweep[0].homothety.valid &&
                                 homothety_rel_residual <= th.homothety_rel);
  rb.metrics()["homothety"] =
      Json{{"rho", sweep.empty() ? 0.0 : sweep[0].homothety.rho},
           {"residual", sweep.empty() ? 0.0 : sweep[0].homothety.residual},
           {"rel_residual", homothety_rel_residual},
           {"declared_homothetic", homothetic}};

  Json entries = Json::array();
  std::vector<std::vector<double>> bm_rows;
  for (const BMReport& r : sweep) {
    Json e;
    e["lambda"] = r.lambda;
    e["lhs"] = r.lhs;
    e["rhs"] = r.rhs;
    e["deficit"] = r.deficit;
    e["tolerance"] = r.tolerance;
    e["equality_floor"] = r.equality_floor;
    e["endpoint"] = r.endpoint;
    e["cap1"] = capacity_json(r.cap1);
    e["cap2"] = capacity_json(r.cap2);
    e["cap_combination"] = capacity_json(r.cap_comb);
    e["asym1"] = capacity_json(r.asym1);
    e["asym2"] = capacity_json(r.asym2);
    e["asym_combination"] = capacity_json(r.asym_comb);
    entries.push_back(e);
    bm_rows.push_back(
        {r.lambda, r.lhs, r.rhs, r.deficit, sweep[0].homothety.residual});

    rb.check("deficit_nonnegative_lambda_" + format_double(r.lambda),
             r.deficit >= -r.tolerance, r.deficit, -r.tolerance);
    if (r.endpoint) {
      rb.check("endpoint_exact_lambda_" + format_double(r.lambda),
               r.deficit == 0.0, r.deficit, 0.0);
    } else if (homothetic) {
      rb.check("homothetic_deficit_zero_lambda_" + format_double(r.lambda),
               std::abs(r.deficit) <= r.tolerance, r.deficit, r.tolerance);
    } else {
      rb.check("strict_deficit_lambda_" + format_double(r.lambda),
               r.deficit > r.equality_floor, r.deficit, r.equality_floor);
    }
    const double agree1 = capacity_rel_indicator(r.cap1, r.asym1);
    const double agreec = capacity_rel_indicator(r.cap_comb, r.asym_comb);
    rb.indicator("estimators_lambda_" + format_double(r.lambda),
                 agree1 <= th.estimator_agree && agreec <= th.estimator_agree,
                 std::max(agree1, agreec), th.estimator_agree);
  }
  rb.metrics()["sweep"] = entries;

  ScenarioReport rep = rb.finish(cfg);
  rep.csvs.emplace_back(
      "bm.csv",
      std::make_pair(std::vector<std::string>{"lambda", "lhs", "rhs",
                                              "deficit",
                                              "homothety_residual"},
                     bm_rows));
  return rep;
}

ScenarioReport run_scaling_scenario(const ExperimentConfig& cfg) {
  require_2d(cfg);
  ReportBuilder rb("scaling");
  if (cfg.bodies.empty()) {
    throw ConfigError("scenario \"scaling\" needs at least one body");
  }
  const Thresholds& th = cfg.thresholds;
  auto dirs = make_direction_grid(cfg.n, cfg.dirs_count);

  Json bodies_json = Json::array();
  std::vector<std::vector<double>> rows;
  for (std::size_t bi = 0; bi < cfg.bodies.size(); ++bi) {
    const BodyConfig& bc = cfg.bodies[bi];
    const std::string label =
        bc.label.empty() ? ("body_" + std::to_string(bi)) : bc.label;
    const ConvexBody body = bc.build(dirs);
    BodyRun run;
    try {
      run = solve_body(cfg, body);
    } catch (const SolveError& ex) {
      rb.hard_failure("solve failed for " + label + ": " + ex.what());
      return rb.finish(cfg);
    }
    add_solve_indicators(rb, label + ".", run, th);
    const ScalingReport sc =
        scaling_check(run.report, run.cfg, cfg.levels, dirs, cfg.workers);
    Json entries = Json::array();
    int used = 0;
    bool ok = true;
    double worst = 1.0;
    for (const ScalingEntry& e : sc.entries) {
      Json je;
      je["t"] = e.t;
      je["skipped"] = e.skipped;
      if (e.skipped) {
        je["note"] = e.note;
      } else {
        je["ratio_resolve"] = e.ratio_resolve;
        je["ratio_rescale"] = e.ratio_rescale;
        je["route_discrepancy"] = e.route_discrepancy;
        ++used;
        for (double rat : {e.ratio_resolve, e.ratio_rescale}) {
          if (std::abs(rat - 1.0) > std::abs(worst - 1.0)) worst = rat;
          ok = ok && rat >= th.scaling_lo && rat <= th.scaling_hi;
        }
        rows.push_back({static_cast<double>(bi), e.t, e.ratio_resolve,
                        e.ratio_rescale, e.route_discrepancy});
      }
      entries.push_back(je);
    }
    Json bj;
    bj["label"] = label;
    bj["cap_base"] = sc.cap_base;
    bj["entries"] = entries;
    bodies_json.push_back(bj);
    rb.indicator(label + ".scaling_levels_resolved", used >= 1,
                 static_cast<double>(used), 1.0);
    rb.check(label + ".scaling_law_ratios", ok, worst, th.scaling_hi);
  }
  rb.metrics()["bodies"] = bodies_json;

  ScenarioReport rep = rb.finish(cfg);
  rep.csvs.emplace_back(
      "scaling.csv",
      std::make_pair(std::vector<std::string>{"body", "t", "ratio_resolve",
                                              "ratio_rescale",
                                              "route_discrepancy"},
                     rows));
  return rep;
}

ScenarioReport run_scenario(const ExperimentConfig& cfg) {
  if (cfg.scenario == "ball") return verify_ball(cfg);
  if (cfg.scenario == "theorem1") return verify_theorem1(cfg);
  if (cfg.scenario == "theorem2") return verify_theorem2(cfg);
  if (cfg.scenario == "bm") return run_bm_scenario(cfg);
  if (cfg.scenario == "scaling") return run_scaling_scenario(cfg);
  throw ConfigError("unknown scenario \"" + cfg.scenario +
                    "\" (expected ball | theorem1 | theorem2 | bm | scaling)");
}

ExperimentConfig load_config(const std::string& path,
                             const CliOverrides& overrides) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& ex) {
    throw ConfigError(ex.what());
  }
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& ex) {
    throw ConfigError(std::string("config parse error: ") + ex.what());
  }
  ExperimentConfig cfg = ExperimentConfig::from_json(j);
  if (overrides.out_dir) cfg.out_dir = *overrides.out_dir;
  if (overrides.workers) cfg.workers = *overrides.workers;
  if (overrides.seed) cfg.seed = *overrides.seed;
  if (overrides.cells) cfg.cells = *overrides.cells;
  if (overrides.plots) cfg.plots = *overrides.plots;
  if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
  if (cfg.cells < 16) throw ConfigError("grid cells must be >= 16");
  return cfg;
}

int run_config(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioReport rep = run_scenario(cfg);
  const auto t1 = std::chrono::steady_clock::now();

  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  write_text_file((fs::path(cfg.out_dir) / "report.json").string(),
                  rep.doc.dump(2) + "\n");
  for (const auto& [name, data] : rep.csvs) {
    write_csv((fs::path(cfg.out_dir) / name).string(), data.first,
              data.second);
  }
  for (const auto& [name, content] : rep.artifacts) {
    write_text_file((fs::path(cfg.out_dir) / name).string(), content);
  }
  // wall-clock provenance lives outside report.json so reports stay
  // byte-reproducible
  Json meta;
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char ts[32];
  std::strftime(ts, sizeof(ts), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
  meta["timestamp_utc"] = ts;
  meta["duration_seconds"] =
      std::chrono::duration<double>(t1 - t0).count();
  meta["kernels"] = kern::active().name;
  meta["workers"] = cfg.workers;
  write_text_file((fs::path(cfg.out_dir) / "meta.json").string(),
                  meta.dump(2) + "\n");
  return verdict_exit_code(rep.verdict);
}

}  // namespace pcap::lab
