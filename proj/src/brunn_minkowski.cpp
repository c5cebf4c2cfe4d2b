#include "pcap/brunn_minkowski.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pcap/parallel.hpp"

namespace pcap {

namespace {

SolverConfig config_for(const SolverConfig& proto, const ConvexBody& body,
                        double half_width) {
  SolverConfig cfg = proto;
  cfg.grid = make_grid_centered(proto.params.n, support_center(body),
                                half_width, proto.grid.cells[0]);
  return cfg;
}

}  // namespace

double capacity_rel_indicator(const CapacityEstimate& energy,
                              const CapacityEstimate& asym) {
  double rel = std::abs(energy.value - asym.value) /
               std::max(energy.value, 1e-300);
  if (!asym.reliable || !energy.reliable) rel = std::max(rel, 0.01);
  return std::max(rel, 2e-3);
}

std::vector<BMReport> bm_sweep(const ConvexBody& k1, const ConvexBody& k2,
                               std::span<const double> lambdas,
                               const SolverConfig& proto, int workers) {
  for (double l : lambdas) {
    if (l < 0.0 || l > 1.0) {
      throw std::invalid_argument("bm_sweep: lambda must be in [0,1]");
    }
  }
  const Params& mp = proto.params;
  const HomothetyFit fit = homothety_fit(k1, k2);

  std::vector<ConvexBody> combos;
  combos.reserve(lambdas.size());
  for (double l : lambdas) combos.push_back(minkowski_combination(k1, k2, l));

  // Boxes proportional to each body (one common half-width/circumradius
  // factor): homothetic pairs then see geometrically similar discrete
  // problems and their capacity errors cancel in the deficit instead of
  // polluting it.
  const double proto_hw = 0.5 * (proto.grid.hi[0] - proto.grid.lo[0]);
  double factor = 5.2;
  factor = std::max(factor, proto_hw / circumradius(k1, support_center(k1)));
  factor = std::max(factor, proto_hw / circumradius(k2, support_center(k2)));

  auto solve_one = [&](const ConvexBody& b, const std::string& which) {
    const double hw = factor * circumradius(b, support_center(b));
    try {
      return solve_exterior(b, config_for(proto, b, hw));
    } catch (const SolveError& err) {
      throw SolveError("bm solve failed for " + which + ": " + err.what(),
                       err.last_residual, err.iterations);
    }
  };

  // Input solves plus one solve per interior lambda.
  std::vector<std::size_t> interior;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (lambdas[i] != 0.0 && lambdas[i] != 1.0) interior.push_back(i);
  }
  SolveReport r1, r2;
  std::vector<SolveReport> rc(lambdas.size());
  {
    std::vector<std::function<void()>> jobs;
    jobs.push_back([&] { r1 = solve_one(k1, "K1"); });
    jobs.push_back([&] { r2 = solve_one(k2, "K2"); });
    for (std::size_t idx : interior) {
      jobs.push_back([&, idx] {
        rc[idx] = solve_one(combos[idx],
                            "combination lambda=" + std::to_string(lambdas[idx]));
      });
    }
    parallel_for_indexed(workers, jobs.size(),
                         [&](std::size_t j) { jobs[j](); });
  }

  const CapacityEstimate cap1 = capacity_energy(r1, mp);
  const CapacityEstimate cap2 = capacity_energy(r2, mp);
  const CapacityEstimate asym1 = capacity_asymptotic(r1, mp);
  const CapacityEstimate asym2 = capacity_asymptotic(r2, mp);
  const double beta = 1.0 / (static_cast<double>(mp.n) - mp.p);
  const double c1 = std::pow(cap1.value, beta);
  const double c2 = std::pow(cap2.value, beta);
  const double rel1 = capacity_rel_indicator(cap1, asym1);
  const double rel2 = capacity_rel_indicator(cap2, asym2);

  std::vector<BMReport> out;
  out.reserve(lambdas.size());
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const double lambda = lambdas[i];
    BMReport rep;
    rep.lambda = lambda;
    rep.endpoint = lambda == 0.0 || lambda == 1.0;
    rep.homothety = fit;
    rep.cap1 = cap1;
    rep.cap2 = cap2;
    rep.asym1 = asym1;
    rep.asym2 = asym2;
    if (rep.endpoint) {
      rep.cap_comb = lambda == 0.0 ? cap1 : cap2;
      rep.asym_comb = lambda == 0.0 ? asym1 : asym2;
    } else {
      rep.cap_comb = capacity_energy(rc[i], mp);
      rep.asym_comb = capacity_asymptotic(rc[i], mp);
    }
    const double relc = capacity_rel_indicator(rep.cap_comb, rep.asym_comb);
    rep.lhs = std::pow(rep.cap_comb.value, beta);
    rep.rhs = (1.0 - lambda) * c1 + lambda * c2;
    rep.deficit = rep.lhs - rep.rhs;
    rep.tolerance = 3.0 * beta *
                    (rep.lhs * relc + (1.0 - lambda) * c1 * rel1 +
                     lambda * c2 * rel2);
    // equality floor: only the spread of the estimator ratios (differential
    // bias) survives in the deficit; the common bias rescales it.
    const double q1 = cap1.value / std::max(asym1.value, 1e-300);
    const double q2 = cap2.value / std::max(asym2.value, 1e-300);
    const double qc = rep.cap_comb.value / std::max(rep.asym_comb.value, 1e-300);
    const double qbar = (q1 + q2 + qc) / 3.0;
    const double spread = std::max({std::abs(q1 - qbar), std::abs(q2 - qbar),
                                    std::abs(qc - qbar)});
    rep.equality_floor = 3.0 * beta * std::max(rep.lhs, rep.rhs) *
                         (spread + 5e-4);
    out.push_back(rep);
  }
  return out;
}

BMReport bm_deficit(const ConvexBody& k1, const ConvexBody& k2, double lambda,
                    const SolverConfig& proto, int workers) {
  const double ls[1] = {lambda};
  return bm_sweep(k1, k2, ls, proto, workers)[0];
}

}  // namespace pcap
