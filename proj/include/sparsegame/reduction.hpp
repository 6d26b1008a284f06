#pragma once

// Full-versus-reduced comparisons for the open-loop LQ game.
//
// The reduced game keeps the players within graph distance < r of the
// root, assigns the out-of-set neighbors fixed external trajectories, and
// the measured quantity is the squared Wasserstein-2 gap of the root
// player's marginal law. The certified right-hand side assembles the
// layer-decay product gamma^(r) with the energy weights
//   alpha_j = kappa^j/8 + K_g^j T,   beta_j = kappa^j/8 + K_f^j T^2:
//   rhs(r) = gamma^(r)/beta_root * sum_{j in layer r}
//            (alpha_j + beta_j) * 2 * sup_t (m2(m^j_t) + m2(Z^j_t)).

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sparsegame/decay.hpp"
#include "sparsegame/gaussian.hpp"
#include "sparsegame/layers.hpp"
#include "sparsegame/riccati.hpp"

namespace sparsegame {

enum class BoundaryPolicy { frozen_init };

struct W2CurveRow {
  int r = 0;
  double avg_w2_sq = 0.0;
  double sup_w2_sq = 0.0;
  double gamma_r = 0.0;
  double rhs = 0.0;
  double theta = 0.0;
  double theta_star = 0.0;
  int iterations = 0;  // fixed-point sweeps; 0 for direct solvers
};

struct W2Curve {
  std::vector<W2CurveRow> rows;
  double refinement_rel_change = 0.0;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<int> ball_of_radius(const NkhTable& t, int r) {
  std::vector<int> I;
  for (int h = 0; h < std::min(r, t.h_star()); ++h)
    for (int i : t.layer(h)) I.push_back(i);
  std::sort(I.begin(), I.end());
  return I;
}

// gamma^(r) at the given coupling ratio; +inf when the recursion is
// infeasible (no certified bound), limiting value for theta = 0.
inline double gamma_product_at(const NkhTable& t, double theta, int r) {
  const int reff = std::min(r, t.h_star());
  if (theta == 0.0) return reff == 0 ? 1.0 : 0.0;
  if (!std::isfinite(theta)) return std::numeric_limits<double>::infinity();
  auto rec = detail::run_gamma_recursion(t, theta, reff);
  if (!rec) return std::numeric_limits<double>::infinity();
  return gamma_product(rec->gamma);
}

inline std::vector<double> root_gap_path(const GaussianFlow& full,
                                         const GaussianFlow& reduced, int root) {
  std::vector<double> w2(full.grid.steps + 1);
  for (int m = 0; m <= full.grid.steps; ++m)
    w2[m] = w2_gaussian_sq(full.marginal_mean(root, m), full.marginal_cov(root, m),
                           reduced.marginal_mean(root, m),
                           reduced.marginal_cov(root, m));
  return w2;
}

}  // namespace detail

struct ReductionOptions {
  int steps = 2000;
  bool strict = false;
  bool refine = true;  // re-run at doubled steps and report the drift
};

inline W2Curve reduction_experiment(const LqGameSpec& spec, int root,
                                    const std::vector<int>& r_list,
                                    BoundaryPolicy policy,
                                    const ReductionOptions& opt) {
  (void)policy;  // frozen_init is the only policy
  spec.validate();
  const NkhTable table(spec.graph, root);
  const CostBounds bounds = spec.derived_bounds();

  const auto run_at = [&](int steps) {
    W2Curve curve;
    const auto full_sol = solve_riccati(spec, all_players(spec), nullptr, steps);
    const auto full_flow = solve_gaussian_flow(spec, full_sol);
    for (int r : r_list) {
      if (r < 1) throw std::invalid_argument("reduction radius must be >= 1");
      const auto I = detail::ball_of_radius(table, r);
      const auto& layer_r = table.layer(std::min(r, table.h_star()));
      const BoundaryData bd =
          frozen_boundary(spec, layer_r, TimeGrid{spec.T, steps});
      const auto red_sol =
          solve_riccati(spec, I, layer_r.empty() ? nullptr : &bd, steps);
      const auto red_flow = solve_gaussian_flow(spec, red_sol);
      const auto w2 = detail::root_gap_path(full_flow, red_flow, root);

      W2CurveRow row;
      row.r = r;
      row.avg_w2_sq = time_average(w2, full_flow.grid);
      row.sup_w2_sq = *std::max_element(w2.begin(), w2.end());
      row.theta = theta_from_game(bounds, spec.graph, I);
      row.theta_star = theta_star(table, std::min(r, table.h_star()));
      row.gamma_r = detail::gamma_product_at(table, row.theta, r);
      double rhs = 0.0;
      for (int j : layer_r) {
        double sup = 0.0;
        for (int m = 0; m <= steps; ++m)
          sup = std::max(sup, full_flow.moment2(j, m) + bd.moment2[bd.index_of(j)][2 * m]);
        rhs += (bounds.alpha(j) + bounds.beta(j)) * 2.0 * sup;
      }
      row.rhs = row.gamma_r * rhs / bounds.beta(root);
      if (row.theta > row.theta_star) {
        const std::string msg = "theta = " + std::to_string(row.theta) +
                                " exceeds theta* = " + std::to_string(row.theta_star) +
                                " at r = " + std::to_string(r) +
                                "; the certified bound does not apply";
        if (opt.strict) throw InfeasibleError(msg);
        curve.warnings.push_back(msg);
      }
      curve.rows.push_back(row);
    }
    return curve;
  };

  W2Curve curve = run_at(opt.steps);
  if (opt.refine) {
    const W2Curve finer = run_at(2 * opt.steps);
    double drift = 0.0;
    for (size_t i = 0; i < curve.rows.size(); ++i) {
      const double a = curve.rows[i].avg_w2_sq, b = finer.rows[i].avg_w2_sq;
      drift = std::max(drift, std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-14}));
    }
    curve.refinement_rel_change = drift;
    if (drift > 1e-6)
      curve.warnings.push_back(
          "self-refinement drift " + std::to_string(drift) +
          " above 1e-6; increase steps");
  }
  return curve;
}

// Size of the root player's costate sensitivity to each other player,
// against graph distance.
struct DecayRow {
  int k = 0;
  int distance = 0;
  double max_norm = 0.0;
};

struct DecoupingDecayReport {
  std::vector<DecayRow> rows;
  double slope = 0.0;      // least-squares slope of log max_norm vs distance
  double intercept = 0.0;
  bool slope_valid = false;
};

inline DecoupingDecayReport decoupling_decay_report(const RiccatiSolution& sol,
                                                    const NkhTable& table) {
  DecoupingDecayReport rep;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (int k : sol.players) {
    const int dist = table.layer_of(k);
    if (dist < 0) continue;
    DecayRow row;
    row.k = k;
    row.distance = dist;
    row.max_norm = sol.max_block_norm(table.root(), k);
    rep.rows.push_back(row);
    if (dist >= 1 && row.max_norm > 0.0) {
      const double x = dist, y = std::log(row.max_norm);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++cnt;
    }
  }
  if (cnt >= 2) {
    const double denom = cnt * sxx - sx * sx;
    if (denom > 0) {
      rep.slope = (cnt * sxy - sx * sy) / denom;
      rep.intercept = (sy - rep.slope * sx) / cnt;
      rep.slope_valid = true;
    }
  }
  return rep;
}

// max over distances of the per-distance maximum, for monotonicity checks.
inline std::vector<double> per_distance_max(const DecoupingDecayReport& rep) {
  int maxd = 0;
  for (const auto& r : rep.rows) maxd = std::max(maxd, r.distance);
  std::vector<double> out(maxd + 1, 0.0);
  for (const auto& r : rep.rows)
    out[r.distance] = std::max(out[r.distance], r.max_norm);
  return out;
}

// Initial-data perturbation of a single player in the full game. The
// reported bound chain uses the kappa/16 energy weights of the perturbed
// estimate:
//   min(alpha0, beta0/T) * [W2(m_T)^2 + int W2^2]
//     <= tilde_gamma^(r) (2 kappa^k + T max_t sum_j |P^kj|_op)
//        W2(m_0^k, m-hat_0^k)^2.
struct PerturbationResult {
  double w2_sq_at_T = 0.0;
  double int_w2_sq = 0.0;
  double left = 0.0;   // w2_sq_at_T + int_w2_sq
  double bound = 0.0;  // assembled right side
  double ratio = 0.0;  // left / bound (0 when bound = 0)
  int distance = 0;
  double tilde_r = 0.0;
  double gamma_weighted = 0.0;  // the coupling ratio fed to the recursions
  double source_weight = 0.0;   // (2 kappa^k + T |Dv^k|) W2(init)^2
};

inline PerturbationResult perturbation_experiment(const LqGameSpec& spec, int k,
                                                  const Eigen::VectorXd& new_mean_k,
                                                  const Eigen::MatrixXd& new_cov_k,
                                                  int steps) {
  spec.validate();
  if (k == 0) throw std::invalid_argument("perturbed player must differ from the root");
  const NkhTable table(spec.graph, 0);
  if (table.layer_of(k) < 0)
    throw std::invalid_argument("perturbed player must be reachable from the root");
  const CostBounds b = spec.derived_bounds();

  const auto sol = solve_riccati(spec, all_players(spec), nullptr, steps);
  const auto flow = solve_gaussian_flow(spec, sol);
  LqGameSpec pert = spec;
  pert.init_mean[k] = new_mean_k;
  pert.init_cov[k] = new_cov_k;
  pert.validate();
  const auto flow2 = solve_gaussian_flow(pert, sol);  // same costate field

  const auto w2 = detail::root_gap_path(flow, flow2, 0);
  PerturbationResult res;
  res.distance = table.layer_of(k);
  res.w2_sq_at_T = w2.back();
  res.int_w2_sq = time_average(w2, flow.grid) * spec.T;
  res.left = res.w2_sq_at_T + res.int_w2_sq;

  // kappa/16 weights of the perturbed energy estimate
  const auto alpha16 = [&](int i) { return b.kappa[i] / 16.0 + b.K_g[i] * b.T; };
  const auto beta16 = [&](int i) { return b.kappa[i] / 16.0 + b.K_f[i] * b.T * b.T; };
  double gamma = 0.0;
  for (int i = 0; i < spec.num_players(); ++i) {
    double da = std::numeric_limits<double>::infinity();
    double dbta = std::numeric_limits<double>::infinity();
    for (int j : spec.graph.in_neighbors(i)) {
      da = std::min(da, alpha16(j));
      dbta = std::min(dbta, beta16(j));
    }
    if (b.l_g[i] > 0) gamma = std::max(gamma, b.l_g[i] * b.T / da);
    if (b.l_f[i] > 0) gamma = std::max(gamma, b.l_f[i] * b.T * b.T / dbta);
  }
  res.gamma_weighted = gamma;
  res.tilde_r = (gamma == 0.0)
                    ? 0.0
                    : tilde_gamma(table, gamma, res.distance).total;
  const double w2_init = w2_gaussian_sq(spec.init_mean[k], spec.init_cov[k],
                                        new_mean_k, new_cov_k);
  res.source_weight = (2.0 * b.kappa[k] + b.T * sol.max_row_norm(k)) * w2_init;
  res.bound = res.tilde_r * res.source_weight /
              std::min(alpha16(0), beta16(0) / b.T);
  res.ratio = res.bound > 0 ? res.left / res.bound : 0.0;
  return res;
}

}  // namespace sparsegame
