#pragma once

// Distributed-strategy equilibrium: each player's control reads only its
// own state, so the joint law is the product of the per-player marginals
// and the coupled HJB/FPK system closes over the neighbor mean paths.
//
// With quadratic data the value is w^i(t,x) = x'K^i(t)x/2 + k^i(t).x + c,
//   dK^i/dt = K^i K^i / kappa^i - n_i Q,            K^i(T) = G^i,
//   dk^i/dt = K^i k^i / kappa^i
//             + mu Q sum_{j ~ i} E[X^j_t],           k^i(T) = 0,
// and the feedback drift -(K^i x + k^i)/kappa^i pushes Gaussian marginals
//   dm^i/dt = -(K^i m^i + k^i)/kappa^i,
//   dS^i/dt = -(K^i S^i + S^i K^i)/kappa^i + sigma^i sigma^i'.
// The x-gradient of the integrated running cost depends on neighbor MEANS
// only, so the Picard iteration runs over mean paths alone; variances are
// integrated once afterwards (they feed nothing but the constant c, which
// nothing downstream reads).
//
// Convergence is declared on the coupling inputs: the sweep stops when
// the neighbor-mean forcing entering each backward pass is reproduced to
// tol by the newly computed means. Zero coupling therefore converges in a
// single sweep. Damping mixes the input means between sweeps.
//
// Grid scheme: K integrates on the half-step grid (autonomous), k and m
// run classical RK4 on the coarse grid (mid-step data sits on the half
// grid), and their half-grid values are reconstructed by cubic Hermite
// midpoints, preserving fourth order end to end.

#include <cmath>
#include <string>
#include <vector>

#include "sparsegame/decay.hpp"
#include "sparsegame/gaussian.hpp"
#include "sparsegame/layers.hpp"
#include "sparsegame/reduction.hpp"
#include "sparsegame/riccati.hpp"

namespace sparsegame {

enum class MeanFieldGuess { frozen_init, zeros };

struct DistributedOptions {
  int steps = 2000;
  double damping = 0.5;
  double tol = 1e-10;
  int max_iter = 500;
  MeanFieldGuess guess = MeanFieldGuess::frozen_init;
};

struct DistributedSolution {
  TimeGrid grid;
  std::vector<int> players;
  int d = 1;
  // [local player][fine node]
  std::vector<std::vector<Eigen::MatrixXd>> K;
  std::vector<std::vector<Eigen::VectorXd>> k;
  std::vector<std::vector<Eigen::VectorXd>> mean;
  // [local player][coarse node]
  std::vector<std::vector<Eigen::MatrixXd>> var;
  int iterations = 0;
  std::vector<double> defect_history;
  std::vector<std::string> warnings;

  int local_index(int player) const {
    const auto it = std::lower_bound(players.begin(), players.end(), player);
    if (it == players.end() || *it != player)
      throw std::invalid_argument("player not part of this solution");
    return static_cast<int>(it - players.begin());
  }

  Eigen::VectorXd marginal_mean(int player, int coarse) const {
    return mean[local_index(player)][2 * coarse];
  }
  Eigen::MatrixXd marginal_cov(int player, int coarse) const {
    return var[local_index(player)][coarse];
  }
  double moment2(int player, int coarse) const {
    return marginal_mean(player, coarse).squaredNorm() +
           marginal_cov(player, coarse).trace();
  }
};

namespace detail {

// Hermite midpoint: y(t + h/2) from endpoint values and derivatives.
template <typename T>
T hermite_mid(const T& y0, const T& y1, const T& dy0, const T& dy1, double h) {
  return 0.5 * (y0 + y1) + (h / 8.0) * (dy0 - dy1);
}

}  // namespace detail

inline DistributedSolution distributed_fixed_point(const LqGameSpec& spec,
                                                   std::vector<int> index_set,
                                                   const BoundaryData* boundary,
                                                   const DistributedOptions& opt) {
  spec.validate();
  if (!(opt.damping > 0.0 && opt.damping <= 1.0))
    throw std::invalid_argument("damping must lie in (0, 1]");
  if (!(opt.tol > 0.0)) throw std::invalid_argument("tol must be positive");
  std::sort(index_set.begin(), index_set.end());
  const int n = static_cast<int>(index_set.size());
  const int d = spec.d;
  const TimeGrid grid{spec.T, opt.steps};
  const int fn = grid.fine_nodes();
  const double hc = grid.coarse_dt();

  std::vector<std::vector<int>> inside(n);  // local ids of in-set neighbors
  std::vector<std::vector<int>> absent(n);  // global ids of out-of-set neighbors
  bool any_absent = false;
  for (int a = 0; a < n; ++a)
    for (int j : spec.graph.in_neighbors(index_set[a])) {
      const auto it = std::lower_bound(index_set.begin(), index_set.end(), j);
      if (it != index_set.end() && *it == j)
        inside[a].push_back(static_cast<int>(it - index_set.begin()));
      else {
        absent[a].push_back(j);
        any_absent = true;
      }
    }
  if (any_absent && boundary == nullptr)
    throw std::invalid_argument("reduced index set needs boundary data");

  DistributedSolution sol;
  sol.grid = grid;
  sol.players = index_set;
  sol.d = d;

  // Backward own-cost curvature, one autonomous Riccati per player.
  sol.K.assign(n, {});
  for (int a = 0; a < n; ++a) {
    const int i = index_set[a];
    const double nQ = static_cast<double>(spec.graph.in_degree(i));
    const double kinv = 1.0 / spec.kappa[i];
    auto& path = sol.K[a];
    path.assign(fn, Eigen::MatrixXd());
    Eigen::MatrixXd Kv = spec.G[i];
    path[fn - 1] = Kv;
    const double h = -grid.fine_dt();
    const auto dK = [&](const Eigen::MatrixXd& K) -> Eigen::MatrixXd {
      return kinv * K * K - nQ * spec.Q;
    };
    for (int node = fn - 1; node > 0; --node) {
      const Eigen::MatrixXd k1 = dK(Kv);
      const Eigen::MatrixXd k2 = dK(Kv + 0.5 * h * k1);
      const Eigen::MatrixXd k3 = dK(Kv + 0.5 * h * k2);
      const Eigen::MatrixXd k4 = dK(Kv + h * k3);
      Kv += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (Kv.cwiseAbs().maxCoeff() > 1e8 || !Kv.allFinite())
        throw BlowupError("own-cost curvature left the monotone regime");
      path[node - 1] = Kv;
    }
  }

  // Iterate over mean paths on the fine grid.
  std::vector<std::vector<Eigen::VectorXd>> means_in(n);
  for (int a = 0; a < n; ++a) {
    const Eigen::VectorXd v = (opt.guess == MeanFieldGuess::frozen_init)
                                  ? spec.init_mean[index_set[a]]
                                  : Eigen::VectorXd::Zero(d);
    means_in[a].assign(fn, v);
  }

  // mu Q sum of neighbor means at a fine node, given the current input.
  const auto forcing_at = [&](int a, int node,
                              const std::vector<std::vector<Eigen::VectorXd>>& means)
      -> Eigen::VectorXd {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(d);
    for (int bl : inside[a]) s += means[bl][node];
    for (int j : absent[a]) s += boundary->mean_at(j, grid.t_fine(node));
    return spec.mu * spec.Q * s;
  };

  std::vector<std::vector<Eigen::VectorXd>> means_new(n);
  std::vector<std::vector<Eigen::VectorXd>> kpaths(n);
  bool converged = false;
  int sweep = 0;
  while (sweep < opt.max_iter) {
    ++sweep;
    for (int a = 0; a < n; ++a) {
      const int i = index_set[a];
      const double kinv = 1.0 / spec.kappa[i];
      const auto& K = sol.K[a];
      // forcing path for this sweep
      std::vector<Eigen::VectorXd> s(fn);
      for (int node = 0; node < fn; ++node) s[node] = forcing_at(a, node, means_in);

      // backward affine term on the coarse grid
      auto& kp = kpaths[a];
      kp.assign(fn, Eigen::VectorXd());
      Eigen::VectorXd kv = Eigen::VectorXd::Zero(d);
      kp[fn - 1] = kv;
      const auto dk = [&](const Eigen::VectorXd& k, int node) -> Eigen::VectorXd {
        return kinv * (K[node] * k) + s[node];
      };
      for (int m = grid.steps; m > 0; --m) {
        const int f2 = 2 * m, f1 = 2 * m - 1, f0 = 2 * m - 2;
        const double h = -hc;
        const Eigen::VectorXd k1 = dk(kv, f2);
        const Eigen::VectorXd k2 = dk(kv + 0.5 * h * k1, f1);
        const Eigen::VectorXd k3 = dk(kv + 0.5 * h * k2, f1);
        const Eigen::VectorXd k4 = dk(kv + h * k3, f0);
        kv += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        kp[f0] = kv;
      }
      for (int m = 0; m < grid.steps; ++m) {
        const int f0 = 2 * m, f1 = 2 * m + 1, f2 = 2 * m + 2;
        kp[f1] = detail::hermite_mid(kp[f0], kp[f2], dk(kp[f0], f0), dk(kp[f2], f2), hc);
      }

      // forward mean on the coarse grid
      auto& mp = means_new[a];
      mp.assign(fn, Eigen::VectorXd());
      Eigen::VectorXd mv = spec.init_mean[i];
      mp[0] = mv;
      const auto dm = [&](const Eigen::VectorXd& m, int node) -> Eigen::VectorXd {
        return -kinv * (K[node] * m + kp[node]);
      };
      for (int m = 0; m < grid.steps; ++m) {
        const int f0 = 2 * m, f1 = 2 * m + 1, f2 = 2 * m + 2;
        const Eigen::VectorXd k1 = dm(mv, f0);
        const Eigen::VectorXd k2 = dm(mv + 0.5 * hc * k1, f1);
        const Eigen::VectorXd k3 = dm(mv + 0.5 * hc * k2, f1);
        const Eigen::VectorXd k4 = dm(mv + hc * k3, f2);
        mv += (hc / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        mp[f2] = mv;
      }
      for (int m = 0; m < grid.steps; ++m) {
        const int f0 = 2 * m, f1 = 2 * m + 1, f2 = 2 * m + 2;
        mp[f1] = detail::hermite_mid(mp[f0], mp[f2], dm(mp[f0], f0), dm(mp[f2], f2), hc);
      }
    }

    // coupling-input defect: mu Q applied to the in-set mean changes
    double defect = 0.0;
    for (int a = 0; a < n; ++a)
      for (int node = 0; node < fn; ++node) {
        Eigen::VectorXd diff = Eigen::VectorXd::Zero(d);
        for (int bl : inside[a]) diff += means_new[bl][node] - means_in[bl][node];
        defect = std::max(defect, (spec.mu * spec.Q * diff).cwiseAbs().maxCoeff());
      }
    sol.defect_history.push_back(defect);
    if (defect < opt.tol) {
      converged = true;
      break;
    }
    for (int a = 0; a < n; ++a)
      for (int node = 0; node < fn; ++node)
        means_in[a][node] = (1.0 - opt.damping) * means_in[a][node] +
                            opt.damping * means_new[a][node];
  }
  sol.iterations = sweep;
  if (!converged)
    throw NonConvergenceError(
        "distributed fixed point: defect " +
            std::to_string(sol.defect_history.back()) + " after " +
            std::to_string(opt.max_iter) + " sweeps",
        sol.defect_history);
  for (size_t it = 5; it + 1 < sol.defect_history.size(); ++it)
    if (sol.defect_history[it + 1] > sol.defect_history[it]) {
      sol.warnings.push_back("fixed-point defect not monotone after sweep " +
                             std::to_string(it + 1));
      break;
    }

  sol.k = std::move(kpaths);
  sol.mean = std::move(means_new);

  // Marginal variances, decoupled from the iteration.
  sol.var.assign(n, {});
  for (int a = 0; a < n; ++a) {
    const int i = index_set[a];
    const double kinv = 1.0 / spec.kappa[i];
    const Eigen::MatrixXd D = spec.sigma[i] * spec.sigma[i].transpose();
    const auto& K = sol.K[a];
    auto& path = sol.var[a];
    path.assign(grid.steps + 1, Eigen::MatrixXd());
    Eigen::MatrixXd S = spec.init_cov[i];
    path[0] = S;
    const auto dS = [&](const Eigen::MatrixXd& S, int node) -> Eigen::MatrixXd {
      const Eigen::MatrixXd KS = kinv * (K[node] * S);
      return -KS - KS.transpose() + D;
    };
    for (int m = 0; m < grid.steps; ++m) {
      const int f0 = 2 * m, f1 = 2 * m + 1, f2 = 2 * m + 2;
      const Eigen::MatrixXd k1 = dS(S, f0);
      const Eigen::MatrixXd k2 = dS(S + 0.5 * hc * k1, f1);
      const Eigen::MatrixXd k3 = dS(S + 0.5 * hc * k2, f1);
      const Eigen::MatrixXd k4 = dS(S + hc * k3, f2);
      S += (hc / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      S = 0.5 * (S + S.transpose()).eval();
      path[m + 1] = S;
    }
  }
  return sol;
}

inline W2Curve distributed_reduction_experiment(const LqGameSpec& spec, int root,
                                                const std::vector<int>& r_list,
                                                BoundaryPolicy policy,
                                                const DistributedOptions& opt,
                                                bool strict = false) {
  (void)policy;
  spec.validate();
  const NkhTable table(spec.graph, root);
  const CostBounds bounds = spec.derived_bounds();
  const auto full = distributed_fixed_point(spec, all_players(spec), nullptr, opt);

  W2Curve curve;
  curve.warnings = full.warnings;
  for (int r : r_list) {
    if (r < 1) throw std::invalid_argument("reduction radius must be >= 1");
    const auto I = detail::ball_of_radius(table, r);
    const auto& layer_r = table.layer(std::min(r, table.h_star()));
    const BoundaryData bd =
        frozen_boundary(spec, layer_r, TimeGrid{spec.T, opt.steps});
    const auto red = distributed_fixed_point(
        spec, I, layer_r.empty() ? nullptr : &bd, opt);

    std::vector<double> w2(opt.steps + 1);
    for (int m = 0; m <= opt.steps; ++m)
      w2[m] = w2_gaussian_sq(full.marginal_mean(root, m), full.marginal_cov(root, m),
                             red.marginal_mean(root, m), red.marginal_cov(root, m));
    W2CurveRow row;
    row.r = r;
    row.iterations = red.iterations;
    row.avg_w2_sq = time_average(w2, full.grid);
    row.sup_w2_sq = *std::max_element(w2.begin(), w2.end());
    row.theta = theta_from_game(bounds, spec.graph, I);
    row.theta_star = theta_star(table, std::min(r, table.h_star()));
    row.gamma_r = detail::gamma_product_at(table, row.theta, r);
    double rhs = 0.0;
    for (int j : layer_r) {
      double sup = 0.0;
      for (int m = 0; m <= opt.steps; ++m)
        sup = std::max(sup, full.moment2(j, m) + bd.moment2[bd.index_of(j)][2 * m]);
      rhs += (bounds.alpha(j) + bounds.beta(j)) * 2.0 * sup;
    }
    row.rhs = row.gamma_r * rhs / bounds.beta(root);
    if (row.theta > row.theta_star) {
      const std::string msg =
          "theta exceeds theta* at r = " + std::to_string(r);
      if (strict) throw InfeasibleError(msg);
      curve.warnings.push_back(msg);
    }
    curve.rows.push_back(row);
  }
  return curve;
}

}  // namespace sparsegame
