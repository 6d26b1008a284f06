#pragma once

// Deterministic nonlinear verification path: zero diffusion and point
// initial states turn the costate system into a two-point boundary value
// ODE solved by single shooting.
//
// Along the equilibrium characteristics dX^j/dt = -D_p H^j = -p^j/kappa^j
// the costate field p^i(t) := v^i(t, X_t) obeys
//   dp^i/dt = dv^i/dt + sum_j D_j v^i dX^j/dt
//           = dv^i/dt - sum_j D_j v^i D_p H^j = -D_i f^i(X_t),
// using the backward equation for v with zero second-order terms and
// D_x H = 0; the terminal condition is p^i(T) = D_i g^i(X_T). Shooting
// finds p(0) such that the forward integration meets that condition,
// Newton on the residual with a central finite-difference Jacobian.
//
// Couplings f^i(x) = sum_{j ~ i} phi(x^i - mu x^j) for convex phi with
// lambda <= phi'' <= lambda + eps; in the reduced variant the out-of-set
// neighbors are replaced by fixed trajectories (frozen at their initial
// points).

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "sparsegame/decay.hpp"
#include "sparsegame/errors.hpp"
#include "sparsegame/graph.hpp"
#include "sparsegame/layers.hpp"
#include "sparsegame/reduction.hpp"
#include "sparsegame/riccati.hpp"

namespace sparsegame {

struct ConvexCoupling {
  enum class Family { quadratic, logcosh };
  Family family = Family::quadratic;
  double lambda = 1.0;
  double eps = 0.0;  // logcosh smoothing weight

  void validate() const {
    if (!(lambda > 0)) throw std::invalid_argument("lambda must be positive");
    if (eps < 0) throw std::invalid_argument("eps must be nonnegative");
    if (family == Family::quadratic && eps != 0.0)
      throw std::invalid_argument("quadratic coupling has no eps");
  }

  double lambda_min() const { return lambda; }
  double lambda_max() const { return lambda + eps; }

  double value(const Eigen::VectorXd& z) const {
    double v = 0.5 * lambda * z.squaredNorm();
    if (family == Family::logcosh)
      for (int c = 0; c < z.size(); ++c) {
        // log cosh without overflow at large |z|
        const double a = std::abs(z(c));
        v += eps * (a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0));
      }
    return v;
  }

  Eigen::VectorXd grad(const Eigen::VectorXd& z) const {
    Eigen::VectorXd g = lambda * z;
    if (family == Family::logcosh)
      for (int c = 0; c < z.size(); ++c) g(c) += eps * std::tanh(z(c));
    return g;
  }
};

struct DetGameSpec {
  Graph graph;
  int d = 1;
  double T = 1.0;
  std::vector<double> kappa;
  double mu = 0.0;
  ConvexCoupling coupling;
  std::vector<Eigen::MatrixXd> G;
  std::vector<Eigen::VectorXd> x0;

  int num_players() const { return graph.num_vertices(); }

  void validate() const {
    const int n = num_players();
    coupling.validate();
    if (d < 1) throw std::invalid_argument("state dimension must be >= 1");
    if (!(T > 0)) throw std::invalid_argument("horizon must be positive");
    if (!(mu >= 0.0 && mu < 1.0)) throw std::invalid_argument("mu must lie in [0,1)");
    if (static_cast<int>(kappa.size()) != n || static_cast<int>(G.size()) != n ||
        static_cast<int>(x0.size()) != n)
      throw std::invalid_argument("per-player fields must match the vertex count");
    for (int i = 0; i < n; ++i) {
      if (!(kappa[i] > 0)) throw std::invalid_argument("kappa must be positive");
      if (G[i].rows() != d || G[i].cols() != d || x0[i].size() != d)
        throw std::invalid_argument("per-player data must be d-dimensional");
    }
  }

  CostBounds derived_bounds() const {
    CostBounds b;
    const int n = num_players();
    b.kappa = kappa;
    b.K_f.resize(n);
    b.l_f.resize(n);
    b.K_g.resize(n);
    b.l_g.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
      const bool coupled = graph.in_degree(i) > 0;
      b.K_f[i] = coupled ? coupling.lambda_min() : 0.0;
      b.l_f[i] = coupled ? mu * coupling.lambda_max() / 2.0 : 0.0;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eg(G[i]);
      b.K_g[i] = std::max(0.0, eg.eigenvalues().minCoeff());
    }
    b.T = T;
    return b;
  }
};

struct TpbvpSolution {
  TimeGrid grid;
  std::vector<int> players;
  int d = 1;
  std::vector<Eigen::VectorXd> X;  // fine grid, stacked states
  std::vector<Eigen::VectorXd> p;  // fine grid, stacked costates
  double residual = 0.0;
  int newton_iterations = 0;

  int local_index(int player) const {
    const auto it = std::lower_bound(players.begin(), players.end(), player);
    if (it == players.end() || *it != player)
      throw std::invalid_argument("player not part of this solution");
    return static_cast<int>(it - players.begin());
  }
  Eigen::VectorXd state(int player, int fine_node) const {
    return X[fine_node].segment(local_index(player) * d, d);
  }
};

namespace detail {

struct DetSystem {
  const DetGameSpec* spec;
  std::vector<int> players;
  std::vector<std::vector<int>> inside;  // local neighbor ids
  std::vector<std::vector<int>> absent;  // global out-of-set neighbor ids
  int n, d;

  Eigen::VectorXd grad_f(const Eigen::VectorXd& x) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n * d);
    for (int a = 0; a < n; ++a) {
      const Eigen::VectorXd xi = x.segment(a * d, d);
      for (int bl : inside[a])
        g.segment(a * d, d) +=
            spec->coupling.grad(xi - spec->mu * x.segment(bl * d, d));
      for (int j : absent[a])
        g.segment(a * d, d) += spec->coupling.grad(xi - spec->mu * spec->x0[j]);
    }
    return g;
  }

  // forward characteristics of the stacked (X, p) pair
  void rhs(const Eigen::VectorXd& X, const Eigen::VectorXd& p,
           Eigen::VectorXd& dX, Eigen::VectorXd& dp) const {
    for (int a = 0; a < n; ++a)
      dX.segment(a * d, d) = -p.segment(a * d, d) / spec->kappa[players[a]];
    dp = -grad_f(X);
  }
};

inline DetSystem make_det_system(const DetGameSpec& spec,
                                 std::vector<int> index_set) {
  std::sort(index_set.begin(), index_set.end());
  DetSystem sys;
  sys.spec = &spec;
  sys.players = std::move(index_set);
  sys.n = static_cast<int>(sys.players.size());
  sys.d = spec.d;
  sys.inside.resize(sys.n);
  sys.absent.resize(sys.n);
  for (int a = 0; a < sys.n; ++a)
    for (int j : spec.graph.in_neighbors(sys.players[a])) {
      const auto it = std::lower_bound(sys.players.begin(), sys.players.end(), j);
      if (it != sys.players.end() && *it == j)
        sys.inside[a].push_back(static_cast<int>(it - sys.players.begin()));
      else
        sys.absent[a].push_back(j);
    }
  return sys;
}

// Integrate the characteristics from the given initial costate; returns
// the terminal defect p(T) - Dg(X_T) and optionally keeps the paths.
inline Eigen::VectorXd integrate_det(const DetSystem& sys, const TimeGrid& grid,
                                     const Eigen::VectorXd& p0,
                                     TpbvpSolution* keep) {
  const int n = sys.n, d = sys.d, nd = n * d;
  Eigen::VectorXd X(nd), p = p0;
  for (int a = 0; a < n; ++a)
    X.segment(a * d, d) = sys.spec->x0[sys.players[a]];
  const int fn = grid.fine_nodes();
  if (keep) {
    keep->X.assign(fn, Eigen::VectorXd());
    keep->p.assign(fn, Eigen::VectorXd());
    keep->X[0] = X;
    keep->p[0] = p;
  }
  const double h = grid.fine_dt();
  Eigen::VectorXd k1x(nd), k1p(nd), k2x(nd), k2p(nd), k3x(nd), k3p(nd), k4x(nd), k4p(nd);
  for (int node = 1; node < fn; ++node) {
    sys.rhs(X, p, k1x, k1p);
    sys.rhs(X + 0.5 * h * k1x, p + 0.5 * h * k1p, k2x, k2p);
    sys.rhs(X + 0.5 * h * k2x, p + 0.5 * h * k2p, k3x, k3p);
    sys.rhs(X + h * k3x, p + h * k3p, k4x, k4p);
    X += (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    p += (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
    if (!X.allFinite() || !p.allFinite() || X.cwiseAbs().maxCoeff() > 1e8)
      throw BlowupError("characteristics left the monotone regime");
    if (keep) {
      keep->X[node] = X;
      keep->p[node] = p;
    }
  }
  Eigen::VectorXd defect(nd);
  for (int a = 0; a < n; ++a)
    defect.segment(a * d, d) = p.segment(a * d, d) -
                               sys.spec->G[sys.players[a]] * X.segment(a * d, d);
  return defect;
}

}  // namespace detail

struct ShootOptions {
  int steps = 2000;
  double tol = 1e-10;
  int max_newton = 50;
};

inline TpbvpSolution shoot(const DetGameSpec& spec, std::vector<int> index_set,
                           const ShootOptions& opt) {
  spec.validate();
  const auto sys = detail::make_det_system(spec, std::move(index_set));
  const int nd = sys.n * sys.d;
  if (nd > 64) throw std::invalid_argument("shooting is limited to 64 unknowns");
  const TimeGrid grid{spec.T, opt.steps};

  Eigen::VectorXd p0 = Eigen::VectorXd::Zero(nd);
  Eigen::VectorXd defect = detail::integrate_det(sys, grid, p0, nullptr);
  double best = defect.cwiseAbs().maxCoeff();
  int iters = 0;
  while (best > opt.tol && iters < opt.max_newton) {
    ++iters;
    const double fd = 1e-6 * (1.0 + p0.cwiseAbs().maxCoeff());
    Eigen::MatrixXd J(nd, nd);
    for (int c = 0; c < nd; ++c) {
      Eigen::VectorXd pp = p0, pm = p0;
      pp(c) += fd;
      pm(c) -= fd;
      J.col(c) = (detail::integrate_det(sys, grid, pp, nullptr) -
                  detail::integrate_det(sys, grid, pm, nullptr)) /
                 (2.0 * fd);
    }
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
    Eigen::VectorXd cand;
    double cand_res = std::numeric_limits<double>::infinity();
    if (lu.isInvertible()) {
      cand = p0 - lu.solve(defect);
      cand_res = detail::integrate_det(sys, grid, cand, nullptr).cwiseAbs().maxCoeff();
    }
    if (cand_res < best) {
      p0 = cand;
    } else {
      // damped defect correction fallback
      double step = 0.5;
      cand_res = std::numeric_limits<double>::infinity();
      while (step > 1e-6) {
        cand = p0 - step * defect;
        cand_res =
            detail::integrate_det(sys, grid, cand, nullptr).cwiseAbs().maxCoeff();
        if (cand_res < best) break;
        step *= 0.5;
      }
      if (!(cand_res < best))
        throw NonConvergenceError("shooting stalled at residual " +
                                  std::to_string(best));
      p0 = cand;
    }
    defect = detail::integrate_det(sys, grid, p0, nullptr);
    best = defect.cwiseAbs().maxCoeff();
  }
  if (best > opt.tol)
    throw NonConvergenceError("shooting did not reach tol; residual " +
                              std::to_string(best));

  TpbvpSolution sol;
  sol.grid = grid;
  sol.players = sys.players;
  sol.d = sys.d;
  detail::integrate_det(sys, grid, p0, &sol);
  sol.residual = best;
  sol.newton_iterations = iters;
  return sol;
}

// Max relative error of the analytic coupling gradient against central
// finite differences, over the given sample points.
inline double gradient_selfcheck(const ConvexCoupling& coupling,
                                 const std::vector<Eigen::VectorXd>& points) {
  coupling.validate();
  double worst = 0.0;
  for (const auto& z : points) {
    const Eigen::VectorXd g = coupling.grad(z);
    for (int c = 0; c < z.size(); ++c) {
      // wide step: the couplings have tiny third derivatives, so roundoff
      // in the difference dominates well before truncation does
      const double eps = 1e-4 * (1.0 + std::abs(z(c)));
      Eigen::VectorXd zp = z, zm = z;
      zp(c) += eps;
      zm(c) -= eps;
      const double fd = (coupling.value(zp) - coupling.value(zm)) / (2.0 * eps);
      worst = std::max(worst,
                       std::abs(fd - g(c)) / std::max(1.0, std::abs(g(c))));
    }
  }
  return worst;
}

// Full-versus-reduced comparison at point data; w2 columns carry squared
// point distances.
inline W2Curve det_reduction_experiment(const DetGameSpec& spec, int root,
                                        const std::vector<int>& r_list,
                                        const ShootOptions& opt,
                                        bool strict = false) {
  spec.validate();
  const NkhTable table(spec.graph, root);
  const CostBounds bounds = spec.derived_bounds();
  std::vector<int> all(spec.num_players());
  for (int i = 0; i < spec.num_players(); ++i) all[i] = i;
  const auto full = shoot(spec, all, opt);

  W2Curve curve;
  for (int r : r_list) {
    if (r < 1) throw std::invalid_argument("reduction radius must be >= 1");
    const auto I = detail::ball_of_radius(table, r);
    const auto red = shoot(spec, I, opt);

    std::vector<double> gap(full.grid.steps + 1);
    for (int m = 0; m <= full.grid.steps; ++m)
      gap[m] = (full.state(root, 2 * m) - red.state(root, 2 * m)).squaredNorm();

    W2CurveRow row;
    row.r = r;
    row.iterations = std::max(full.newton_iterations, red.newton_iterations);
    row.avg_w2_sq = time_average(gap, full.grid);
    row.sup_w2_sq = *std::max_element(gap.begin(), gap.end());
    row.theta = theta_from_game(bounds, spec.graph, I);
    row.theta_star = theta_star(table, std::min(r, table.h_star()));
    row.gamma_r = detail::gamma_product_at(table, row.theta, r);
    double rhs = 0.0;
    for (int j : table.layer(std::min(r, table.h_star()))) {
      double sup = 0.0;
      for (int node = 0; node < full.grid.fine_nodes(); ++node)
        sup = std::max(sup, full.state(j, node).squaredNorm() +
                                spec.x0[j].squaredNorm());
      rhs += (bounds.alpha(j) + bounds.beta(j)) * 2.0 * sup;
    }
    row.rhs = row.gamma_r * rhs / bounds.beta(root);
    if (row.theta > row.theta_star) {
      if (strict) throw InfeasibleError("theta exceeds theta*");
      curve.warnings.push_back("theta exceeds theta* at r = " + std::to_string(r));
    }
    curve.rows.push_back(row);
  }
  return curve;
}

}  // namespace sparsegame
