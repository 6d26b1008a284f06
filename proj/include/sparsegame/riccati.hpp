#pragma once

// Block-Riccati solver for the costate field of the LQ game.
//
// The costate system for v = (v^i): with H^i(p) = |p|^2/(2 kappa^i) the
// backward equations read
//
//   -dv^i/dt - (1/2) sum_j tr(Sigma^j D_jj v^i)
//            + sum_j D_j v^i D_p H^j(v^j) = D_i f^i,    v^i(T) = D_i g^i.
//
// Substituting the linear ansatz v^i(t,x) = sum_j P^ij(t) x^j + q^i(t):
//   * D_jj v^i = 0, so the diffusion term drops;
//   * D_p H^j(v^j) = v^j / kappa^j = (sum_k P^jk x^k + q^j) / kappa^j;
//   * D_i f^i(x) = n_i Q x^i - mu Q sum_{j ~ i} x^j, an exact linear map
//     (row i of cost_coupling_matrix), plus an affine part when absent
//     neighbors are replaced by external mean trajectories.
// Matching the coefficient of each x^k and the constant:
//
//   dP/dt = P K^{-1} P - F,             P(T) = blockdiag(G^i),
//   dq^i/dt = sum_j P^ij q^j / kappa^j
//             + mu Q sum_{j ~ i, j absent} E[Z^j_t],   q(T) = 0,
//
// with K^{-1} = blockdiag(I_d / kappa^j). For a reduced game on an index
// set I the same equations run on the I x I blocks of F (diagonal blocks
// keep the full in-degree n_i: couplings to absent players still curve the
// cost in x^i) and the q forcing collects the absent neighbors' means.
//
// Time discretization: classical RK4 on a uniform grid of 2 * steps
// half-intervals; the stored half-grid values let the forward flows run
// standard RK4 on the coarse grid with exact mid-step coefficients.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "sparsegame/errors.hpp"
#include "sparsegame/lq_spec.hpp"

namespace sparsegame {

struct TimeGrid {
  double T = 1.0;
  int steps = 2000;  // coarse RK4 steps for the forward flows

  int fine_nodes() const { return 2 * steps + 1; }
  double coarse_dt() const { return T / steps; }
  double fine_dt() const { return T / (2.0 * steps); }
  double t_fine(int k) const { return T * k / (2.0 * steps); }
  double t_coarse(int m) const { return T * m / static_cast<double>(steps); }
};

// External trajectories assigned to the out-of-set neighbors: mean paths
// on the fine grid (interpreted piecewise linearly in time) plus the
// second-moment path used by the error bounds.
struct BoundaryData {
  std::vector<int> players;                        // sorted vertex ids
  std::vector<std::vector<Eigen::VectorXd>> mean;  // [player][fine node]
  std::vector<std::vector<double>> moment2;        // [player][fine node]
  TimeGrid grid;

  int index_of(int player) const {
    const auto it = std::lower_bound(players.begin(), players.end(), player);
    if (it == players.end() || *it != player)
      throw std::invalid_argument("player missing from boundary data");
    return static_cast<int>(it - players.begin());
  }

  Eigen::VectorXd mean_at(int player, double t) const {
    const auto& path = mean[index_of(player)];
    const double s = std::clamp(t / grid.fine_dt(), 0.0, 2.0 * grid.steps - 1e-12);
    const int k = std::min(static_cast<int>(s), 2 * grid.steps - 1);
    const double w = s - k;
    return (1.0 - w) * path[k] + w * path[k + 1];
  }

  double sup_moment2(int player) const {
    const auto& m = moment2[index_of(player)];
    return *std::max_element(m.begin(), m.end());
  }
};

// Z^j_t frozen at the initial law of player j.
inline BoundaryData frozen_boundary(const LqGameSpec& spec,
                                    std::vector<int> players, TimeGrid grid) {
  BoundaryData b;
  std::sort(players.begin(), players.end());
  b.players = std::move(players);
  b.grid = grid;
  for (int j : b.players) {
    b.mean.emplace_back(grid.fine_nodes(), spec.init_mean[j]);
    b.moment2.emplace_back(grid.fine_nodes(), spec.init_moment2(j));
  }
  return b;
}

struct RiccatiSolution {
  TimeGrid grid;
  std::vector<int> players;  // sorted subset of vertices
  int d = 1;
  std::vector<Eigen::MatrixXd> P;  // fine grid, (|players| d)^2 each
  std::vector<Eigen::VectorXd> q;  // fine grid

  int local_index(int player) const {
    const auto it = std::lower_bound(players.begin(), players.end(), player);
    if (it == players.end() || *it != player)
      throw std::invalid_argument("player not part of this solution");
    return static_cast<int>(it - players.begin());
  }

  Eigen::Block<const Eigen::MatrixXd> block(int fine_node, int i_local,
                                            int j_local) const {
    return P[fine_node].block(i_local * d, j_local * d, d, d);
  }

  // Operator norm of the block between two (global) players, maximized
  // over the whole stored grid.
  double max_block_norm(int player_i, int player_j) const {
    const int i = local_index(player_i), j = local_index(player_j);
    double best = 0.0;
    for (const auto& Pk : P) {
      const Eigen::MatrixXd b = Pk.block(i * d, j * d, d, d);
      if (d == 1)
        best = std::max(best, std::abs(b(0, 0)));
      else
        best = std::max(best, b.jacobiSvd().singularValues()(0));
    }
    return best;
  }

  // max_t sum_j |P^{kj}(t)|_op, the Lipschitz size of player k's costate
  // feedback row.
  double max_row_norm(int player_k) const {
    const int k = local_index(player_k);
    double best = 0.0;
    for (const auto& Pk : P) {
      double row = 0.0;
      for (size_t j = 0; j < players.size(); ++j) {
        const Eigen::MatrixXd b = Pk.block(k * d, j * d, d, d);
        row += (d == 1) ? std::abs(b(0, 0)) : b.jacobiSvd().singularValues()(0);
      }
      best = std::max(best, row);
    }
    return best;
  }
};

inline RiccatiSolution solve_riccati(const LqGameSpec& spec,
                                     std::vector<int> index_set,
                                     const BoundaryData* boundary, int steps) {
  spec.validate();
  if (steps < 2) throw std::invalid_argument("need at least 2 time steps");
  std::sort(index_set.begin(), index_set.end());
  const int n = static_cast<int>(index_set.size());
  const int d = spec.d;
  const int nd = n * d;
  if (n == 0) throw std::invalid_argument("index set must be nonempty");

  // Which neighbors fall outside the solved set, per local player.
  std::vector<std::vector<int>> absent(n);
  bool any_absent = false;
  for (int a = 0; a < n; ++a) {
    for (int j : spec.graph.in_neighbors(index_set[a]))
      if (!std::binary_search(index_set.begin(), index_set.end(), j)) {
        absent[a].push_back(j);
        any_absent = true;
      }
  }
  if (any_absent && boundary == nullptr)
    throw std::invalid_argument("reduced index set needs boundary data");
  if (any_absent)
    for (const auto& v : absent)
      for (int j : v) boundary->index_of(j);  // validates coverage

  const Eigen::MatrixXd Ffull = cost_coupling_matrix(spec);
  Eigen::MatrixXd F(nd, nd);
  Eigen::VectorXd kinv(nd);
  for (int a = 0; a < n; ++a) {
    kinv.segment(a * d, d).setConstant(1.0 / spec.kappa[index_set[a]]);
    for (int b = 0; b < n; ++b)
      F.block(a * d, b * d, d, d) =
          Ffull.block(index_set[a] * d, index_set[b] * d, d, d);
  }

  RiccatiSolution sol;
  sol.grid = TimeGrid{spec.T, steps};
  sol.players = index_set;
  sol.d = d;
  const int fn = sol.grid.fine_nodes();
  sol.P.assign(fn, Eigen::MatrixXd());
  sol.q.assign(fn, Eigen::VectorXd());

  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(nd, nd);
  for (int a = 0; a < n; ++a)
    P.block(a * d, a * d, d, d) = spec.G[index_set[a]];
  Eigen::VectorXd q = Eigen::VectorXd::Zero(nd);
  sol.P[fn - 1] = P;
  sol.q[fn - 1] = q;

  const auto forcing = [&](double t) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(nd);
    if (!any_absent) return s;
    for (int a = 0; a < n; ++a)
      for (int j : absent[a])
        s.segment(a * d, d) += spec.mu * spec.Q * boundary->mean_at(j, t);
    return s;
  };
  const auto dP = [&](const Eigen::MatrixXd& Pv) -> Eigen::MatrixXd {
    return Pv * kinv.asDiagonal() * Pv - F;
  };
  const auto dq = [&](const Eigen::MatrixXd& Pv, const Eigen::VectorXd& qv,
                      double t) -> Eigen::VectorXd {
    return Pv * (kinv.asDiagonal() * qv) + forcing(t);
  };

  const double h = -sol.grid.fine_dt();  // backward
  for (int k = fn - 1; k > 0; --k) {
    const double t = sol.grid.t_fine(k);
    const Eigen::MatrixXd k1P = dP(P);
    const Eigen::VectorXd k1q = dq(P, q, t);
    const Eigen::MatrixXd P2 = P + 0.5 * h * k1P;
    const Eigen::VectorXd q2 = q + 0.5 * h * k1q;
    const Eigen::MatrixXd k2P = dP(P2);
    const Eigen::VectorXd k2q = dq(P2, q2, t + 0.5 * h);
    const Eigen::MatrixXd P3 = P + 0.5 * h * k2P;
    const Eigen::VectorXd q3 = q + 0.5 * h * k2q;
    const Eigen::MatrixXd k3P = dP(P3);
    const Eigen::VectorXd k3q = dq(P3, q3, t + 0.5 * h);
    const Eigen::MatrixXd P4 = P + h * k3P;
    const Eigen::VectorXd q4 = q + h * k3q;
    const Eigen::MatrixXd k4P = dP(P4);
    const Eigen::VectorXd k4q = dq(P4, q4, t + h);
    P += (h / 6.0) * (k1P + 2.0 * k2P + 2.0 * k3P + k4P);
    q += (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
    if (P.cwiseAbs().maxCoeff() > 1e8 || !P.allFinite())
      throw BlowupError("costate matrix left the monotone regime (|P| > 1e8)");
    sol.P[k - 1] = P;
    sol.q[k - 1] = q;
  }
  return sol;
}

inline std::vector<int> all_players(const LqGameSpec& spec) {
  std::vector<int> v(spec.num_players());
  for (int i = 0; i < spec.num_players(); ++i) v[i] = i;
  return v;
}

}  // namespace sparsegame
