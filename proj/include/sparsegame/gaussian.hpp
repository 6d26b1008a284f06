#pragma once

// Exact Gaussian state flows under the linear costate feedback, and the
// closed-form squared Wasserstein-2 distance between Gaussians.
//
// With drift -K^{-1}(P(t) x + q(t)) the joint law stays Gaussian:
//   mean:        dm/dt = A(t) m + c(t),        A = -K^{-1} P, c = -K^{-1} q,
//   covariance:  dS/dt = A S + S A' + blockdiag(sigma^i sigma^i').
// Both integrate forward with classical RK4 on the coarse grid; the
// mid-step A, c come from the Riccati solution's half-grid nodes.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "sparsegame/errors.hpp"
#include "sparsegame/riccati.hpp"

namespace sparsegame {

struct GaussianFlow {
  TimeGrid grid;
  std::vector<int> players;
  int d = 1;
  std::vector<Eigen::VectorXd> mean;  // coarse grid
  std::vector<Eigen::MatrixXd> cov;   // coarse grid

  int local_index(int player) const {
    const auto it = std::lower_bound(players.begin(), players.end(), player);
    if (it == players.end() || *it != player)
      throw std::invalid_argument("player not part of this flow");
    return static_cast<int>(it - players.begin());
  }

  Eigen::VectorXd marginal_mean(int player, int m) const {
    return mean[m].segment(local_index(player) * d, d);
  }
  Eigen::MatrixXd marginal_cov(int player, int m) const {
    const int a = local_index(player);
    return cov[m].block(a * d, a * d, d, d);
  }
  double moment2(int player, int m) const {
    return marginal_mean(player, m).squaredNorm() + marginal_cov(player, m).trace();
  }
  double sup_moment2(int player) const {
    double best = 0.0;
    for (int m = 0; m <= grid.steps; ++m) best = std::max(best, moment2(player, m));
    return best;
  }
};

inline GaussianFlow solve_gaussian_flow(const LqGameSpec& spec,
                                        const RiccatiSolution& sol) {
  const int n = static_cast<int>(sol.players.size());
  const int d = sol.d, nd = n * d;

  Eigen::VectorXd kinv(nd);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(nd, nd);
  for (int a = 0; a < n; ++a) {
    const int i = sol.players[a];
    kinv.segment(a * d, d).setConstant(1.0 / spec.kappa[i]);
    D.block(a * d, a * d, d, d) = spec.sigma[i] * spec.sigma[i].transpose();
  }

  GaussianFlow flow;
  flow.grid = sol.grid;
  flow.players = sol.players;
  flow.d = d;
  flow.mean.assign(sol.grid.steps + 1, Eigen::VectorXd());
  flow.cov.assign(sol.grid.steps + 1, Eigen::MatrixXd());

  Eigen::VectorXd m(nd);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(nd, nd);
  for (int a = 0; a < n; ++a) {
    m.segment(a * d, d) = spec.init_mean[sol.players[a]];
    S.block(a * d, a * d, d, d) = spec.init_cov[sol.players[a]];
  }
  flow.mean[0] = m;
  flow.cov[0] = S;

  const auto drift_m = [&](int fine_node, const Eigen::VectorXd& mv) {
    return (-kinv).asDiagonal() * (sol.P[fine_node] * mv + sol.q[fine_node]);
  };
  const auto drift_S = [&](int fine_node, const Eigen::MatrixXd& Sv) {
    const Eigen::MatrixXd AS = (-kinv).asDiagonal() * (sol.P[fine_node] * Sv);
    return Eigen::MatrixXd(AS + AS.transpose() + D);
  };

  const double h = sol.grid.coarse_dt();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  for (int step = 0; step < sol.grid.steps; ++step) {
    const int f0 = 2 * step, f1 = 2 * step + 1, f2 = 2 * step + 2;
    const Eigen::VectorXd k1m = drift_m(f0, m);
    const Eigen::MatrixXd k1S = drift_S(f0, S);
    const Eigen::VectorXd k2m = drift_m(f1, m + 0.5 * h * k1m);
    const Eigen::MatrixXd k2S = drift_S(f1, S + 0.5 * h * k1S);
    const Eigen::VectorXd k3m = drift_m(f1, m + 0.5 * h * k2m);
    const Eigen::MatrixXd k3S = drift_S(f1, S + 0.5 * h * k2S);
    const Eigen::VectorXd k4m = drift_m(f2, m + h * k3m);
    const Eigen::MatrixXd k4S = drift_S(f2, S + h * k3S);
    m += (h / 6.0) * (k1m + 2.0 * k2m + 2.0 * k3m + k4m);
    S += (h / 6.0) * (k1S + 2.0 * k2S + 2.0 * k3S + k4S);
    S = 0.5 * (S + S.transpose()).eval();
    es.compute(S, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-8 * std::max(S.trace(), 1e-16))
      throw BlowupError("joint covariance lost positive semidefiniteness");
    flow.mean[step + 1] = m;
    flow.cov[step + 1] = S;
  }
  return flow;
}

// Squared Wasserstein-2 distance between Gaussian laws:
//   |m1 - m2|^2 + tr(S1 + S2 - 2 (S1^{1/2} S2 S1^{1/2})^{1/2}).
// Symmetric eigendecompositions throughout; eigenvalues slightly below
// zero (>= -1e-12 * trace) are clamped, anything lower is rejected.
inline double w2_gaussian_sq(const Eigen::VectorXd& m1, const Eigen::MatrixXd& S1,
                             const Eigen::VectorXd& m2, const Eigen::MatrixXd& S2) {
  const double dm = (m1 - m2).squaredNorm();
  if (S1.rows() == 1 && S2.rows() == 1) {
    const auto root = [](double s) {
      if (s < -1e-12 * std::abs(s) - 1e-300)
        throw std::invalid_argument("negative variance");
      return std::sqrt(std::max(s, 0.0));
    };
    const double ds = root(S1(0, 0)) - root(S2(0, 0));
    return dm + ds * ds;
  }
  const auto clamped_eigs = [](const Eigen::MatrixXd& S) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
    Eigen::VectorXd ev = es.eigenvalues();
    const double tol = 1e-12 * std::max(std::abs(S.trace()), 1.0);
    for (int i = 0; i < ev.size(); ++i) {
      if (ev(i) < -tol)
        throw std::invalid_argument("covariance not positive semidefinite beyond clamp tolerance");
      ev(i) = std::max(ev(i), 0.0);
    }
    return std::make_pair(ev, es.eigenvectors());
  };
  const auto [ev1, V1] = clamped_eigs(S1);
  const Eigen::MatrixXd sqrtS1 =
      V1 * ev1.cwiseSqrt().asDiagonal() * V1.transpose();
  const Eigen::MatrixXd M = sqrtS1 * S2 * sqrtS1;
  const auto [evM, VM] = clamped_eigs(M);
  const double cross = evM.cwiseSqrt().sum();
  // tr(S1) + tr(S2) - 2 tr(M^{1/2}) can go epsilon-negative for equal inputs
  const double bures = std::max(S1.trace() + S2.trace() - 2.0 * cross, 0.0);
  return dm + bures;
}

// Trapezoid time average over the coarse grid of a per-node quantity.
inline double time_average(const std::vector<double>& values, const TimeGrid& grid) {
  double acc = 0.0;
  for (int m = 0; m < grid.steps; ++m) acc += 0.5 * (values[m] + values[m + 1]);
  return acc / grid.steps;  // (1/T) * trapezoid with dt = T / steps
}

}  // namespace sparsegame
