#pragma once

// Linear-quadratic game data.
//
// Player i controls dX^i = a^i dt + sigma^i dB^i and pays
//     integral of  kappa^i |a^i|^2 / 2  +  f^i(X)  dt  +  g^i(X_T),
//     f^i(x) = sum_{j ~ i} (x^i - mu x^j)' Q (x^i - mu x^j) / 2,
//     g^i(x) = x^i' G^i x^i / 2.
// The Hamiltonian is H^i(p) = |p|^2 / (2 kappa^i), so the equilibrium
// drift is -v^i / kappa^i for the costate field v.

#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "sparsegame/decay.hpp"
#include "sparsegame/graph.hpp"

namespace sparsegame {

struct LqGameSpec {
  Graph graph;
  int d = 1;
  double T = 1.0;
  std::vector<double> kappa;
  Eigen::MatrixXd Q;
  double mu = 0.0;
  std::vector<Eigen::MatrixXd> G;
  std::vector<Eigen::MatrixXd> sigma;
  std::vector<Eigen::VectorXd> init_mean;
  std::vector<Eigen::MatrixXd> init_cov;

  int num_players() const { return graph.num_vertices(); }

  void validate() const {
    const int n = num_players();
    if (d < 1) throw std::invalid_argument("state dimension must be >= 1");
    if (!(T > 0)) throw std::invalid_argument("horizon must be positive");
    if (!(mu >= 0.0 && mu < 1.0)) throw std::invalid_argument("mu must lie in [0,1)");
    if (static_cast<int>(kappa.size()) != n || static_cast<int>(G.size()) != n ||
        static_cast<int>(sigma.size()) != n ||
        static_cast<int>(init_mean.size()) != n ||
        static_cast<int>(init_cov.size()) != n)
      throw std::invalid_argument("per-player fields must match the vertex count");
    if (Q.rows() != d || Q.cols() != d) throw std::invalid_argument("Q must be d x d");
    if (!Q.isApprox(Q.transpose(), 1e-12)) throw std::invalid_argument("Q must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw std::invalid_argument("Q must be positive definite");
    for (int i = 0; i < n; ++i) {
      if (!(kappa[i] > 0)) throw std::invalid_argument("kappa must be positive");
      if (G[i].rows() != d || G[i].cols() != d || sigma[i].rows() != d ||
          sigma[i].cols() != d || init_mean[i].size() != d ||
          init_cov[i].rows() != d || init_cov[i].cols() != d)
        throw std::invalid_argument("per-player matrices must be d x d");
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eg(G[i]);
      if (eg.eigenvalues().minCoeff() < -1e-12)
        throw std::invalid_argument("G must be positive semidefinite");
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ec(init_cov[i]);
      if (ec.eigenvalues().minCoeff() < -1e-12)
        throw std::invalid_argument("initial covariances must be positive semidefinite");
    }
  }

  // Constants certifying the structural assumptions of this cost family:
  // K_f = lambda_min(Q), l_f = mu lambda_max(Q) / 2, K_g = lambda_min(G^i),
  // l_g = 0 (terminal costs do not couple).
  CostBounds derived_bounds() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
    const double lam = es.eigenvalues().minCoeff();
    const double Lam = es.eigenvalues().maxCoeff();
    CostBounds b;
    const int n = num_players();
    b.kappa = kappa;
    b.K_f.assign(n, lam);
    b.l_f.assign(n, mu * Lam / 2.0);
    b.K_g.resize(n);
    b.l_g.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eg(G[i]);
      b.K_g[i] = std::max(0.0, eg.eigenvalues().minCoeff());
    }
    b.T = T;
    return b;
  }

  // Second moment of player i's initial law.
  double init_moment2(int i) const {
    return init_mean[i].squaredNorm() + init_cov[i].trace();
  }
};

// Stacked gradient of the running costs: row block i of the returned
// (N d) x (N d) matrix is D_i f^i, i.e. n_i Q on the diagonal and -mu Q at
// the columns of N_i.
inline Eigen::MatrixXd cost_coupling_matrix(const LqGameSpec& spec) {
  const int n = spec.num_players(), d = spec.d;
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(n * d, n * d);
  for (int i = 0; i < n; ++i) {
    const auto& nbrs = spec.graph.in_neighbors(i);
    F.block(i * d, i * d, d, d) = static_cast<double>(nbrs.size()) * spec.Q;
    for (int j : nbrs) F.block(i * d, j * d, d, d) = -spec.mu * spec.Q;
  }
  return F;
}

namespace detail {

// Accept either a scalar (broadcast) or an explicit per-player array.
inline std::vector<double> per_player_scalar(const nlohmann::json& j, int n,
                                             const char* name) {
  if (j.is_number()) return std::vector<double>(n, j.get<double>());
  auto v = j.get<std::vector<double>>();
  if (static_cast<int>(v.size()) != n)
    throw std::invalid_argument(std::string(name) + " must be a scalar or have one entry per player");
  return v;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, int d,
                                        const char* name) {
  if (j.is_number()) return j.get<double>() * Eigen::MatrixXd::Identity(d, d);
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (static_cast<int>(rows.size()) != d)
    throw std::invalid_argument(std::string(name) + " has wrong row count");
  Eigen::MatrixXd m(d, d);
  for (int r = 0; r < d; ++r) {
    if (static_cast<int>(rows[r].size()) != d)
      throw std::invalid_argument(std::string(name) + " has wrong column count");
    for (int c = 0; c < d; ++c) m(r, c) = rows[r][c];
  }
  return m;
}

inline std::vector<Eigen::MatrixXd> per_player_matrix(const nlohmann::json& j,
                                                      int n, int d,
                                                      const char* name) {
  if (j.is_number())
    return std::vector<Eigen::MatrixXd>(n, matrix_from_json(j, d, name));
  if (j.is_array() && static_cast<int>(j.size()) == n) {
    std::vector<Eigen::MatrixXd> out;
    for (const auto& e : j) out.push_back(matrix_from_json(e, d, name));
    return out;
  }
  throw std::invalid_argument(std::string(name) + " must be a scalar or a per-player array");
}

}  // namespace detail

// Game data from JSON. Scalars broadcast across players; matrices may be
// given as scalars (multiples of the identity) or row arrays.
inline LqGameSpec lq_spec_from_json(const Graph& g, const nlohmann::json& j) {
  static const std::vector<std::string> keys = {
      "type", "d", "T", "kappa", "Q", "mu", "G", "sigma", "init_mean", "init_cov"};
  for (const auto& item : j.items())
    if (std::find(keys.begin(), keys.end(), item.key()) == keys.end())
      throw std::invalid_argument("unknown key in lq game spec: " + item.key());
  LqGameSpec s;
  s.graph = g;
  const int n = g.num_vertices();
  s.d = j.value("d", 1);
  s.T = j.value("T", 1.0);
  s.mu = j.value("mu", 0.0);
  s.kappa = detail::per_player_scalar(j.value("kappa", nlohmann::json(1.0)), n, "kappa");
  s.Q = detail::matrix_from_json(j.value("Q", nlohmann::json(1.0)), s.d, "Q");
  s.G = detail::per_player_matrix(j.value("G", nlohmann::json(0.0)), n, s.d, "G");
  s.sigma = detail::per_player_matrix(j.value("sigma", nlohmann::json(1.0)), n, s.d, "sigma");
  const auto means = j.value("init_mean", nlohmann::json(0.0));
  if (means.is_number()) {
    s.init_mean.assign(n, Eigen::VectorXd::Constant(s.d, means.get<double>()));
  } else {
    const auto v = means.get<std::vector<nlohmann::json>>();
    if (static_cast<int>(v.size()) != n)
      throw std::invalid_argument("init_mean must be a scalar or have one entry per player");
    for (const auto& e : v) {
      if (e.is_number())
        s.init_mean.push_back(Eigen::VectorXd::Constant(s.d, e.get<double>()));
      else {
        const auto coords = e.get<std::vector<double>>();
        if (static_cast<int>(coords.size()) != s.d)
          throw std::invalid_argument("init_mean entries must have d coordinates");
        s.init_mean.push_back(
            Eigen::Map<const Eigen::VectorXd>(coords.data(), s.d));
      }
    }
  }
  s.init_cov = detail::per_player_matrix(j.value("init_cov", nlohmann::json(0.0)), n,
                                         s.d, "init_cov");
  s.validate();
  return s;
}

}  // namespace sparsegame
