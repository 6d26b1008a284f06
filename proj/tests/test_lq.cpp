#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "sparsegame/gaussian.hpp"
#include "sparsegame/lq_spec.hpp"
#include "sparsegame/riccati.hpp"

using namespace sparsegame;

namespace {

LqGameSpec make_spec(const Graph& g, double mu, double T = 1.0, double sigma = 1.0,
                     double q = 1.0, int d = 1) {
  LqGameSpec s;
  s.graph = g;
  s.d = d;
  s.T = T;
  s.mu = mu;
  const int n = g.num_vertices();
  s.kappa.assign(n, 1.0);
  s.Q = q * Eigen::MatrixXd::Identity(d, d);
  s.G.assign(n, Eigen::MatrixXd::Zero(d, d));
  s.sigma.assign(n, sigma * Eigen::MatrixXd::Identity(d, d));
  for (int i = 0; i < n; ++i) {
    s.init_mean.push_back(Eigen::VectorXd::Constant(d, (i % 3) - 1.0));
    s.init_cov.push_back(Eigen::MatrixXd::Identity(d, d));
  }
  return s;
}

// Running cost of player i, evaluated directly.
double f_i(const LqGameSpec& s, int i, const Eigen::VectorXd& x) {
  double acc = 0.0;
  for (int j : s.graph.in_neighbors(i)) {
    const Eigen::VectorXd z =
        x.segment(i * s.d, s.d) - s.mu * x.segment(j * s.d, s.d);
    acc += 0.5 * z.dot(s.Q * z);
  }
  return acc;
}

}  // namespace

TEST_CASE("cost coupling matrix") {
  SECTION("mu = 0 is block diagonal with n_i Q") {
    const auto s = make_spec(build_chain(4, false), 0.0);
    const Eigen::MatrixXd F = cost_coupling_matrix(s);
    Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(4, 4);
    expect.diagonal() << 1, 2, 2, 1;
    CHECK((F - expect).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("hand value on the acyclic 3-chain") {
    const auto s = make_spec(build_chain(3, false), 0.5);
    const Eigen::MatrixXd F = cost_coupling_matrix(s);
    Eigen::MatrixXd expect(3, 3);
    expect << 1, -0.5, 0, -0.5, 2, -0.5, 0, -0.5, 1;
    CHECK((F - expect).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("single player") {
    const auto s = make_spec(build_chain(1, false), 0.3);
    CHECK(cost_coupling_matrix(s).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("rows match central differences of f^i") {
    auto s = make_spec(build_chain(5, true), 0.35, 1.0, 1.0, 1.3, 2);
    s.Q(0, 1) = s.Q(1, 0) = 0.2;
    const Eigen::MatrixXd F = cost_coupling_matrix(s);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nrm;
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::VectorXd x(5 * 2);
      for (int k = 0; k < x.size(); ++k) x(k) = nrm(rng);
      for (int i = 0; i < 5; ++i) {
        const Eigen::VectorXd grad = F.middleRows(i * 2, 2) * x;
        for (int c = 0; c < 2; ++c) {
          const double eps = 1e-6;
          Eigen::VectorXd xp = x, xm = x;
          xp(i * 2 + c) += eps;
          xm(i * 2 + c) -= eps;
          const double fd = (f_i(s, i, xp) - f_i(s, i, xm)) / (2.0 * eps);
          CHECK(std::abs(fd - grad(c)) <= 1e-8 * (1.0 + std::abs(grad(c))));
        }
      }
    }
  }
}

TEST_CASE("riccati solver") {
  SECTION("single free player stays at zero") {
    const auto s = make_spec(build_chain(1, false), 0.0);
    const auto sol = solve_riccati(s, {0}, nullptr, 50);
    for (const auto& P : sol.P) CHECK(P.cwiseAbs().maxCoeff() == 0.0);
    for (const auto& q : sol.q) CHECK(q.cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("decoupled diagonal follows the tanh closed form") {
    const double lam = 1.7, T = 1.25;
    const auto s = make_spec(build_chain(4, true), 0.0, T, 1.0, lam);
    const auto sol = solve_riccati(s, all_players(s), nullptr, 400);
    for (int k = 0; k <= 2 * 400; k += 37) {
      const double t = sol.grid.t_fine(k);
      for (int i = 0; i < 4; ++i) {
        const double c = std::sqrt(2.0 * lam);  // n_i = 2 on the cycle
        const double expect = c * std::tanh(c * (T - t));
        CHECK(std::abs(sol.P[k](i, i) - expect) <= 1e-8);
      }
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
          if (i != j) CHECK(sol.P[k](i, j) == 0.0);
    }
  }
  SECTION("fourth-order convergence against a fine reference") {
    const auto s = make_spec(build_chain(2, false), 0.5);
    const auto ref = solve_riccati(s, {0, 1}, nullptr, 4000);
    const auto coarse = solve_riccati(s, {0, 1}, nullptr, 50);
    const auto half = solve_riccati(s, {0, 1}, nullptr, 100);
    const double e1 = (coarse.P[0] - ref.P[0]).cwiseAbs().maxCoeff();
    const double e2 = (half.P[0] - ref.P[0]).cwiseAbs().maxCoeff();
    CHECK(e1 / e2 > 10.0);
    CHECK(e1 / e2 < 22.0);
  }
  SECTION("symmetry is preserved on undirected graphs with uniform kappa") {
    const auto s = make_spec(build_chain(7, true), 0.4);
    const auto sol = solve_riccati(s, all_players(s), nullptr, 200);
    for (const auto& P : sol.P)
      CHECK((P - P.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
  }
  SECTION("terminal sparsity and reachability fill-in") {
    const Graph g = build_lattice(2, LatticeOrientation::outward);
    const auto s = make_spec(g, 0.4);
    const auto sol = solve_riccati(s, all_players(s), nullptr, 100);
    const auto& PT = sol.P.back();
    for (int i = 0; i < g.num_vertices(); ++i)
      for (int j = 0; j < g.num_vertices(); ++j)
        if (i != j) CHECK(PT(i, j) == 0.0);
    // blocks toward players that cannot influence a vertex stay zero:
    // nothing reads the origin, so P^{k,origin} = 0 for all k != origin
    const int o = g.vertex_at({0, 0});
    for (const auto& P : sol.P)
      for (int k = 0; k < g.num_vertices(); ++k)
        if (k != o) CHECK(P(k, o) == 0.0);
    // and a vertex unreachable from (1,0) stays invisible to it
    const int a = g.vertex_at({1, 0}), b = g.vertex_at({0, 1});
    for (const auto& P : sol.P) CHECK(P(a, b) == 0.0);
  }
  SECTION("reduced set without boundary data is rejected") {
    const auto s = make_spec(build_chain(5, true), 0.3);
    CHECK_THROWS_AS(solve_riccati(s, {0, 1}, nullptr, 50), std::invalid_argument);
  }
  SECTION("blow-up guard trips outside the monotone regime") {
    auto s = make_spec(build_chain(3, true), 0.0, 40.0, 1.0, 1.0);
    for (auto& G : s.G) G = -100.0 * Eigen::MatrixXd::Identity(1, 1);
    // negative terminal curvature is invalid data; bypass validate to hit
    // the integrator guard itself
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s.G.assign(3, Eigen::MatrixXd::Zero(1, 1));
    s.kappa.assign(3, 1e-6);  // huge P K^{-1} P term
    CHECK_THROWS(solve_riccati(s, all_players(s), nullptr, 2000));
  }
}

TEST_CASE("gaussian flow") {
  SECTION("no feedback: mean constant, covariance grows linearly") {
    auto s = make_spec(build_chain(3, true), 0.0, 2.0, 0.7);
    s.Q = 1e-30 * Eigen::MatrixXd::Identity(1, 1);  // effectively zero cost
    auto sol = solve_riccati(s, all_players(s), nullptr, 100);
    for (auto& P : sol.P) P.setZero();
    const auto flow = solve_gaussian_flow(s, sol);
    const int M = sol.grid.steps;
    for (int m = 0; m <= M; m += 25) {
      const double t = sol.grid.t_coarse(m);
      for (int i = 0; i < 3; ++i) {
        CHECK(flow.marginal_mean(i, m)(0) == Catch::Approx((i % 3) - 1.0).margin(1e-14));
        CHECK(flow.marginal_cov(i, m)(0, 0) ==
              Catch::Approx(1.0 + t * 0.49).margin(1e-12));
      }
    }
  }
  SECTION("deterministic game stays deterministic") {
    auto s = make_spec(build_chain(3, true), 0.4, 1.0, 0.0);
    for (auto& c : s.init_cov) c.setZero();
    const auto sol = solve_riccati(s, all_players(s), nullptr, 100);
    const auto flow = solve_gaussian_flow(s, sol);
    for (const auto& S : flow.cov) CHECK(S.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("wasserstein-2 between gaussians") {
  SECTION("identical laws") {
    Eigen::VectorXd m(2);
    m << 0.3, -1.0;
    Eigen::MatrixXd S(2, 2);
    S << 2.0, 0.4, 0.4, 1.0;
    CHECK(w2_gaussian_sq(m, S, m, S) <= 1e-14);
  }
  SECTION("one-dimensional closed form") {
    Eigen::VectorXd m1(1), m2(1);
    m1 << 0.0;
    m2 << 1.0;
    Eigen::MatrixXd S1(1, 1), S2(1, 1);
    S1 << 1.0;
    S2 << 4.0;
    CHECK(w2_gaussian_sq(m1, S1, m2, S2) == Catch::Approx(2.0).epsilon(1e-14));
  }
  SECTION("commuting diagonal covariances add per axis") {
    Eigen::VectorXd m1 = Eigen::VectorXd::Zero(2), m2(2);
    m2 << 1.0, -2.0;
    Eigen::MatrixXd S1 = Eigen::MatrixXd::Zero(2, 2), S2 = Eigen::MatrixXd::Zero(2, 2);
    S1.diagonal() << 1.0, 9.0;
    S2.diagonal() << 4.0, 1.0;
    double per_axis = 0.0;
    per_axis += 1.0 + (1.0 - 2.0) * (1.0 - 2.0);
    per_axis += 4.0 + (3.0 - 1.0) * (3.0 - 1.0);
    CHECK(w2_gaussian_sq(m1, S1, m2, S2) == Catch::Approx(per_axis).epsilon(1e-12));
  }
  SECTION("rejects indefinite input") {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(2);
    Eigen::MatrixXd S = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd bad = S;
    bad(1, 1) = -0.5;
    CHECK_THROWS_AS(w2_gaussian_sq(m, S, m, bad), std::invalid_argument);
  }
}

TEST_CASE("lq spec json ingestion") {
  const Graph g = build_chain(3, true);
  const auto j = nlohmann::json::parse(R"({
    "type": "lq", "d": 1, "T": 1.0, "kappa": 1.0, "Q": 1.0, "mu": 0.3,
    "sigma": 1.0, "init_mean": [-1.0, 0.0, 1.0], "init_cov": 1.0})");
  const auto s = lq_spec_from_json(g, j);
  CHECK(s.mu == 0.3);
  CHECK(s.init_mean[0](0) == -1.0);
  CHECK(s.init_moment2(2) == Catch::Approx(2.0));
  auto bad = j;
  bad["zeta"] = 1;
  CHECK_THROWS_AS(lq_spec_from_json(g, bad), std::invalid_argument);
}
