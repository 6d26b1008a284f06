#pragma once

// Monte Carlo cross-check of the exact Gaussian reduction gap.
//
// Full and reduced systems are driven by the same Brownian increments and
// the same initial samples for the shared players (synchronous coupling);
// the squared Wasserstein-2 distance between the root player's marginals
// is estimated at every grid time by the sorted-sample quantile distance
// (d = 1 only), then time-averaged by the trapezoid rule.
//
// Paths are partitioned into fixed blocks, each with its own generator
// seeded by (seed, block index), so the result is reproducible for any
// worker count; SPARSE_GAME_THREADS caps the number of workers.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <random>
#include <thread>
#include <vector>

#include "sparsegame/riccati.hpp"

namespace sparsegame {

struct McEstimate {
  double avg_w2_sq = 0.0;
  double std_error = 0.0;
  int paths = 0;
  int blocks = 0;
};

namespace detail {

inline int worker_cap() {
  if (const char* env = std::getenv("SPARSE_GAME_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace detail

inline McEstimate mc_coupling_oracle(const LqGameSpec& spec,
                                     const std::vector<int>& index_set,
                                     const BoundaryData* boundary, int paths,
                                     unsigned long long seed, int steps) {
  spec.validate();
  if (spec.d != 1)
    throw std::invalid_argument("the quantile coupling estimator needs d = 1");
  if (paths < 1000) throw std::invalid_argument("need at least 1000 paths");

  const auto full_sol = solve_riccati(spec, all_players(spec), nullptr, steps);
  const auto red_sol = solve_riccati(spec, index_set, boundary, steps);

  const int n = spec.num_players();
  const int nr = static_cast<int>(red_sol.players.size());
  const int root_local = red_sol.local_index(0);
  const int M = steps;
  const double h = spec.T / M;
  const double sqh = std::sqrt(h);

  constexpr int kBlocks = 20;
  std::vector<double> block_avg(kBlocks, 0.0);
  std::vector<int> block_paths(kBlocks, paths / kBlocks);
  for (int b = 0; b < paths % kBlocks; ++b) ++block_paths[b];

  Eigen::VectorXd kinv_full(n), kinv_red(nr), sig_full(n), sig_red(nr);
  for (int i = 0; i < n; ++i) {
    kinv_full(i) = 1.0 / spec.kappa[i];
    sig_full(i) = spec.sigma[i](0, 0);
  }
  for (int a = 0; a < nr; ++a) {
    kinv_red(a) = kinv_full(red_sol.players[a]);
    sig_red(a) = sig_full(red_sol.players[a]);
  }

  const auto run_block = [&](int b) {
    std::seed_seq sq{static_cast<unsigned long long>(b), seed};
    std::mt19937_64 rng(sq);
    std::normal_distribution<double> nrm;
    const int np = block_paths[b];

    Eigen::MatrixXd Xf(n, np), Xr(nr, np), Xi(n, np);
    for (int i = 0; i < n; ++i) {
      const double m0 = spec.init_mean[i](0);
      const double s0 = std::sqrt(std::max(spec.init_cov[i](0, 0), 0.0));
      for (int p = 0; p < np; ++p) Xf(i, p) = m0 + s0 * nrm(rng);
    }
    for (int a = 0; a < nr; ++a) Xr.row(a) = Xf.row(red_sol.players[a]);

    std::vector<double> w2(M + 1, 0.0);
    std::vector<double> sf(np), sr(np);
    const auto record = [&](int m) {
      for (int p = 0; p < np; ++p) {
        sf[p] = Xf(0, p);
        sr[p] = Xr(root_local, p);
      }
      std::sort(sf.begin(), sf.end());
      std::sort(sr.begin(), sr.end());
      double acc = 0.0;
      for (int p = 0; p < np; ++p) {
        const double dlt = sf[p] - sr[p];
        acc += dlt * dlt;
      }
      w2[m] = acc / np;
    };
    record(0);

    for (int m = 0; m < M; ++m) {
      for (int i = 0; i < n; ++i)
        for (int p = 0; p < np; ++p) Xi(i, p) = nrm(rng);
      const int f = 2 * m;
      Eigen::MatrixXd drift_f =
          (-kinv_full).asDiagonal() * (full_sol.P[f] * Xf);
      drift_f.colwise() += (-kinv_full).cwiseProduct(full_sol.q[f]);
      Eigen::MatrixXd drift_r = (-kinv_red).asDiagonal() * (red_sol.P[f] * Xr);
      drift_r.colwise() += (-kinv_red).cwiseProduct(red_sol.q[f]);
      Xf += h * drift_f + sqh * (sig_full.asDiagonal() * Xi);
      for (int a = 0; a < nr; ++a)
        Xr.row(a) += h * drift_r.row(a) + sqh * sig_red(a) * Xi.row(red_sol.players[a]);
      record(m + 1);
    }
    double acc = 0.0;
    for (int m = 0; m < M; ++m) acc += 0.5 * (w2[m] + w2[m + 1]);
    block_avg[b] = acc / M;
  };

  const int workers = std::min(detail::worker_cap(), kBlocks);
  if (workers <= 1) {
    for (int b = 0; b < kBlocks; ++b) run_block(b);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int b = next.fetch_add(1); b < kBlocks; b = next.fetch_add(1))
          run_block(b);
      });
    for (auto& th : pool) th.join();
  }

  McEstimate est;
  est.paths = paths;
  est.blocks = kBlocks;
  double mean = 0.0;
  for (double v : block_avg) mean += v;
  mean /= kBlocks;
  double var = 0.0;
  for (double v : block_avg) var += (v - mean) * (v - mean);
  var /= (kBlocks - 1);
  est.avg_w2_sq = mean;
  est.std_error = std::sqrt(var / kBlocks);
  return est;
}

}  // namespace sparsegame
