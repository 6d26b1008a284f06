#pragma once

// Certified decay constants for sparse games.
//
// Everything here is exact binary64 evaluation of the two recursive
// inequalities that turn the per-player energy estimate
//
//     alpha_i A^i + beta_i B^i  <=  alpha'_i sum_{j ~ i} A^j
//                                 + beta'_i sum_{j ~ i} B^j
//
// into a geometric bound across graph layers. With C^i := alpha_i A^i +
// beta_i B^i and gamma := sup_i max(alpha'_i / inf_{j~i} alpha_j,
// beta'_i / inf_{j~i} beta_j), one has C^i <= gamma sum_{j~i} C^j, and
// summing over layer h around the root gives
//
//     sum_{i in layer h} C^i <= gamma_h sum_{i in layer h+1} C^i,
//     gamma_0 = gamma,
//     gamma_h = gamma sup_{k in layer h+1} N_k^h / Denom_h,
//     Denom_h = 1 - gamma sum_{i=0..h} (sup_{k in layer i} N_k^h)
//                         prod_{j=i..h-1} gamma_j,
//
// valid as long as every Denom_h stays positive. Iterating yields
// C^root <= gamma^(r) sum_{layer r} C^i with gamma^(r) = prod_{j<r} gamma_j.
//
// The tilde variant handles a single extra source term E at a vertex k in
// layer r: layer sums then satisfy
//     sum_{layer h} C^i <= tilde_gamma_h E + gamma_h sum_{layer h+1} C^i
// with tilde_gamma_r = 1 / Denom_r and, for j > r,
//     tilde_gamma_j = gamma sum_{l=0..j-1} sum_{i=max(r,l)..j-1}
//                       (sup_{k in layer l} N_k^j) tilde_gamma_i
//                       prod_{h=l..i-1} gamma_h   / Denom_j,
// and iterating up to the first empty layer h* gives
//     C^root <= tilde_gamma^(r) E,
//     tilde_gamma^(r) = sum_{j=r..h*-1} gamma^(j) tilde_gamma_j.

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <json.hpp>

#include "sparsegame/errors.hpp"
#include "sparsegame/graph.hpp"
#include "sparsegame/layers.hpp"

namespace sparsegame {

// Per-player cost-structure constants. kappa is the Hamiltonian
// monotonicity constant, (K_f, l_f) the own-state convexity and neighbor
// Lipschitz constants of the running cost, (K_g, l_g) the same for the
// terminal cost, T the horizon.
struct CostBounds {
  std::vector<double> kappa;
  std::vector<double> K_f, l_f;
  std::vector<double> K_g, l_g;
  double T = 1.0;

  int num_players() const { return static_cast<int>(kappa.size()); }

  void validate() const {
    const size_t n = kappa.size();
    if (K_f.size() != n || l_f.size() != n || K_g.size() != n || l_g.size() != n)
      throw std::invalid_argument("cost bound vectors must have equal length");
    if (!(T > 0)) throw std::invalid_argument("horizon T must be positive");
    for (size_t i = 0; i < n; ++i) {
      if (!(kappa[i] > 0)) throw std::invalid_argument("kappa must be positive");
      if (K_f[i] < 0 || l_f[i] < 0 || K_g[i] < 0 || l_g[i] < 0)
        throw std::invalid_argument("cost bounds must be nonnegative");
    }
  }

  // Weights of the per-player energy C^i: alpha multiplies the terminal
  // squared gap, beta the time-averaged one.
  double alpha(int i) const { return kappa[i] / 8.0 + K_g[i] * T; }
  double beta(int i) const { return kappa[i] / 8.0 + K_f[i] * T * T; }
};

// Interaction-to-convexity ratio theta over the index set I. The infimum
// over an empty neighbor set is +inf; a positive numerator with an empty
// (or degenerate) denominator flags the game infeasible (theta = +inf).
inline double theta_from_game(const CostBounds& b, const Graph& g,
                              const std::vector<int>& index_set) {
  b.validate();
  if (index_set.empty()) throw std::invalid_argument("index set must be nonempty");
  const double inf = std::numeric_limits<double>::infinity();
  double theta = 0.0;
  for (int i : index_set) {
    double den_g = inf, den_f = inf;
    for (int j : g.in_neighbors(i)) {
      den_g = std::min(den_g, b.kappa[j] / (8.0 * b.T) + b.K_g[j]);
      den_f = std::min(den_f, b.kappa[j] / (8.0 * b.T * b.T) + b.K_f[j]);
    }
    const auto ratio = [](double num, double den) {
      if (num == 0.0) return 0.0;
      if (den == std::numeric_limits<double>::infinity() || den <= 0.0)
        return std::numeric_limits<double>::infinity();
      return num / den;
    };
    theta = std::max(theta, ratio(b.l_g[i], den_g));
    theta = std::max(theta, ratio(b.l_f[i], den_f));
  }
  return theta;
}

namespace detail {

// gamma_h together with its denominators; nullopt when some Denom_h <= 0.
struct GammaRecursion {
  std::vector<double> gamma;  // gamma_0 .. gamma_{r-1}
  std::vector<double> denom;  // Denom_0 = 1, Denom_1 .. Denom_{r-1}
};

inline std::optional<GammaRecursion> run_gamma_recursion(const NkhTable& t,
                                                         double gamma, int r) {
  GammaRecursion out;
  out.gamma.reserve(r);
  out.denom.reserve(r);
  if (r == 0) return out;
  out.gamma.push_back(gamma);
  out.denom.push_back(1.0);
  // prod_tail[i] = prod_{j=i..h-1} gamma_j, updated incrementally.
  std::vector<double> prod_tail = {1.0};  // entry i = 0 at h = 1 start
  for (int h = 1; h < r; ++h) {
    // Extend tails: prod_{j=i..h-1} = prod_{j=i..h-2} * gamma_{h-1}.
    for (double& p : prod_tail) p *= out.gamma[h - 1];
    prod_tail.push_back(1.0);  // i = h term (empty product)
    double s = 0.0;
    for (int i = 0; i <= h; ++i) s += t.layer_sup(i, h) * prod_tail[i];
    const double denom = 1.0 - gamma * s;
    if (!(denom > 0.0)) return std::nullopt;
    out.gamma.push_back(gamma * t.layer_sup(h + 1, h) / denom);
    out.denom.push_back(denom);
  }
  return out;
}

}  // namespace detail

// (gamma_0 .. gamma_{r-1}); throws InfeasibleError when gamma sits above
// the feasibility threshold of the recursion.
inline std::vector<double> gamma_sequence(const NkhTable& t, double gamma, int r) {
  if (!(gamma > 0)) throw std::invalid_argument("gamma must be positive");
  if (r < 0 || r > t.h_star())
    throw std::invalid_argument("radius must lie in [0, h_star]");
  auto rec = detail::run_gamma_recursion(t, gamma, r);
  if (!rec)
    throw InfeasibleError("gamma recursion infeasible: a layer denominator is <= 0 at gamma=" +
                          std::to_string(gamma));
  return rec->gamma;
}

// prod of the sequence; 1 for the empty product.
inline double gamma_product(const std::vector<double>& seq) {
  double p = 1.0;
  for (double g : seq) p *= g;
  return p;
}

// Supremum of gamma in (0, 1] keeping the recursion feasible up to radius
// r, certified by bisection (60 iterations, certainly feasible endpoint
// returned, absolute gap below 1e-12).
inline double theta_star(const NkhTable& t, int r) {
  if (r < 0 || r > t.h_star())
    throw std::invalid_argument("radius must lie in [0, h_star]");
  const auto feasible = [&](double g) {
    return detail::run_gamma_recursion(t, g, r).has_value();
  };
  if (feasible(1.0)) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? lo : hi) = mid;
  }
  return lo;
}

// Closed-form gamma guaranteeing gamma_h < 1 and gamma^(r) <= gbar^r for
// every table with N_k^h <= n_bound: gamma = gbar / (K (1 + gbar)),
// K = 2 n_bound.
inline double theta_star_uniform(int n_bound, double gbar) {
  if (n_bound < 1) throw std::invalid_argument("n_bound must be >= 1");
  if (!(gbar > 0.0 && gbar < 1.0)) throw std::invalid_argument("gbar must lie in (0,1)");
  const double K = 2.0 * n_bound;
  return gbar / (K * (1.0 + gbar));
}

struct TildeGamma {
  std::vector<double> seq;  // tilde_gamma_r .. tilde_gamma_{h*-1}
  double total = 0.0;       // tilde_gamma^(r)
};

// Source-term decay constants for a perturbation at graph distance r.
inline TildeGamma tilde_gamma(const NkhTable& t, double gamma, int r) {
  if (!(gamma > 0)) throw std::invalid_argument("gamma must be positive");
  if (r < 0 || r >= t.h_star())
    throw std::invalid_argument("perturbation radius must lie in [0, h_star)");
  const int hs = t.h_star();
  auto rec = detail::run_gamma_recursion(t, gamma, hs);
  if (!rec) throw InfeasibleError("gamma recursion infeasible up to h_star");
  const auto& gseq = rec->gamma;
  const auto& denom = rec->denom;

  TildeGamma out;
  out.seq.assign(hs - r, 0.0);
  out.seq[0] = 1.0 / denom[r];  // r = 0 has Denom_0 = 1
  for (int j = r + 1; j < hs; ++j) {
    // prod_{h=l..i-1} gamma_h for l <= i, via prefix products.
    double num = 0.0;
    for (int l = 0; l <= j - 1; ++l) {
      const int sup = t.layer_sup(l, j);
      if (sup == 0) continue;
      double inner = 0.0;
      for (int i = std::max(r, l); i <= j - 1; ++i) {
        double prod = 1.0;
        for (int h = l; h <= i - 1; ++h) prod *= gseq[h];
        inner += out.seq[i - r] * prod;
      }
      num += sup * inner;
    }
    out.seq[j - r] = gamma * num / denom[j];
  }
  double total = 0.0, gprod = 1.0;
  for (int j = 0; j < hs; ++j) {
    if (j >= r) total += gprod * out.seq[j - r];
    gprod *= gseq[j];
  }
  out.total = total;
  return out;
}

// Reduction radius guaranteeing a squared-gap below eps when all second
// moments stay below M and all N_k^h <= n_bound.
struct ReductionRadius {
  double theta_star = 0.0;
  int r_star = 0;
};

inline ReductionRadius reduction_radius(double eps, double M, int n_bound) {
  if (!(eps > 0) || !(M > 0)) throw std::invalid_argument("eps and M must be positive");
  ReductionRadius out;
  out.theta_star = theta_star_uniform(n_bound, 1.0 / (4.0 * n_bound));
  out.r_star = (eps >= 2.0 * M)
                   ? 0
                   : static_cast<int>(std::ceil(std::log2(2.0 * M / eps)));
  return out;
}

// Direct check of the layer-sum estimate on explicit data: given C >= 0
// with C^i <= gamma sum_{j ~ i} C^j on layers 0..R-1 (R detected as the
// largest radius where the hypothesis holds), asserts
// C^root <= gamma^(r) sum_{layer r} C^i for every r <= R.
inline bool lemma51_oracle(const Graph& g, int root, double gamma,
                           const std::vector<double>& C,
                           double rel_tol = 1e-9) {
  if (static_cast<int>(C.size()) != g.num_vertices())
    throw std::invalid_argument("C must have one entry per vertex");
  for (double c : C)
    if (!(c >= 0)) throw std::invalid_argument("C must be nonnegative");
  const NkhTable t(g, root);

  const auto holds_at = [&](int i) {
    double s = 0.0;
    for (int j : g.in_neighbors(i)) s += C[j];
    return C[i] <= gamma * s + rel_tol * (1.0 + std::abs(C[i]));
  };
  int R = 0;
  while (R < t.h_star()) {
    bool ok = true;
    for (int i : t.layer(R)) ok = ok && holds_at(i);
    if (!ok) break;
    ++R;
  }
  if (R == 0) throw std::invalid_argument("hypothesis fails already at the root");

  for (int r = 1; r <= R; ++r) {
    auto rec = detail::run_gamma_recursion(t, gamma, std::min(r, t.h_star()));
    if (!rec) return false;  // gamma beyond the certified range
    const double gr = gamma_product(rec->gamma);
    double boundary = 0.0;
    for (int i : t.layer(r)) boundary += C[i];
    if (C[root] > gr * boundary + rel_tol * (1.0 + C[root])) return false;
  }
  return true;
}

// Assembled decay certificate for one game/table pair.
struct DecayReport {
  double theta = 0.0;
  double theta_star = 0.0;
  std::vector<double> gamma_seq;
  double gamma_r = 1.0;
  std::vector<double> tilde_seq;
  double tilde_r = 0.0;
  bool feasible = false;
  std::vector<double> alpha, beta;  // rhs weights per vertex

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["theta"] = theta;
    j["theta_star"] = theta_star;
    j["gamma_seq"] = gamma_seq;
    j["gamma_r"] = gamma_r;
    j["tilde_seq"] = tilde_seq;
    j["tilde_r"] = tilde_r;
    j["feasible"] = feasible;
    j["rhs_weights"] = {{"alpha", alpha}, {"beta", beta}};
    return j;
  }
};

// theta, theta*, the gamma sequence to radius r and (when r < h*) the
// tilde constants, evaluated at gamma = theta.
inline DecayReport decay_report(const CostBounds& b, const Graph& g,
                                const std::vector<int>& index_set,
                                const NkhTable& t, int r) {
  DecayReport rep;
  rep.theta = theta_from_game(b, g, index_set);
  const int reff = std::min(r, t.h_star());
  rep.theta_star = theta_star(t, reff);
  for (int i = 0; i < b.num_players(); ++i) {
    rep.alpha.push_back(b.alpha(i));
    rep.beta.push_back(b.beta(i));
  }
  if (!std::isfinite(rep.theta) || rep.theta <= 0.0) {
    rep.feasible = std::isfinite(rep.theta);
    if (rep.feasible && rep.theta == 0.0) {
      rep.gamma_seq.assign(reff, 0.0);
      if (!rep.gamma_seq.empty()) rep.gamma_seq[0] = 0.0;
      rep.gamma_r = reff == 0 ? 1.0 : 0.0;
    }
    return rep;
  }
  auto rec = detail::run_gamma_recursion(t, rep.theta, reff);
  if (!rec) {
    rep.feasible = false;
    return rep;
  }
  rep.gamma_seq = rec->gamma;
  rep.gamma_r = gamma_product(rep.gamma_seq);
  rep.feasible = rep.theta <= rep.theta_star;
  if (r < t.h_star()) {
    auto tg = tilde_gamma(t, rep.theta, r);
    rep.tilde_seq = tg.seq;
    rep.tilde_r = tg.total;
  }
  return rep;
}

}  // namespace sparsegame
