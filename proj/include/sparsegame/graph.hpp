#pragma once

// Directed interaction graphs and the generators used throughout the test
// problems: chains/cycles, rooted trees and L1-ball lattices (undirected,
// outward-oriented, and the perturbed-column variant).
//
// Convention: in_neighbors()[i] lists the players whose states enter player
// i's running and terminal costs. Lists are always kept sorted, duplicate
// free, self-loop free.

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace sparsegame {

class Graph {
 public:
  Graph() = default;
  Graph(int n, std::vector<std::vector<int>> in_neighbors,
        std::optional<std::vector<std::array<int, 2>>> labels = std::nullopt)
      : n_(n), in_(std::move(in_neighbors)), labels_(std::move(labels)) {
    normalize_and_check();
  }

  int num_vertices() const { return n_; }
  const std::vector<int>& in_neighbors(int i) const { return in_.at(i); }
  const std::vector<std::vector<int>>& in_neighbors() const { return in_; }
  bool has_labels() const { return labels_.has_value(); }
  const std::vector<std::array<int, 2>>& labels() const { return *labels_; }

  int in_degree(int i) const { return static_cast<int>(in_.at(i).size()); }

  // j reads i's state for some j  <=>  i has positive out-degree.
  std::vector<int> out_degrees() const {
    std::vector<int> out(n_, 0);
    for (const auto& nbrs : in_)
      for (int j : nbrs) ++out[j];
    return out;
  }

  std::vector<int> in_degrees() const {
    std::vector<int> in(n_);
    for (int i = 0; i < n_; ++i) in[i] = in_degree(i);
    return in;
  }

  bool is_undirected() const {
    for (int i = 0; i < n_; ++i)
      for (int j : in_[i])
        if (!std::binary_search(in_[j].begin(), in_[j].end(), i)) return false;
    return true;
  }

  // Index of a labelled vertex (lattices); throws if absent.
  int vertex_at(std::array<int, 2> label) const {
    if (!labels_) throw std::invalid_argument("graph has no vertex labels");
    for (int i = 0; i < n_; ++i)
      if ((*labels_)[i] == label) return i;
    throw std::invalid_argument("no vertex with label (" +
                                std::to_string(label[0]) + "," +
                                std::to_string(label[1]) + ")");
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["n"] = n_;
    j["in_neighbors"] = in_;
    if (labels_) {
      nlohmann::json lab = nlohmann::json::array();
      for (const auto& l : *labels_) lab.push_back({l[0], l[1]});
      j["labels"] = lab;
    }
    return j;
  }

  // Adjacency order in the file is normalized (sorted) on load.
  static Graph from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("n") || !j.contains("in_neighbors"))
      throw std::invalid_argument("graph json needs fields 'n' and 'in_neighbors'");
    for (const auto& item : j.items())
      if (item.key() != "n" && item.key() != "in_neighbors" && item.key() != "labels")
        throw std::invalid_argument("unknown key in graph json: " + item.key());
    const int n = j.at("n").get<int>();
    auto nbrs = j.at("in_neighbors").get<std::vector<std::vector<int>>>();
    std::optional<std::vector<std::array<int, 2>>> labels;
    if (j.contains("labels")) {
      std::vector<std::array<int, 2>> lab;
      for (const auto& e : j.at("labels")) {
        if (!e.is_array() || e.size() != 2)
          throw std::invalid_argument("graph labels must be [x,y] pairs");
        lab.push_back({e[0].get<int>(), e[1].get<int>()});
      }
      labels = std::move(lab);
    }
    return Graph(n, std::move(nbrs), std::move(labels));
  }

 private:
  void normalize_and_check() {
    if (n_ < 0) throw std::invalid_argument("negative vertex count");
    if (static_cast<int>(in_.size()) != n_)
      throw std::invalid_argument("in_neighbors size does not match vertex count");
    if (labels_ && static_cast<int>(labels_->size()) != n_)
      throw std::invalid_argument("labels size does not match vertex count");
    for (int i = 0; i < n_; ++i) {
      auto& nbrs = in_[i];
      std::sort(nbrs.begin(), nbrs.end());
      nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
      for (int j : nbrs) {
        if (j < 0 || j >= n_)
          throw std::invalid_argument("neighbor index out of range");
        if (j == i) throw std::invalid_argument("self-loops are not allowed");
      }
    }
  }

  int n_ = 0;
  std::vector<std::vector<int>> in_;
  std::optional<std::vector<std::array<int, 2>>> labels_;
};

// Chain of N players; cyclic gives N_i = {i-1 mod N, i+1 mod N}.
inline Graph build_chain(int n, bool cyclic) {
  if (n < 1) throw std::invalid_argument("chain needs at least one vertex");
  if (cyclic && n < 3) throw std::invalid_argument("cyclic chain needs N >= 3");
  std::vector<std::vector<int>> nbrs(n);
  for (int i = 0; i < n; ++i) {
    if (cyclic) {
      nbrs[i] = {(i - 1 + n) % n, (i + 1) % n};
    } else {
      if (i > 0) nbrs[i].push_back(i - 1);
      if (i + 1 < n) nbrs[i].push_back(i + 1);
    }
  }
  return Graph(n, std::move(nbrs));
}

// Rooted undirected tree: vertex 0 is the root, children appended in
// breadth-first order.
inline Graph build_tree(int branching, int depth) {
  if (branching < 1) throw std::invalid_argument("branching must be >= 1");
  if (depth < 0) throw std::invalid_argument("depth must be >= 0");
  std::vector<std::vector<int>> nbrs;
  nbrs.emplace_back();
  std::vector<int> frontier = {0};
  for (int level = 0; level < depth; ++level) {
    std::vector<int> next;
    for (int parent : frontier) {
      for (int c = 0; c < branching; ++c) {
        const int child = static_cast<int>(nbrs.size());
        nbrs.emplace_back();
        nbrs[parent].push_back(child);
        nbrs[child].push_back(parent);
        next.push_back(child);
      }
    }
    frontier = std::move(next);
  }
  const int n = static_cast<int>(nbrs.size());
  return Graph(n, std::move(nbrs));
}

enum class LatticeOrientation { undirected, outward, perturbed };

namespace detail {

// Deterministic spiral enumeration of the L1 ball: origin first, then rings
// by L1 radius, counterclockwise starting from (rho, 0).
inline std::vector<std::array<int, 2>> spiral_l1_ball(int radius) {
  std::vector<std::array<int, 2>> pts;
  pts.push_back({0, 0});
  for (int rho = 1; rho <= radius; ++rho) {
    int x = rho, y = 0;
    const std::array<std::array<int, 2>, 4> dirs = {{{-1, 1}, {-1, -1}, {1, -1}, {1, 1}}};
    for (const auto& d : dirs) {
      for (int s = 0; s < rho; ++s) {
        pts.push_back({x, y});
        x += d[0];
        y += d[1];
      }
    }
  }
  return pts;
}

inline int sgn(int v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); }

}  // namespace detail

// L1-ball lattice of the given radius. Orientations:
//  - undirected: N_i = {i +- (1,0), i +- (0,1)} inside the ball;
//  - outward:    N_i = {i + e1 (1,0), i + e2 (0,1)} with e = sgn of the
//    coordinate; a zero coordinate takes the sign of the other one (so the
//    half-axes point +1 on the positive side, -1 on the negative side) and
//    the origin keeps all four neighbors;
//  - perturbed:  outward, except the column (-1, m) for m >= 1 reads
//    {(0, m), (-1, m-1)}, with the single exception m == h which reads
//    {(-2, h), (-1, h-1)}.
inline Graph build_lattice(int radius, LatticeOrientation orientation, int h = 0) {
  if (radius < 1) throw std::invalid_argument("lattice radius must be >= 1");
  if (orientation == LatticeOrientation::perturbed && (h < 1 || h > radius))
    throw std::invalid_argument("perturbed lattice needs 1 <= h <= radius");

  const auto labels = detail::spiral_l1_ball(radius);
  const int n = static_cast<int>(labels.size());
  std::map<std::array<int, 2>, int> index;
  for (int i = 0; i < n; ++i) index[labels[i]] = i;
  const auto inside = [&](std::array<int, 2> p) { return index.count(p) > 0; };

  std::vector<std::vector<int>> nbrs(n);
  for (int i = 0; i < n; ++i) {
    const int a = labels[i][0], b = labels[i][1];
    std::vector<std::array<int, 2>> cand;
    if (orientation == LatticeOrientation::undirected) {
      cand = {{a + 1, b}, {a - 1, b}, {a, b + 1}, {a, b - 1}};
    } else if (orientation == LatticeOrientation::perturbed && a == -1 && b >= 1) {
      if (b == h)
        cand = {{-2, h}, {-1, h - 1}};
      else
        cand = {{0, b}, {-1, b - 1}};
    } else {
      if (a == 0 && b == 0) {
        cand = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
      } else {
        const int e1 = (a != 0) ? detail::sgn(a) : detail::sgn(b);
        const int e2 = (b != 0) ? detail::sgn(b) : detail::sgn(a);
        cand = {{a + e1, b}, {a, b + e2}};
      }
    }
    for (const auto& p : cand)
      if (inside(p)) nbrs[i].push_back(index[p]);
  }
  return Graph(n, std::move(nbrs), labels);
}

// (n_i, n-check_i): how many states player i reads, and how many players
// read player i.
inline std::pair<std::vector<int>, std::vector<int>> degrees(const Graph& g) {
  return {g.in_degrees(), g.out_degrees()};
}

}  // namespace sparsegame
