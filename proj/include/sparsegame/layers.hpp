#pragma once

// Layered neighborhoods around a root player and the counts N_k^h that
// drive the decay recursions.
//
// Layer 0 is {root}; layer k is the set reached by expanding the neighbor
// lists of layer k-1 minus everything seen before. h_star is the first
// empty layer. N_k^h counts the layer-h players whose neighbor list
// contains k. Unreachable vertices carry no layer and every N_k^h
// referencing them is 0.

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "sparsegame/graph.hpp"

namespace sparsegame {

class NkhTable {
 public:
  NkhTable(const Graph& g, int root) : root_(root), n_(g.num_vertices()) {
    if (root < 0 || root >= g.num_vertices())
      throw std::invalid_argument("root out of range");
    layer_of_.assign(n_, -1);
    layer_of_[root] = 0;
    std::vector<int> frontier = {root};
    layers_.push_back(frontier);
    while (!frontier.empty()) {
      std::vector<int> next;
      for (int j : frontier) {
        for (int k : g.in_neighbors(j)) {
          if (layer_of_[k] < 0) {
            layer_of_[k] = static_cast<int>(layers_.size());
            next.push_back(k);
          }
        }
      }
      std::sort(next.begin(), next.end());
      if (next.empty()) break;
      layers_.push_back(next);
      frontier = std::move(next);
    }
    h_star_ = static_cast<int>(layers_.size());

    counts_.assign(static_cast<size_t>(n_) * h_star_, 0);
    for (int h = 0; h < h_star_; ++h)
      for (int j : layers_[h])
        for (int k : g.in_neighbors(j)) ++counts_[static_cast<size_t>(k) * h_star_ + h];

    layer_sup_.assign(static_cast<size_t>(h_star_) * h_star_, 0);
    for (int i = 0; i < h_star_; ++i)
      for (int k : layers_[i])
        for (int h = 0; h < h_star_; ++h) {
          int& s = layer_sup_[static_cast<size_t>(i) * h_star_ + h];
          s = std::max(s, count(k, h));
        }
  }

  int root() const { return root_; }
  int num_vertices() const { return n_; }

  // First h with an empty layer.
  int h_star() const { return h_star_; }

  const std::vector<std::vector<int>>& layers() const { return layers_; }
  const std::vector<int>& layer(int h) const {
    static const std::vector<int> empty;
    return (h >= 0 && h < h_star_) ? layers_[h] : empty;
  }

  // -1 when the vertex is unreachable from the root.
  int layer_of(int k) const { return layer_of_.at(k); }

  // N_k^h; 0 outside the stored range.
  int count(int k, int h) const {
    if (h < 0 || h >= h_star_ || k < 0 || k >= n_) return 0;
    return counts_[static_cast<size_t>(k) * h_star_ + h];
  }

  // sup over k in layer i of N_k^h (0 for an empty/of-range layer: the
  // recursions take sup over an empty set as 0).
  int layer_sup(int i, int h) const {
    if (i < 0 || i >= h_star_ || h < 0 || h >= h_star_) return 0;
    return layer_sup_[static_cast<size_t>(i) * h_star_ + h];
  }

 private:
  int root_;
  int n_;
  int h_star_;
  std::vector<std::vector<int>> layers_;
  std::vector<int> layer_of_;
  std::vector<int> counts_;
  std::vector<int> layer_sup_;
};

inline NkhTable nkh_table(const Graph& g, int root) { return NkhTable(g, root); }

}  // namespace sparsegame
