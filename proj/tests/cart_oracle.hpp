#pragma once

// Brute-force CART used as a reference for single-tree fits without bootstrap.
// Works directly on raw feature values with double-precision Gini.

#include <algorithm>
#include <cmath>
#include <vector>

#include "advise/forest.hpp"

namespace testutil {

struct CartOracle {
  const advise::FeatureMatrix& x;
  const std::vector<int>& y;
  int min_split;
  int min_leaf;
  int max_depth;  // < 0: unbounded
  std::vector<advise::TreeNode> nodes;

  static double gini_of(double pos, double n) {
    const double p = pos / n;
    return 1.0 - p * p - (1.0 - p) * (1.0 - p);
  }

  std::vector<advise::TreeNode> fit() {
    std::vector<std::size_t> rows(x.rows());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    nodes.assign(1, {});
    grow(0, rows, 0);
    return nodes;
  }

  void grow(std::size_t id, const std::vector<std::size_t>& rows, int depth) {
    long n = static_cast<long>(rows.size()), pos = 0;
    for (auto r : rows) pos += y[r];
    nodes[id].n_samples = n;
    nodes[id].n_positive = pos;
    nodes[id].value = static_cast<double>(pos) / static_cast<double>(n);
    if (n < min_split || (max_depth >= 0 && depth >= max_depth) || pos == 0 || pos == n) return;

    bool found = false;
    double best_imp = 0, best_thr = 0;
    int best_f = -1;
    for (std::size_t f = 0; f < x.cols(); ++f) {
      std::vector<double> vals;
      for (auto r : rows) vals.push_back(x.at(r, f));
      std::sort(vals.begin(), vals.end());
      vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
      for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
        double nl = 0, pl = 0;
        for (auto r : rows) {
          if (x.at(r, f) <= vals[k]) {
            nl += 1;
            pl += y[r];
          }
        }
        const double nr = n - nl, pr = pos - pl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double imp = (nl * gini_of(pl, nl) + nr * gini_of(pr, nr)) / n;
        // Scanning features then thresholds in increasing order, a strict
        // improvement beyond the tolerance is needed to displace a tie.
        if (!found || imp < best_imp - 1e-12) {
          found = true;
          best_imp = imp;
          best_f = static_cast<int>(f);
          double thr = vals[k] + (vals[k + 1] - vals[k]) / 2.0;
          if (thr >= vals[k + 1]) thr = vals[k];
          best_thr = thr;
        }
      }
    }
    if (!found) return;
    std::vector<std::size_t> left, right;
    for (auto r : rows) (x.at(r, static_cast<std::size_t>(best_f)) <= best_thr ? left : right).push_back(r);
    const auto l = nodes.size();
    nodes.emplace_back();
    nodes.emplace_back();
    nodes[id].feature = best_f;
    nodes[id].threshold = best_thr;
    nodes[id].left = static_cast<int>(l);
    nodes[id].right = static_cast<int>(l + 1);
    grow(l, left, depth + 1);
    grow(l + 1, right, depth + 1);
  }
};

/// Random small-integer features (with duplicates and a constant column) and
/// labels loosely tied to the first two columns.
inline void oracle_toy_set(std::uint64_t seed, std::size_t n_rows, advise::FeatureMatrix& x, std::vector<int>& y) {
  advise::Rng rng{advise::RngSeed(seed).derive("toy")};
  x = advise::FeatureMatrix();
  y.clear();
  for (std::size_t r = 0; r < n_rows; ++r) {
    const double a = static_cast<double>(rng.below(6));
    const double b = static_cast<double>(rng.below(20)) / 4.0;
    const double c = rng.uniform();
    const double row[5] = {a, b, 7.0, c, static_cast<double>(rng.below(2))};
    x.push_row(row);
    const double p = 0.15 + 0.12 * a + (b > 2.5 ? 0.2 : 0.0);
    y.push_back(rng.bernoulli(std::min(p, 0.95)) ? 1 : 0);
  }
}

}  // namespace testutil
