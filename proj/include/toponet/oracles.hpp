#pragma once

// Brute-force reference computations. These deliberately share no code
// path with the production algorithms (own flood fill, no union-find, no
// distance transform) and are used by the test suites and `verify`.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <utility>
#include <vector>

#include "toponet/grid.hpp"

namespace toponet::oracle {

/// Flood-fill labels of {pred(i)} using 4- or 8-adjacency; 0 = outside.
template <typename Pred>
std::vector<int> label_set(std::size_t h, std::size_t w, Pred inside, bool eight = false) {
  std::vector<int> lab(h * w, 0);
  int next = 0;
  std::vector<std::size_t> queue;
  for (std::size_t s = 0; s < h * w; ++s) {
    if (!inside(s) || lab[s]) continue;
    lab[s] = ++next;
    queue.assign(1, s);
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const auto r = static_cast<long>(queue[head] / w), c = static_cast<long>(queue[head] % w);
      for (long dr = -1; dr <= 1; ++dr) {
        for (long dc = -1; dc <= 1; ++dc) {
          if ((dr == 0 && dc == 0) || (!eight && dr != 0 && dc != 0)) continue;
          const long rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= static_cast<long>(h) || cc >= static_cast<long>(w)) continue;
          const auto j = static_cast<std::size_t>(rr) * w + static_cast<std::size_t>(cc);
          if (inside(j) && !lab[j]) {
            lab[j] = next;
            queue.push_back(j);
          }
        }
      }
    }
  }
  return lab;
}

/// Multiset of (birth, death) from recomputing the components of every
/// superlevel set {v >= t} over all distinct positive values t and pairing
/// births and deaths with the elder rule.
inline std::multiset<std::pair<double, double>> threshold_sweep_barcode(const RealGrid& map, bool eight = false) {
  const std::size_t h = map.height(), w = map.width(), n = map.size();
  std::vector<double> levels;
  for (std::size_t i = 0; i < n; ++i)
    if (map[i] > 0.0) levels.push_back(map[i]);
  std::sort(levels.begin(), levels.end(), std::greater<>());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  auto elder_before = [&](std::size_t a, std::size_t b) {
    return map[a] > map[b] || (map[a] == map[b] && a < b);
  };

  std::multiset<std::pair<double, double>> bars;
  std::vector<std::size_t> elders;  // one per component alive at the previous level
  for (double t : levels) {
    const auto lab = label_set(h, w, [&](std::size_t i) { return map[i] >= t; }, eight);
    const int count = *std::max_element(lab.begin(), lab.end());
    std::vector<std::vector<std::size_t>> inherited(static_cast<std::size_t>(count) + 1);
    for (std::size_t e : elders) inherited[static_cast<std::size_t>(lab[e])].push_back(e);
    std::vector<std::size_t> next;
    for (int c = 1; c <= count; ++c) {
      auto& olds = inherited[static_cast<std::size_t>(c)];
      if (olds.empty()) {
        std::size_t best = n;
        for (std::size_t i = 0; i < n; ++i)
          if (lab[i] == c && (best == n || elder_before(i, best))) best = i;
        next.push_back(best);  // born at t
        continue;
      }
      std::sort(olds.begin(), olds.end(), elder_before);
      next.push_back(olds[0]);
      for (std::size_t k = 1; k < olds.size(); ++k) {
        if (map[olds[k]] > t) bars.emplace(map[olds[k]], t);
      }
    }
    elders = std::move(next);
  }
  for (std::size_t e : elders) bars.emplace(map[e], 0.0);
  return bars;
}

/// Mean over both foregrounds of the Euclidean distance to the nearest
/// pixel of the other foreground, by exhaustive search.
inline double brute_force_assd(const BinaryGrid& p, const BinaryGrid& g) {
  std::vector<std::pair<long, long>> ps, gs;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i]) ps.emplace_back(static_cast<long>(i / p.width()), static_cast<long>(i % p.width()));
    if (g[i]) gs.emplace_back(static_cast<long>(i / g.width()), static_cast<long>(i % g.width()));
  }
  if (ps.empty() || gs.empty()) return std::numeric_limits<double>::quiet_NaN();
  auto nearest = [](std::pair<long, long> a, const std::vector<std::pair<long, long>>& set) {
    long best = std::numeric_limits<long>::max();
    for (auto b : set) {
      const long dr = a.first - b.first, dc = a.second - b.second;
      best = std::min(best, dr * dr + dc * dc);
    }
    return std::sqrt(static_cast<double>(best));
  };
  double sum = 0.0;
  for (auto a : ps) sum += nearest(a, gs);
  for (auto b : gs) sum += nearest(b, ps);
  return sum / static_cast<double>(ps.size() + gs.size());
}

/// Pairs (prediction component, ground-truth component) that share at
/// least one pixel, with components of {pred >= threshold} and {gt = 1}.
/// Component ids are the flood-fill labels returned alongside.
struct OverlapMatch {
  std::vector<int> pred_labels;
  std::vector<int> gt_labels;
  std::set<std::pair<int, int>> pairs;
};

inline OverlapMatch overlap_matcher(const RealGrid& pred, const BinaryGrid& gt, double threshold = 0.5) {
  OverlapMatch m;
  m.pred_labels = label_set(pred.height(), pred.width(), [&](std::size_t i) { return pred[i] >= threshold; });
  m.gt_labels = label_set(gt.height(), gt.width(), [&](std::size_t i) { return gt[i] != 0; });
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (m.pred_labels[i] && m.gt_labels[i]) m.pairs.emplace(m.pred_labels[i], m.gt_labels[i]);
  }
  return m;
}

}  // namespace toponet::oracle
