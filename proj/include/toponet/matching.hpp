#pragma once

// Induced matching of 0-dimensional barcodes through a comparison image.
//
// With Z = min(Y, G), every Z bar born at pixel p with value b is sent into
// each of Y and G by looking up the component of {target >= b} that contains
// p and taking the bar of that component's elder. When several Z bars land
// on one target bar, the most persistent one keeps it. A prediction bar and
// a ground-truth bar are matched when the same Z bar reaches both.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "toponet/error.hpp"
#include "toponet/grid.hpp"
#include "toponet/persistence.hpp"

namespace toponet {

struct Matching {
  std::vector<std::pair<Bar, Bar>> matched;  // (prediction, ground truth)
  std::vector<Bar> unmatched_pred;
  std::vector<Bar> unmatched_gt;

  std::size_t n_matched() const noexcept { return matched.size(); }
  std::size_t n_unmatched() const noexcept { return unmatched_pred.size(); }
};

inline RealGrid comparison_map(const RealGrid& pred, const RealGrid& gt_indicator) {
  require_same_shape(pred, gt_indicator, "comparison_map");
  RealGrid z(pred.height(), pred.width());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = std::min(pred[i], gt_indicator[i]);
  return z;
}

/// Index into `target_bars` for each bar of `z_bars` (nullopt = unassigned).
inline std::vector<std::optional<std::size_t>> induced_assignment(const RealGrid& z_map,
                                                                  const Barcode& z_bars,
                                                                  const RealGrid& target_map,
                                                                  const Barcode& target_bars,
                                                                  Connectivity conn = Connectivity::Four) {
  require_same_shape(z_map, target_map, "induced_assignment");
  for (std::size_t i = 0; i < z_map.size(); ++i) {
    if (z_map[i] > target_map[i]) {
      const auto p = z_map.coord(i);
      throw ArgumentError("induced_assignment: comparison map exceeds target at (" +
                          std::to_string(p.row) + "," + std::to_string(p.col) + ")");
    }
  }

  std::vector<std::int64_t> bar_of_pixel(target_map.size(), -1);
  for (std::size_t k = 0; k < target_bars.size(); ++k) {
    bar_of_pixel[target_map.index(target_bars[k].birth_pixel)] = static_cast<std::int64_t>(k);
  }

  std::vector<std::size_t> queries(z_bars.size());
  std::iota(queries.begin(), queries.end(), std::size_t{0});
  std::stable_sort(queries.begin(), queries.end(),
                   [&](std::size_t a, std::size_t b) { return z_bars[a].birth > z_bars[b].birth; });

  std::vector<std::optional<std::size_t>> raw(z_bars.size());
  SuperlevelSweep sweep(target_map, conn);
  for (std::size_t q : queries) {
    const double threshold = z_bars[q].birth;
    while (!sweep.done() && sweep.next_value() >= threshold) sweep.step();
    const auto p = static_cast<std::uint32_t>(target_map.index(z_bars[q].birth_pixel));
    if (!sweep.active(p)) continue;
    const std::int64_t k = bar_of_pixel[sweep.elder_of(p)];
    if (k >= 0) raw[q] = static_cast<std::size_t>(k);
  }

  // keep one z bar per target bar: largest persistence, then row-major birth pixel
  std::vector<std::int64_t> keeper(target_bars.size(), -1);
  for (std::size_t q = 0; q < z_bars.size(); ++q) {
    if (!raw[q]) continue;
    auto& cur = keeper[*raw[q]];
    if (cur < 0) {
      cur = static_cast<std::int64_t>(q);
      continue;
    }
    const Bar& a = z_bars[q];
    const Bar& b = z_bars[static_cast<std::size_t>(cur)];
    if (a.persistence() > b.persistence() ||
        (a.persistence() == b.persistence() && a.birth_pixel < b.birth_pixel)) {
      cur = static_cast<std::int64_t>(q);
    }
  }
  std::vector<std::optional<std::size_t>> out(z_bars.size());
  for (std::size_t k = 0; k < keeper.size(); ++k) {
    if (keeper[k] >= 0) out[static_cast<std::size_t>(keeper[k])] = k;
  }
  return out;
}

/// Matching between the barcode of `pred_channel` and that of the
/// indicator of `category` (1-based) in `mask`.
inline Matching betti_match(const RealGrid& pred_channel, const LabelMask& mask, std::size_t category,
                            Connectivity conn = Connectivity::Four) {
  require_category(mask, category);
  const RealGrid gt = mask.real_indicator(category);
  require_same_shape(pred_channel, gt, "betti_match");
  const RealGrid z = comparison_map(pred_channel, gt);

  const Barcode pred_bars = superlevel_barcode(pred_channel, conn);
  const Barcode gt_bars = superlevel_barcode(gt, conn);
  const Barcode z_bars = superlevel_barcode(z, conn);
  const auto to_pred = induced_assignment(z, z_bars, pred_channel, pred_bars, conn);
  const auto to_gt = induced_assignment(z, z_bars, gt, gt_bars, conn);

  std::vector<std::int64_t> gt_for_pred(pred_bars.size(), -1);
  std::vector<bool> gt_used(gt_bars.size(), false);
  for (std::size_t q = 0; q < z_bars.size(); ++q) {
    if (to_pred[q] && to_gt[q]) {
      gt_for_pred[*to_pred[q]] = static_cast<std::int64_t>(*to_gt[q]);
      gt_used[*to_gt[q]] = true;
    }
  }

  Matching m;
  for (std::size_t k = 0; k < pred_bars.size(); ++k) {
    if (gt_for_pred[k] >= 0) {
      m.matched.emplace_back(pred_bars[k], gt_bars[static_cast<std::size_t>(gt_for_pred[k])]);
    } else {
      m.unmatched_pred.push_back(pred_bars[k]);
    }
  }
  for (std::size_t k = 0; k < gt_bars.size(); ++k) {
    if (!gt_used[k]) m.unmatched_gt.push_back(gt_bars[k]);
  }
  return m;
}

}  // namespace toponet
