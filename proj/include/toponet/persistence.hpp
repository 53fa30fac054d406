#pragma once

// 0-dimensional persistent homology of a single-category map under the
// superlevel filtration {v >= t}, t descending.
//
// Pixels with v > 0 are swept in (value desc, row-major index asc) order and
// merged with a union-find whose root is always the component's elder, the
// first pixel of the sweep order it contains. On a merge the younger
// component dies at the current pixel. Components alive after the last
// positive pixel are essential and die at 0.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "toponet/error.hpp"
#include "toponet/grid.hpp"

namespace toponet {

struct Bar {
  double birth = 0.0;
  double death = 0.0;
  PixelCoord birth_pixel;
  std::optional<PixelCoord> death_pixel;  // empty for essential bars
  bool essential = false;

  double persistence() const noexcept { return birth - death; }

  friend bool operator==(const Bar&, const Bar&) = default;
};

using Barcode = std::vector<Bar>;

/// Canonical order: birth desc, persistence desc, birth pixel row-major.
inline bool bar_order(const Bar& a, const Bar& b) {
  if (a.birth != b.birth) return a.birth > b.birth;
  if (a.persistence() != b.persistence()) return a.persistence() > b.persistence();
  return a.birth_pixel < b.birth_pixel;
}

inline void sort_barcode(Barcode& bars) { std::stable_sort(bars.begin(), bars.end(), bar_order); }

namespace detail {

/// Indices of positive pixels by (value desc, index asc). For positive
/// doubles the IEEE bit pattern is monotone in the value, so a stable LSD
/// radix sort on the complemented bits gives the order without comparisons.
inline std::vector<std::uint32_t> sweep_order(const RealGrid& values) {
  struct Item {
    std::uint64_t key;
    std::uint32_t index;
  };
  std::vector<Item> items, scratch;
  items.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] > 0.0) items.push_back({~std::bit_cast<std::uint64_t>(values[i]), static_cast<std::uint32_t>(i)});
  }
  scratch.resize(items.size());
  constexpr int kBits = 16;
  constexpr std::size_t kBuckets = std::size_t{1} << kBits;
  std::vector<std::size_t> count(kBuckets);
  for (int shift = 0; shift < 64; shift += kBits) {
    std::fill(count.begin(), count.end(), 0);
    for (const Item& it : items) ++count[(it.key >> shift) & (kBuckets - 1)];
    if (count[(items.empty() ? 0 : items[0].key >> shift) & (kBuckets - 1)] == items.size()) continue;
    std::size_t total = 0;
    for (auto& c : count) total += std::exchange(c, total);
    for (const Item& it : items) scratch[count[(it.key >> shift) & (kBuckets - 1)]++] = it;
    items.swap(scratch);
  }
  std::vector<std::uint32_t> order(items.size());
  for (std::size_t k = 0; k < items.size(); ++k) order[k] = items[k].index;
  return order;
}

}  // namespace detail

/// Incremental union-find over the superlevel sweep of one grid. Exposed so
/// that matching can query component elders at intermediate thresholds.
class SuperlevelSweep {
public:
  static constexpr std::int32_t kInactive = -1;

  SuperlevelSweep(const RealGrid& values, Connectivity conn)
      : values_(values), offsets_(neighbor_offsets(conn)),
        parent_(values.size(), kInactive), rank_(values.size(), 0) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(values[i])) throw RangeError("persistence input contains a non-finite value");
    }
    order_ = detail::sweep_order(values);
    for (std::size_t k = 0; k < order_.size(); ++k) rank_[order_[k]] = static_cast<std::uint32_t>(k);
  }

  bool done() const noexcept { return next_ >= order_.size(); }
  double next_value() const { return values_[order_[next_]]; }

  /// True if pixel `a` precedes pixel `b` in the sweep.
  /// Both pixels must be positive.
  bool older(std::uint32_t a, std::uint32_t b) const { return rank_[a] < rank_[b]; }

  bool active(std::uint32_t i) const { return parent_[i] != kInactive; }

  /// Elder pixel of the component containing active pixel `i`.
  std::uint32_t elder_of(std::uint32_t i) { return find(i); }

  /// Activates the next pixel; `on_death(dying_elder, merge_pixel)` fires for
  /// every component absorbed into an older one.
  template <typename OnDeath>
  void step(OnDeath&& on_death) {
    const std::uint32_t p = order_[next_++];
    parent_[p] = static_cast<std::int32_t>(p);
    const auto w = static_cast<std::ptrdiff_t>(values_.width());
    const auto h = static_cast<std::ptrdiff_t>(values_.height());
    const auto r = static_cast<std::ptrdiff_t>(p) / w, c = static_cast<std::ptrdiff_t>(p) % w;
    for (auto [dr, dc] : offsets_) {
      const auto rr = r + dr, cc = c + dc;
      if (rr < 0 || cc < 0 || rr >= h || cc >= w) continue;
      const auto q = static_cast<std::uint32_t>(rr * w + cc);
      if (!active(q)) continue;
      std::uint32_t a = find(p), b = find(q);
      if (a == b) continue;
      if (older(b, a)) std::swap(a, b);
      on_death(b, p);
      parent_[b] = static_cast<std::int32_t>(a);
    }
  }

  void step() {
    step([](std::uint32_t, std::uint32_t) {});
  }

  /// Elders of all components alive now, in sweep order.
  std::vector<std::uint32_t> living_elders() {
    std::vector<std::uint32_t> out;
    for (std::size_t k = 0; k < next_; ++k) {
      const std::uint32_t i = order_[k];
      if (find(i) == i) out.push_back(i);
    }
    return out;  // already in sweep order
  }

  const RealGrid& values() const noexcept { return values_; }

private:
  std::uint32_t find(std::uint32_t i) {
    auto root = static_cast<std::uint32_t>(parent_[i]);
    while (static_cast<std::uint32_t>(parent_[root]) != root) root = static_cast<std::uint32_t>(parent_[root]);
    while (i != root) {
      const auto next = static_cast<std::uint32_t>(parent_[i]);
      parent_[i] = static_cast<std::int32_t>(root);
      i = next;
    }
    return root;
  }

  const RealGrid& values_;
  std::span<const std::pair<int, int>> offsets_;
  std::vector<std::uint32_t> order_;
  std::size_t next_ = 0;
  std::vector<std::int32_t> parent_;
  std::vector<std::uint32_t> rank_;  // position in the sweep
};

inline Barcode superlevel_barcode(const RealGrid& channel, Connectivity conn = Connectivity::Four) {
  SuperlevelSweep sweep(channel, conn);
  Barcode bars;
  while (!sweep.done()) {
    sweep.step([&](std::uint32_t dying, std::uint32_t at) {
      const double birth = channel[dying], death = channel[at];
      if (birth > death) {
        bars.push_back({birth, death, channel.coord(dying), channel.coord(at), false});
      }
    });
  }
  for (std::uint32_t e : sweep.living_elders()) {
    bars.push_back({channel[e], 0.0, channel.coord(e), std::nullopt, true});
  }
  sort_barcode(bars);
  return bars;
}

inline void require_category(const LabelMask& mask, std::size_t category) {
  if (category < 1 || category > mask.categories()) {
    throw ArgumentError("category " + std::to_string(category) + " outside 1.." +
                        std::to_string(mask.categories()));
  }
}

/// Barcode of the 0/1 indicator of `category` (1-based).
inline Barcode gt_barcode(const LabelMask& mask, std::size_t category,
                          Connectivity conn = Connectivity::Four) {
  require_category(mask, category);
  return superlevel_barcode(mask.real_indicator(category), conn);
}

}  // namespace toponet
