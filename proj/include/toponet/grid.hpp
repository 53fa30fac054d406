#pragma once

// Dense 2D containers, 3x3 pooling with replicate padding, and connected
// component labeling. Everything else in the library is built on these.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "toponet/error.hpp"

namespace toponet {

struct PixelCoord {
  std::int32_t row = 0;
  std::int32_t col = 0;

  friend auto operator<=>(const PixelCoord&, const PixelCoord&) = default;
};

enum class Connectivity : int { Four = 4, Eight = 8 };

inline std::string shape_string(std::size_t h, std::size_t w) {
  return std::to_string(h) + "x" + std::to_string(w);
}

/// Row-major H x W grid of values.
template <typename T>
class Grid {
public:
  using value_type = T;

  Grid() = default;

  Grid(std::size_t height, std::size_t width, T fill = T{})
      : height_(height), width_(width), data_(height * width, fill) {}

  Grid(std::size_t height, std::size_t width, std::vector<T> data)
      : height_(height), width_(width), data_(std::move(data)) {
    if (data_.size() != height_ * width_) {
      throw ShapeError("grid payload has " + std::to_string(data_.size()) +
                       " values, expected " + std::to_string(height_ * width_));
    }
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * width_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * width_ + c]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  PixelCoord coord(std::size_t index) const {
    return {static_cast<std::int32_t>(index / width_), static_cast<std::int32_t>(index % width_)};
  }
  std::size_t index(PixelCoord p) const {
    return static_cast<std::size_t>(p.row) * width_ + static_cast<std::size_t>(p.col);
  }

  bool same_shape(const Grid& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<T> data_;
};

using RealGrid = Grid<double>;
using BinaryGrid = Grid<std::uint8_t>;

template <typename A, typename B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a.height(), a.width()) +
                     " vs " + shape_string(b.height(), b.width()));
  }
}

/// Per-category likelihoods in [0,1]; category-major planes, row-major within.
class LikelihoodMap {
public:
  LikelihoodMap() = default;

  LikelihoodMap(std::size_t categories, std::size_t height, std::size_t width,
                std::vector<double> data)
      : categories_(categories), height_(height), width_(width), data_(std::move(data)) {
    if (categories_ < 1 || height_ < 1 || width_ < 1) {
      throw ShapeError("likelihood map needs at least one category, row and column");
    }
    if (data_.size() != categories_ * height_ * width_) {
      throw ShapeError("likelihood map payload size does not match " +
                       std::to_string(categories_) + "x" + shape_string(height_, width_));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
      const double v = data_[i];
      if (!(v >= 0.0 && v <= 1.0)) {
        throw RangeError("likelihood value " + std::to_string(v) + " at flat index " +
                         std::to_string(i) + " outside [0,1]");
      }
    }
  }

  /// Stacks single-category planes; all planes must share one shape.
  static LikelihoodMap from_channels(std::span<const RealGrid> channels) {
    if (channels.empty()) throw ShapeError("likelihood map needs at least one category");
    std::vector<double> data;
    data.reserve(channels.size() * channels[0].size());
    for (const auto& ch : channels) {
      require_same_shape(ch, channels[0], "from_channels");
      data.insert(data.end(), ch.values().begin(), ch.values().end());
    }
    return {channels.size(), channels[0].height(), channels[0].width(), std::move(data)};
  }

  std::size_t categories() const noexcept { return categories_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t plane_size() const noexcept { return height_ * width_; }

  double at(std::size_t category, std::size_t r, std::size_t c) const {
    return data_[(category * height_ + r) * width_ + c];
  }

  std::span<const double> plane(std::size_t category) const {
    return std::span<const double>(data_).subspan(category * plane_size(), plane_size());
  }

  /// Copy of category plane `category` (0-based).
  RealGrid channel(std::size_t category) const {
    auto p = plane(category);
    return RealGrid(height_, width_, std::vector<double>(p.begin(), p.end()));
  }

  const std::vector<double>& values() const noexcept { return data_; }

  friend bool operator==(const LikelihoodMap&, const LikelihoodMap&) = default;

private:
  std::size_t categories_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

/// Integer ground truth; 0 is background, 1..categories are landmark classes.
class LabelMask {
public:
  LabelMask() = default;

  LabelMask(std::size_t categories, Grid<std::uint8_t> labels)
      : categories_(categories), labels_(std::move(labels)) {
    if (categories_ < 1 || categories_ > 255) {
      throw RangeError("label mask category count must be in 1..255");
    }
    if (labels_.height() < 1 || labels_.width() < 1) {
      throw ShapeError("label mask needs at least one row and column");
    }
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i] > categories_) {
        throw RangeError("label " + std::to_string(labels_[i]) + " exceeds declared category count " +
                         std::to_string(categories_));
      }
    }
  }

  LabelMask(std::size_t categories, std::size_t height, std::size_t width,
            std::vector<std::uint8_t> labels)
      : LabelMask(categories, Grid<std::uint8_t>(height, width, std::move(labels))) {}

  std::size_t categories() const noexcept { return categories_; }
  std::size_t height() const noexcept { return labels_.height(); }
  std::size_t width() const noexcept { return labels_.width(); }
  const Grid<std::uint8_t>& labels() const noexcept { return labels_; }
  std::uint8_t operator()(std::size_t r, std::size_t c) const { return labels_(r, c); }

  /// 0/1 indicator of `category` (1-based; 0 selects background).
  BinaryGrid indicator(std::size_t category) const {
    BinaryGrid out(height(), width());
    for (std::size_t i = 0; i < labels_.size(); ++i) out[i] = labels_[i] == category ? 1 : 0;
    return out;
  }

  RealGrid real_indicator(std::size_t category) const {
    RealGrid out(height(), width());
    for (std::size_t i = 0; i < labels_.size(); ++i) out[i] = labels_[i] == category ? 1.0 : 0.0;
    return out;
  }

  friend bool operator==(const LabelMask&, const LabelMask&) = default;

private:
  std::size_t categories_ = 0;
  Grid<std::uint8_t> labels_;
};

/// One-hot likelihoods of a mask: plane l-1 is the indicator of label l.
inline LikelihoodMap one_hot(const LabelMask& mask) {
  std::vector<double> data;
  data.reserve(mask.categories() * mask.labels().size());
  for (std::size_t l = 1; l <= mask.categories(); ++l) {
    for (auto v : mask.labels().values()) data.push_back(v == l ? 1.0 : 0.0);
  }
  return {mask.categories(), mask.height(), mask.width(), std::move(data)};
}

/// C x H x W real feature tensor.
class FeatureMap {
public:
  FeatureMap() = default;

  FeatureMap(std::size_t channels, std::size_t height, std::size_t width, double fill = 0.0)
      : channels_(channels), height_(height), width_(width),
        data_(channels * height * width, fill) {
    check_finite();
  }

  FeatureMap(std::size_t channels, std::size_t height, std::size_t width, std::vector<double> data)
      : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
    if (data_.size() != channels_ * height_ * width_) {
      throw ShapeError("feature map payload size does not match " + std::to_string(channels_) +
                       "x" + shape_string(height_, width_));
    }
    check_finite();
  }

  std::size_t channels() const noexcept { return channels_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t plane_size() const noexcept { return height_ * width_; }

  double& operator()(std::size_t c, std::size_t r, std::size_t col) {
    return data_[(c * height_ + r) * width_ + col];
  }
  double operator()(std::size_t c, std::size_t r, std::size_t col) const {
    return data_[(c * height_ + r) * width_ + col];
  }

  RealGrid channel(std::size_t c) const {
    auto first = data_.begin() + static_cast<std::ptrdiff_t>(c * plane_size());
    return RealGrid(height_, width_, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(plane_size())));
  }

  const std::vector<double>& values() const noexcept { return data_; }

  bool same_shape(const FeatureMap& o) const {
    return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
  }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

private:
  void check_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) throw RangeError("feature map contains a non-finite value");
    }
  }

  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Pooling. Windows are 3x3 with replicate (edge-clamp) padding, so the output
// has the input's shape and constant regions stay constant up to the border.

namespace detail {

inline std::size_t clamp_index(std::ptrdiff_t i, std::size_t n) {
  if (i < 0) return 0;
  if (i >= static_cast<std::ptrdiff_t>(n)) return n - 1;
  return static_cast<std::size_t>(i);
}

template <typename T, typename Pick>
Grid<T> extremum_pool(const Grid<T>& in, Pick better) {
  const std::size_t h = in.height(), w = in.width();
  Grid<T> out(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t r0 = clamp_index(static_cast<std::ptrdiff_t>(r) - 1, h);
    const std::size_t r1 = clamp_index(static_cast<std::ptrdiff_t>(r) + 1, h);
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t c0 = clamp_index(static_cast<std::ptrdiff_t>(c) - 1, w);
      const std::size_t c1 = clamp_index(static_cast<std::ptrdiff_t>(c) + 1, w);
      T best = in(r0, c0);
      for (std::size_t rr = r0; rr <= r1; ++rr)
        for (std::size_t cc = c0; cc <= c1; ++cc)
          if (better(in(rr, cc), best)) best = in(rr, cc);
      out(r, c) = best;
    }
  }
  return out;
}

}  // namespace detail

template <typename T>
Grid<T> avg_pool_3x3(const Grid<T>& in) {
  const std::size_t h = in.height(), w = in.width();
  Grid<T> out(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      // offsets from the centre keep constant windows exact
      const T centre = in(r, c);
      T sum{};
      for (int dr = -1; dr <= 1; ++dr) {
        const auto rr = detail::clamp_index(static_cast<std::ptrdiff_t>(r) + dr, h);
        for (int dc = -1; dc <= 1; ++dc) {
          sum += in(rr, detail::clamp_index(static_cast<std::ptrdiff_t>(c) + dc, w)) - centre;
        }
      }
      out(r, c) = centre + sum / T(9);
    }
  }
  return out;
}

template <typename T>
Grid<T> max_pool_3x3(const Grid<T>& in) {
  return detail::extremum_pool(in, [](const T& a, const T& b) { return a > b; });
}

template <typename T>
Grid<T> min_pool_3x3(const Grid<T>& in) {
  return detail::extremum_pool(in, [](const T& a, const T& b) { return a < b; });
}

/// Flat index of the pixel that realises the 3x3 max (or min) at every
/// position. Ties go to the smallest row-major index. Used to route
/// pooling subgradients.
template <typename T>
Grid<std::uint32_t> pool_argext_3x3(const Grid<T>& in, bool take_max) {
  const std::size_t h = in.height(), w = in.width();
  Grid<std::uint32_t> out(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t r0 = detail::clamp_index(static_cast<std::ptrdiff_t>(r) - 1, h);
    const std::size_t r1 = detail::clamp_index(static_cast<std::ptrdiff_t>(r) + 1, h);
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t c0 = detail::clamp_index(static_cast<std::ptrdiff_t>(c) - 1, w);
      const std::size_t c1 = detail::clamp_index(static_cast<std::ptrdiff_t>(c) + 1, w);
      std::size_t best = r0 * w + c0;
      // row-major scan with strict comparison keeps the first extremum
      for (std::size_t rr = r0; rr <= r1; ++rr) {
        for (std::size_t cc = c0; cc <= c1; ++cc) {
          const std::size_t i = rr * w + cc;
          if (take_max ? in[i] > in[best] : in[i] < in[best]) best = i;
        }
      }
      out(r, c) = static_cast<std::uint32_t>(best);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Connected components

struct Components {
  Grid<std::int32_t> labels;  // 0 = background, 1..count otherwise
  std::int32_t count = 0;
};

/// Neighbour offsets (dr, dc) for the given adjacency.
inline std::span<const std::pair<int, int>> neighbor_offsets(Connectivity conn) {
  static constexpr std::pair<int, int> four[] = {{-1, 0}, {0, -1}, {0, 1}, {1, 0}};
  static constexpr std::pair<int, int> eight[] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1},
                                                  {0, 1},   {1, -1}, {1, 0},  {1, 1}};
  if (conn == Connectivity::Eight) return eight;
  return four;
}

/// Labels components of a 0/1 grid. Labels are assigned in the order in
/// which a row-major scan first meets each component.
inline Components connected_components(const BinaryGrid& indicator,
                                       Connectivity conn = Connectivity::Four) {
  const std::size_t h = indicator.height(), w = indicator.width();
  Components out{Grid<std::int32_t>(h, w, 0), 0};
  std::vector<std::size_t> stack;
  const auto offsets = neighbor_offsets(conn);
  for (std::size_t start = 0; start < indicator.size(); ++start) {
    if (!indicator[start] || out.labels[start] != 0) continue;
    const std::int32_t label = ++out.count;
    out.labels[start] = label;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const auto r = static_cast<std::ptrdiff_t>(i / w), c = static_cast<std::ptrdiff_t>(i % w);
      for (auto [dr, dc] : offsets) {
        const auto rr = r + dr, cc = c + dc;
        if (rr < 0 || cc < 0 || rr >= static_cast<std::ptrdiff_t>(h) ||
            cc >= static_cast<std::ptrdiff_t>(w))
          continue;
        const std::size_t j = static_cast<std::size_t>(rr) * w + static_cast<std::size_t>(cc);
        if (indicator[j] && out.labels[j] == 0) {
          out.labels[j] = label;
          stack.push_back(j);
        }
      }
    }
  }
  return out;
}

}  // namespace toponet
