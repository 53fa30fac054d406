#pragma once

// Buffer-level entry points for in-process bindings. Callers describe their
// arrays with BufferView; everything is validated before any computation
// and the gradient comes back in a freshly allocated float32 buffer.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "toponet/error.hpp"
#include "toponet/grid.hpp"
#include "toponet/io.hpp"
#include "toponet/losses.hpp"
#include "toponet/metrics.hpp"

namespace toponet {

inline constexpr const char* kVersion = "1.0.0";

enum class ElementKind { Float32, UInt8 };

inline const char* to_string(ElementKind k) { return k == ElementKind::Float32 ? "float32" : "uint8"; }

struct BufferView {
  const void* data = nullptr;
  ElementKind kind = ElementKind::Float32;
  std::vector<std::size_t> shape;
  std::vector<std::ptrdiff_t> strides;  // bytes; empty = C-contiguous

  std::size_t element_size() const { return kind == ElementKind::Float32 ? 4 : 1; }

  std::size_t count() const {
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    return n;
  }

  bool contiguous() const {
    if (strides.empty()) return true;
    if (strides.size() != shape.size()) return false;
    auto expected = static_cast<std::ptrdiff_t>(element_size());
    for (std::size_t d = shape.size(); d-- > 0;) {
      if (shape[d] > 1 && strides[d] != expected) return false;
      expected *= static_cast<std::ptrdiff_t>(shape[d]);
    }
    return true;
  }
};

namespace detail {

inline void check_view(const BufferView& v, const char* field, ElementKind kind, std::size_t min_rank,
                       std::size_t max_rank) {
  const std::string f = field;
  if (v.data == nullptr) throw ArgumentError(f + ": null data pointer");
  if (v.kind != kind) {
    throw ArgumentError(f + ": expected " + to_string(kind) + " elements, got " + to_string(v.kind));
  }
  if (v.shape.size() < min_rank || v.shape.size() > max_rank) {
    throw ArgumentError(f + ": unsupported rank " + std::to_string(v.shape.size()));
  }
  for (auto s : v.shape) {
    if (s == 0) throw ArgumentError(f + ": zero-sized dimension");
  }
  if (!v.contiguous()) throw ArgumentError(f + ": buffer must be row-major contiguous");
}

inline LabelMask mask_from_view(const BufferView& v, const char* field, std::size_t categories) {
  check_view(v, field, ElementKind::UInt8, 2, 2);
  const auto* p = static_cast<const std::uint8_t*>(v.data);
  return LabelMask(categories, v.shape[0], v.shape[1], std::vector<std::uint8_t>(p, p + v.count()));
}

}  // namespace detail

struct BufferLossResult {
  LossReport report;
  std::vector<float> grad;  // (L, H, W), caller-owned
};

/// pred: float32 (L,H,W) or (H,W) with L = 1; gt: uint8 (H,W) with labels <= L.
inline BufferLossResult loss_with_grad(const BufferView& pred, const BufferView& gt, const LossOptions& opt = {}) {
  detail::check_view(pred, "pred", ElementKind::Float32, 2, 3);
  detail::check_view(gt, "gt", ElementKind::UInt8, 2, 2);
  const std::size_t cats = pred.shape.size() == 3 ? pred.shape[0] : 1;
  const std::size_t h = pred.shape[pred.shape.size() - 2], w = pred.shape.back();
  if (gt.shape[0] != h || gt.shape[1] != w) {
    throw ArgumentError("gt: shape " + shape_string(gt.shape[0], gt.shape[1]) + " does not match pred " +
                        shape_string(h, w));
  }
  opt.validate();
  const auto* p = static_cast<const float*>(pred.data);
  const LikelihoodMap map(cats, h, w, std::vector<double>(p, p + pred.count()));
  const LabelMask mask = detail::mask_from_view(gt, "gt", cats);
  auto result = total_loss(map, mask, opt);
  return {std::move(result.report), std::vector<float>(result.grad.values.begin(), result.grad.values.end())};
}

/// Per-category dsc / iou / assd of two uint8 (H,W) label buffers.
inline ImageMetrics evaluate_buffers(const BufferView& pred_mask, const BufferView& gt_mask, std::size_t categories) {
  detail::check_view(pred_mask, "pred_mask", ElementKind::UInt8, 2, 2);
  detail::check_view(gt_mask, "gt_mask", ElementKind::UInt8, 2, 2);
  if (pred_mask.shape != gt_mask.shape) throw ArgumentError("gt_mask: shape differs from pred_mask");
  return evaluate_image(detail::mask_from_view(pred_mask, "pred_mask", categories),
                        detail::mask_from_view(gt_mask, "gt_mask", categories));
}

}  // namespace toponet
