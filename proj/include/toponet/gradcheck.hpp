#pragma once

// Central-difference verification of the analytic loss gradients.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "toponet/error.hpp"
#include "toponet/grid.hpp"
#include "toponet/losses.hpp"

namespace toponet {

enum class LossComponent { Dice, Centerline, Persistence, Total };

inline const char* to_string(LossComponent c) {
  switch (c) {
    case LossComponent::Dice: return "dice";
    case LossComponent::Centerline: return "cl";
    case LossComponent::Persistence: return "per";
    case LossComponent::Total: return "total";
  }
  return "?";
}

struct Probe {
  std::size_t category = 0;  // 0-based plane
  std::size_t row = 0;
  std::size_t col = 0;
};

struct ProbeResult {
  Probe probe;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

struct FdReport {
  std::vector<ProbeResult> probes;
  double max_relative_error = 0.0;
};

/// Relative errors are |a - n| / max(|a|, |n|, kFdErrorFloor).
inline constexpr double kFdErrorFloor = 1e-6;

inline LossTerm component_value_and_grad(const LikelihoodMap& pred, const LabelMask& mask,
                                         const LossOptions& opt, LossComponent which) {
  switch (which) {
    case LossComponent::Dice: return dice_loss(pred, mask);
    case LossComponent::Centerline: return cl_loss(pred, mask, opt.skeleton_iterations);
    case LossComponent::Persistence: {
      auto p = per_loss(pred, mask, opt.connectivity);
      return {p.value, std::move(p.grad)};
    }
    case LossComponent::Total: {
      auto t = total_loss(pred, mask, opt);
      return {t.report.total, std::move(t.grad)};
    }
  }
  throw ArgumentError("unknown loss component");
}

/// Why `probe` cannot be finite-differenced with step h, or nullopt if it can.
/// A probe must stay 2h away from every other value of its plane and from
/// the ends of [0,1]; otherwise the perturbation can reorder the filtration
/// or the pooling windows and the subgradient is not unique.
inline std::optional<std::string> tie_diagnostic(const LikelihoodMap& pred, const Probe& probe, double h) {
  if (probe.category >= pred.categories() || probe.row >= pred.height() || probe.col >= pred.width()) {
    return "probe outside the map";
  }
  const auto plane = pred.plane(probe.category);
  const std::size_t at = probe.row * pred.width() + probe.col;
  const double v = plane[at];
  if (v < 2.0 * h || v > 1.0 - 2.0 * h) {
    return "value " + std::to_string(v) + " within 2h of the [0,1] bounds";
  }
  for (std::size_t i = 0; i < plane.size(); ++i) {
    if (i != at && std::abs(plane[i] - v) < 2.0 * h) {
      return "value " + std::to_string(v) + " ties pixel (" + std::to_string(i / pred.width()) + "," +
             std::to_string(i % pred.width()) + ") within 2h";
    }
  }
  return std::nullopt;
}

inline LikelihoodMap perturbed(const LikelihoodMap& pred, const Probe& p, double delta) {
  std::vector<double> v = pred.values();
  v[(p.category * pred.height() + p.row) * pred.width() + p.col] += delta;
  return {pred.categories(), pred.height(), pred.width(), std::move(v)};
}

inline FdReport finite_difference_check(const LikelihoodMap& pred, const LabelMask& mask, const LossOptions& opt,
                                        LossComponent which, const std::vector<Probe>& probes, double h = 1e-4) {
  if (!(h > 0.0)) throw ArgumentError("finite-difference step must be positive");
  for (const auto& p : probes) {
    if (auto why = tie_diagnostic(pred, p, h)) {
      throw ArgumentError("probe (" + std::to_string(p.category) + "," + std::to_string(p.row) + "," +
                          std::to_string(p.col) + ") rejected: " + *why);
    }
  }
  const LossTerm base = component_value_and_grad(pred, mask, opt, which);
  FdReport report;
  for (const auto& p : probes) {
    const double up = component_value_and_grad(perturbed(pred, p, h), mask, opt, which).value;
    const double down = component_value_and_grad(perturbed(pred, p, -h), mask, opt, which).value;
    ProbeResult r{p, base.grad.at(p.category, p.row * pred.width() + p.col), (up - down) / (2.0 * h), 0.0};
    r.relative_error = std::abs(r.analytic - r.numeric) /
                       std::max({std::abs(r.analytic), std::abs(r.numeric), kFdErrorFloor});
    report.max_relative_error = std::max(report.max_relative_error, r.relative_error);
    report.probes.push_back(r);
  }
  return report;
}

/// Up to `count` distinct tie-free probes drawn uniformly.
template <typename Rng>
std::vector<Probe> pick_tie_free_probes(const LikelihoodMap& pred, std::size_t count, double h, Rng& rng) {
  std::vector<Probe> all;
  for (std::size_t l = 0; l < pred.categories(); ++l)
    for (std::size_t r = 0; r < pred.height(); ++r)
      for (std::size_t c = 0; c < pred.width(); ++c) all.push_back({l, r, c});
  std::vector<Probe> out;
  while (out.size() < count && !all.empty()) {
    // plain modulo: std distributions differ across standard libraries
    const std::size_t k = static_cast<std::size_t>(rng() % all.size());
    if (!tie_diagnostic(pred, all[k], h)) out.push_back(all[k]);
    all[k] = all.back();
    all.pop_back();
  }
  return out;
}

}  // namespace toponet
