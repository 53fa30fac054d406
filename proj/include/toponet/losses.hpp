#pragma once

// Segmentation loss stack with analytic per-pixel gradients:
//   dice   soft Dice
//   cl     1 - mean centre-line Dice on soft skeletons
//   per    persistence loss over matched / unmatched prediction bars
//   total  weighted sum with a linear warmup on the two topology terms

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "toponet/error.hpp"
#include "toponet/grid.hpp"
#include "toponet/matching.hpp"
#include "toponet/persistence.hpp"

namespace toponet {

inline constexpr double kSmoothing = 1e-5;

/// dL/dY, laid out exactly like the LikelihoodMap it belongs to.
struct GradMap {
  std::size_t categories = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  GradMap() = default;
  GradMap(std::size_t l, std::size_t h, std::size_t w)
      : categories(l), height(h), width(w), values(l * h * w, 0.0) {}
  explicit GradMap(const LikelihoodMap& like) : GradMap(like.categories(), like.height(), like.width()) {}

  double& at(std::size_t l, std::size_t i) { return values[l * height * width + i]; }
  double at(std::size_t l, std::size_t i) const { return values[l * height * width + i]; }

  void add_scaled(const GradMap& other, double scale) {
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += scale * other.values[i];
  }
};

struct LossTerm {
  double value = 0.0;
  GradMap grad;
};

inline void require_compatible(const LikelihoodMap& pred, const LabelMask& mask) {
  if (pred.height() != mask.height() || pred.width() != mask.width()) {
    throw ShapeError("prediction " + shape_string(pred.height(), pred.width()) + " vs mask " +
                     shape_string(mask.height(), mask.width()));
  }
  if (pred.categories() != mask.categories()) {
    throw ShapeError("prediction has " + std::to_string(pred.categories()) + " categories, mask declares " +
                     std::to_string(mask.categories()));
  }
}

// ---------------------------------------------------------------------------
// Soft skeleton

namespace detail {

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

/// Intermediates of one soft-skeleton evaluation, kept for the backward pass.
/// levels[j] is the image after j erosions (j = 0..k+1); opened[j] is
/// max_pool(levels[j+1]); skel[j] is the running skeleton after level j.
struct SkeletonTape {
  std::vector<RealGrid> levels;
  std::vector<RealGrid> opened;
  std::vector<RealGrid> skel;
};

inline SkeletonTape soft_skeleton_tape(const RealGrid& prob, int iterations) {
  if (iterations < 1) throw ArgumentError("soft skeleton needs at least one iteration");
  SkeletonTape t;
  const auto k = static_cast<std::size_t>(iterations);
  t.levels.reserve(k + 2);
  t.opened.reserve(k + 1);
  t.skel.reserve(k + 1);
  t.levels.push_back(prob);
  for (std::size_t j = 0; j <= k; ++j) {
    t.levels.push_back(min_pool_3x3(t.levels[j]));
    t.opened.push_back(max_pool_3x3(t.levels[j + 1]));
    const RealGrid& img = t.levels[j];
    const RealGrid& open = t.opened[j];
    RealGrid s(prob.height(), prob.width());
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double delta = relu(img[i] - open[i]);
      if (j == 0) {
        s[i] = delta;
      } else {
        const double prev = t.skel[j - 1][i];
        s[i] = prev + relu(delta - prev * delta);
      }
    }
    t.skel.push_back(std::move(s));
  }
  return t;
}

// out[arg[i]] += g[i]
inline void scatter_add(const Grid<std::uint32_t>& arg, const RealGrid& g, RealGrid& out) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] != 0.0) out[arg[i]] += g[i];
  }
}

}  // namespace detail

/// Morphological soft skeleton: erosion is min_pool_3x3, dilation
/// max_pool_3x3, `iterations` erosion rounds after the initial opening.
inline RealGrid soft_skeleton(const RealGrid& prob, int iterations) {
  return detail::soft_skeleton_tape(prob, iterations).skel.back();
}

/// Vector-Jacobian product of soft_skeleton: gradient w.r.t. `prob` given
/// gradient `grad_out` w.r.t. the skeleton. Pooling subgradients go to the
/// arg-extremum pixel (ties row-major); relu'(0) = 0.
inline RealGrid soft_skeleton_backward(const RealGrid& prob, int iterations, const RealGrid& grad_out) {
  require_same_shape(prob, grad_out, "soft_skeleton_backward");
  const auto t = detail::soft_skeleton_tape(prob, iterations);
  const std::size_t k = static_cast<std::size_t>(iterations);
  const std::size_t n = prob.size();

  RealGrid g_skel = grad_out;
  RealGrid g_next(prob.height(), prob.width());  // gradient w.r.t. levels[j+1]
  RealGrid g_cur(prob.height(), prob.width());   // gradient w.r.t. levels[j]
  RealGrid g_open(prob.height(), prob.width());

  for (std::size_t jj = k + 1; jj-- > 0;) {
    const RealGrid& img = t.levels[jj];
    const RealGrid& open = t.opened[jj];
    std::fill(g_cur.data().begin(), g_cur.data().end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = img[i] - open[i];
      const double delta = detail::relu(diff);
      double g_delta;
      if (jj == 0) {
        g_delta = g_skel[i];
      } else {
        const double prev = t.skel[jj - 1][i];
        const bool on = delta - prev * delta > 0.0;
        g_delta = on ? g_skel[i] * (1.0 - prev) : 0.0;
        g_skel[i] = on ? g_skel[i] * (1.0 - delta) : g_skel[i];
      }
      if (diff > 0.0) {
        g_cur[i] += g_delta;
        g_open[i] = -g_delta;
      } else {
        g_open[i] = 0.0;
      }
    }
    // opened = max_pool(levels[j+1]); levels[j+1] = min_pool(levels[j])
    detail::scatter_add(pool_argext_3x3(t.levels[jj + 1], true), g_open, g_next);
    detail::scatter_add(pool_argext_3x3(img, false), g_next, g_cur);
    std::swap(g_next, g_cur);
  }
  return g_next;
}

// ---------------------------------------------------------------------------
// Dice

inline LossTerm dice_loss(const LikelihoodMap& pred, const LabelMask& mask) {
  require_compatible(pred, mask);
  const std::size_t cats = pred.categories(), n = pred.plane_size();
  LossTerm out{0.0, GradMap(pred)};
  const auto& labels = mask.labels().values();
  double sum_dice = 0.0;
  for (std::size_t l = 0; l < cats; ++l) {
    const auto p = pred.plane(l);
    const auto label = static_cast<std::uint8_t>(l + 1);
    double inter = 0.0, sum_p = 0.0, sum_g = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double g = labels[i] == label ? 1.0 : 0.0;
      inter += p[i] * g;
      sum_p += p[i];
      sum_g += g;
    }
    const double num = 2.0 * inter + kSmoothing;
    const double den = sum_p + sum_g + kSmoothing;
    sum_dice += num / den;
    const double scale = -1.0 / static_cast<double>(cats);
    for (std::size_t i = 0; i < n; ++i) {
      const double g = labels[i] == label ? 1.0 : 0.0;
      out.grad.at(l, i) = scale * (2.0 * g * den - num) / (den * den);
    }
  }
  out.value = 1.0 - sum_dice / static_cast<double>(cats);
  return out;
}

// ---------------------------------------------------------------------------
// Centre-line loss

struct CenterlineScores {
  double precision = 0.0;    // topology precision of category l
  double sensitivity = 0.0;  // topology sensitivity of category l
  double cldice = 0.0;
};

inline LossTerm cl_loss(const LikelihoodMap& pred, const LabelMask& mask, int iterations,
                        std::vector<CenterlineScores>* scores = nullptr) {
  require_compatible(pred, mask);
  if (iterations < 1) throw ArgumentError("skeleton iterations must be >= 1");
  const std::size_t cats = pred.categories(), n = pred.plane_size();
  const double s = kSmoothing;
  LossTerm out{0.0, GradMap(pred)};
  if (scores) scores->clear();
  double sum_cl = 0.0;
  for (std::size_t l = 0; l < cats; ++l) {
    const RealGrid p = pred.channel(l);
    const RealGrid g = mask.real_indicator(l + 1);
    const RealGrid sp = soft_skeleton(p, iterations);
    const RealGrid sg = soft_skeleton(g, iterations);

    double sp_g = 0.0, sp_sum = 0.0, sg_p = 0.0, sg_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sp_g += sp[i] * g[i];
      sp_sum += sp[i];
      sg_p += sg[i] * p[i];
      sg_sum += sg[i];
    }
    const double prec_den = sp_sum + s, sens_den = sg_sum + s;
    const double prec = (sp_g + s) / prec_den;
    const double sens = (sg_p + s) / sens_den;
    const double den = prec + sens + s;
    const double cl = 2.0 * prec * sens / den;
    sum_cl += cl;
    if (scores) scores->push_back({prec, sens, cl});

    const double dcl_dprec = 2.0 * sens * (sens + s) / (den * den);
    const double dcl_dsens = 2.0 * prec * (prec + s) / (den * den);
    const double scale = -1.0 / static_cast<double>(cats);

    RealGrid g_sp(p.height(), p.width());
    for (std::size_t i = 0; i < n; ++i) g_sp[i] = dcl_dprec * (g[i] - prec) / prec_den;
    const RealGrid g_p = soft_skeleton_backward(p, iterations, g_sp);
    for (std::size_t i = 0; i < n; ++i) {
      out.grad.at(l, i) = scale * (g_p[i] + dcl_dsens * sg[i] / sens_den);
    }
  }
  out.value = 1.0 - sum_cl / static_cast<double>(cats);
  return out;
}

// ---------------------------------------------------------------------------
// Persistence loss

struct PersistenceLoss {
  double value = 0.0;
  GradMap grad;
  std::vector<double> matched_by_category;    // L_m per category
  std::vector<double> unmatched_by_category;  // L_u per category
  std::vector<Matching> matchings;
};

inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

inline PersistenceLoss per_loss(const LikelihoodMap& pred, const LabelMask& mask,
                                Connectivity conn = Connectivity::Four) {
  require_compatible(pred, mask);
  const std::size_t cats = pred.categories();
  const double s = kSmoothing;
  const double inv_cats = 1.0 / static_cast<double>(cats);
  PersistenceLoss out;
  out.grad = GradMap(pred);
  double total = 0.0;
  for (std::size_t l = 0; l < cats; ++l) {
    const RealGrid y = pred.channel(l);
    Matching m = betti_match(y, mask, l + 1, conn);
    const double nm = static_cast<double>(m.n_matched());
    const double nu = static_cast<double>(m.n_unmatched());

    double sum_m = 0.0;
    for (const auto& [pb, gb] : m.matched) sum_m += std::abs(pb.birth - gb.birth) + std::abs(pb.death - gb.death);
    double sum_u = 0.0;
    for (const auto& b : m.unmatched_pred) sum_u += std::abs(b.birth - b.death);
    const double lm = sum_m / (nm + s);
    const double lu = sum_u / (nu + s);
    out.matched_by_category.push_back(lm);
    out.unmatched_by_category.push_back(lu);

    if (nm + nu > 0.0) {
      const double wm = nm / (nm + nu), wu = nu / (nm + nu);
      total += wm * lm + wu * lu;

      // matching and critical pixels are held fixed
      const double cm = inv_cats * wm / (nm + s);
      for (const auto& [pb, gb] : m.matched) {
        out.grad.at(l, y.index(pb.birth_pixel)) += cm * sign(pb.birth - gb.birth);
        if (pb.death_pixel) out.grad.at(l, y.index(*pb.death_pixel)) += cm * sign(pb.death - gb.death);
      }
      const double cu = inv_cats * wu / (nu + s);
      for (const auto& b : m.unmatched_pred) {
        const double sg = sign(b.birth - b.death);
        out.grad.at(l, y.index(b.birth_pixel)) += cu * sg;
        if (b.death_pixel) out.grad.at(l, y.index(*b.death_pixel)) -= cu * sg;
      }
    }
    out.matchings.push_back(std::move(m));
  }
  out.value = total * inv_cats;
  return out;
}

// ---------------------------------------------------------------------------
// Total

/// Linear ramp min(1, epoch / warmup_epochs).
inline double warmup_scale(std::size_t epoch, std::size_t warmup_epochs) {
  if (warmup_epochs < 1) throw ArgumentError("warmup epochs must be >= 1");
  return std::min(1.0, static_cast<double>(epoch) / static_cast<double>(warmup_epochs));
}

struct LossWeights {
  double dice = 0.4;
  double cl = 0.4;
  double per = 0.2;
};

struct LossOptions {
  LossWeights weights;
  std::size_t epoch = 10;
  std::size_t warmup_epochs = 10;
  int skeleton_iterations = 10;
  Connectivity connectivity = Connectivity::Four;

  void validate() const {
    if (!(weights.dice >= 0.0) || !(weights.cl >= 0.0) || !(weights.per >= 0.0)) {
      throw ArgumentError("loss weights must be >= 0");
    }
    if (skeleton_iterations < 1) throw ArgumentError("skeleton iterations must be >= 1");
    if (warmup_epochs < 1) throw ArgumentError("warmup epochs must be >= 1");
  }
};

struct LossReport {
  double dice = 0.0;
  double cl = 0.0;
  double per = 0.0;
  std::vector<double> per_matched_by_category;
  std::vector<double> per_unmatched_by_category;
  std::vector<std::size_t> matched_count_by_category;
  std::vector<std::size_t> unmatched_count_by_category;
  std::vector<std::size_t> unmatched_gt_count_by_category;
  double total = 0.0;
  LossWeights weights_used;  // after warmup scaling
  double warmup = 1.0;
};

struct LossResult {
  LossReport report;
  GradMap grad;
  std::vector<Matching> matchings;
};

inline LossResult total_loss(const LikelihoodMap& pred, const LabelMask& mask, const LossOptions& opt = {}) {
  opt.validate();
  require_compatible(pred, mask);
  const double w = warmup_scale(opt.epoch, opt.warmup_epochs);

  LossTerm dice = dice_loss(pred, mask);
  LossTerm cl = cl_loss(pred, mask, opt.skeleton_iterations);
  PersistenceLoss per = per_loss(pred, mask, opt.connectivity);

  LossResult out;
  auto& r = out.report;
  r.dice = dice.value;
  r.cl = cl.value;
  r.per = per.value;
  r.per_matched_by_category = per.matched_by_category;
  r.per_unmatched_by_category = per.unmatched_by_category;
  for (const auto& m : per.matchings) {
    r.matched_count_by_category.push_back(m.n_matched());
    r.unmatched_count_by_category.push_back(m.n_unmatched());
    r.unmatched_gt_count_by_category.push_back(m.unmatched_gt.size());
  }
  r.warmup = w;
  r.weights_used = {opt.weights.dice, w * opt.weights.cl, w * opt.weights.per};
  r.total = r.weights_used.dice * r.dice + r.weights_used.cl * r.cl + r.weights_used.per * r.per;

  out.grad = GradMap(pred);
  out.grad.add_scaled(dice.grad, r.weights_used.dice);
  out.grad.add_scaled(cl.grad, r.weights_used.cl);
  out.grad.add_scaled(per.grad, r.weights_used.per);
  out.matchings = std::move(per.matchings);
  return out;
}

}  // namespace toponet
