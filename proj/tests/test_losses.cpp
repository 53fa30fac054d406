#include <gtest/gtest.h>

#include <numeric>

#include "helpers.hpp"
#include "toponet/verify.hpp"

using namespace toponet;
using toponet::test::map_of;
using toponet::test::mask_row;
using toponet::test::row;

namespace {

constexpr double s = kSmoothing;

// Straight-line soft skeleton with its own clamped 3x3 pools.
std::vector<double> naive_pool(const std::vector<double>& v, std::size_t h, std::size_t w, bool take_max) {
  std::vector<double> out(v.size());
  for (long r = 0; r < static_cast<long>(h); ++r)
    for (long c = 0; c < static_cast<long>(w); ++c) {
      double best = take_max ? -1e300 : 1e300;
      for (long dr = -1; dr <= 1; ++dr)
        for (long dc = -1; dc <= 1; ++dc) {
          const long rr = std::clamp(r + dr, 0L, static_cast<long>(h) - 1);
          const long cc = std::clamp(c + dc, 0L, static_cast<long>(w) - 1);
          const double x = v[static_cast<std::size_t>(rr) * w + static_cast<std::size_t>(cc)];
          best = take_max ? std::max(best, x) : std::min(best, x);
        }
      out[static_cast<std::size_t>(r) * w + static_cast<std::size_t>(c)] = best;
    }
  return out;
}

std::vector<double> naive_skeleton(std::vector<double> img, std::size_t h, std::size_t w, int k) {
  auto open = [&](const std::vector<double>& x) { return naive_pool(naive_pool(x, h, w, false), h, w, true); };
  std::vector<double> skel(img.size());
  auto o = open(img);
  for (std::size_t i = 0; i < img.size(); ++i) skel[i] = std::max(0.0, img[i] - o[i]);
  for (int j = 0; j < k; ++j) {
    img = naive_pool(img, h, w, false);
    o = open(img);
    for (std::size_t i = 0; i < img.size(); ++i) {
      const double delta = std::max(0.0, img[i] - o[i]);
      skel[i] += std::max(0.0, delta * (1.0 - skel[i]));
    }
  }
  return skel;
}

double naive_cldice(const std::vector<double>& p, const std::vector<double>& g, std::size_t h, std::size_t w, int k) {
  const auto sp = naive_skeleton(p, h, w, k), sg = naive_skeleton(g, h, w, k);
  double a = 0, b = 0, c = 0, d = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    a += sp[i] * g[i];
    b += sp[i];
    c += sg[i] * p[i];
    d += sg[i];
  }
  const double prec = (a + s) / (b + s), sens = (c + s) / (d + s);
  return 2 * prec * sens / (prec + sens + s);
}

double sum(const RealGrid& g) { return std::accumulate(g.values().begin(), g.values().end(), 0.0); }

LikelihoodMap fixture_pred() { return map_of(row({0, 0.9, 0.9, 0, 0.6})); }
LabelMask fixture_mask() { return mask_row(1, {0, 1, 1, 0, 0}); }

}  // namespace

// ---------------------------------------------------------------------------
// Soft skeleton

TEST(SoftSkeleton, ZeroStaysZero) {
  const auto sk = soft_skeleton(RealGrid(5, 5, 0.0), 10);
  EXPECT_EQ(sum(sk), 0.0);
}

TEST(SoftSkeleton, IsolatedPixelSurvives) {
  RealGrid g(5, 5, 0.0);
  g(2, 2) = 1.0;
  const auto sk = soft_skeleton(g, 10);
  EXPECT_EQ(sk(2, 2), 1.0);
  EXPECT_EQ(sum(sk), 1.0);
}

TEST(SoftSkeleton, TubeMassOnInterior) {
  const auto sk = soft_skeleton(row({0, 1, 1, 1, 1, 1, 0}), 3);
  EXPECT_GE(sum(sk), 1.0);
  EXPECT_EQ(sk[0], 0.0);
  EXPECT_EQ(sk[6], 0.0);
  double interior = 0.0;
  for (std::size_t i = 1; i <= 5; ++i) interior += sk[i];
  EXPECT_EQ(interior, sum(sk));
}

TEST(SoftSkeleton, BoundedAndMatchesStraightLineVersion) {
  for (std::size_t i = 0; i < 50; ++i) {
    SplitMix64 rng(case_seed(12, "skel", i));
    const RealGrid g = gen::level_map(9, 7, 9, rng);
    const int k = 1 + static_cast<int>(rng.below(6));
    const auto sk = soft_skeleton(g, k);
    const auto ref = naive_skeleton(g.values(), 9, 7, k);
    for (std::size_t p = 0; p < g.size(); ++p) {
      ASSERT_GE(sk[p], 0.0);
      ASSERT_LE(sk[p], 1.0);
      ASSERT_NEAR(sk[p], ref[p], 1e-15);
    }
  }
}

TEST(SoftSkeleton, BackwardMatchesFiniteDifferences) {
  const double h = 1e-6;
  for (std::size_t i = 0; i < 20; ++i) {
    SplitMix64 rng(case_seed(12, "skel-bwd", i));
    RealGrid g(6, 6);
    for (std::size_t p = 0; p < g.size(); ++p) g[p] = 0.05 + 0.9 * rng.unit();
    RealGrid upstream(6, 6);
    for (std::size_t p = 0; p < g.size(); ++p) upstream[p] = rng.unit() - 0.5;
    const auto grad = soft_skeleton_backward(g, 4, upstream);
    auto f = [&](const RealGrid& x) {
      const auto sk = soft_skeleton(x, 4);
      double v = 0.0;
      for (std::size_t p = 0; p < x.size(); ++p) v += sk[p] * upstream[p];
      return v;
    };
    const LikelihoodMap lm(1, 6, 6, g.values());
    for (std::size_t p = 0; p < g.size(); ++p) {
      if (tie_diagnostic(lm, {0, p / 6, p % 6}, h)) continue;
      RealGrid up = g, down = g;
      up[p] += h;
      down[p] -= h;
      const double fd = (f(up) - f(down)) / (2 * h);
      ASSERT_NEAR(grad[p], fd, 1e-6 * std::max(1.0, std::abs(fd))) << "case " << i << " pixel " << p;
    }
  }
}

// ---------------------------------------------------------------------------
// Dice

TEST(Dice, OneHotIsOptimal) {
  const LabelMask m(2, 2, 3, {0, 1, 2, 2, 1, 0});
  EXPECT_LT(dice_loss(one_hot(m), m).value, 1e-4);
}

TEST(Dice, ZeroPredictionIsWorst) {
  const LabelMask m(2, 1, 4, {1, 2, 0, 1});
  EXPECT_NEAR(dice_loss(LikelihoodMap(2, 1, 4, std::vector<double>(8, 0.0)), m).value, 1.0, 1e-4);
}

TEST(Dice, HalfConfidenceOnHalfGrid) {
  const auto r = dice_loss(LikelihoodMap(1, 1, 4, {0.5, 0.5, 0.5, 0.5}), mask_row(1, {1, 1, 0, 0}));
  EXPECT_DOUBLE_EQ(r.value, 1.0 - (2.0 + s) / (4.0 + s));
  EXPECT_NEAR(r.value, 0.5, 1e-5);
}

TEST(Dice, ShapeAndCategoryMismatch) {
  EXPECT_THROW(dice_loss(LikelihoodMap(1, 1, 3, {0, 0, 0}), mask_row(1, {0, 1})), ShapeError);
  EXPECT_THROW(dice_loss(LikelihoodMap(1, 1, 2, {0, 0}), mask_row(2, {0, 1})), ShapeError);
}

// ---------------------------------------------------------------------------
// Centre-line

TEST(Centerline, OneHotIsOptimal) {
  const LabelMask m(2, 4, 6, {0, 1, 1, 1, 0, 0, 0, 1, 1, 1, 0, 2, 0, 0, 0, 0, 0, 2, 2, 2, 0, 0, 0, 2});
  EXPECT_LT(cl_loss(one_hot(m), m, 10).value, 1e-4);
}

TEST(Centerline, ZeroPredictionDependsOnAbsentCategories) {
  // categories 1 and 2 present, 3 absent
  const LabelMask m(3, 1, 6, {1, 1, 0, 2, 2, 0});
  const auto r = cl_loss(LikelihoodMap(3, 1, 6, std::vector<double>(18, 0.0)), m, 5);
  EXPECT_NEAR(r.value, 1.0 - 1.0 / 3.0, 1e-4);
}

TEST(Centerline, HalfConfidenceTube) {
  const auto tube = mask_row(1, {0, 1, 1, 1, 1, 1, 0});
  const auto pred = LikelihoodMap(1, 1, 7, {0, 0.5, 0.5, 0.5, 0.5, 0.5, 0});
  std::vector<CenterlineScores> scores;
  const auto r = cl_loss(pred, tube, 3, &scores);
  ASSERT_EQ(scores.size(), 1u);
  EXPECT_NEAR(scores[0].precision, 1.0, 1e-4);
  EXPECT_NEAR(scores[0].sensitivity, 0.5, 1e-4);
  EXPECT_NEAR(scores[0].cldice, 2.0 / 3.0, 1e-4);
  EXPECT_NEAR(r.value, 1.0 / 3.0, 1e-4);
}

TEST(Centerline, RejectsZeroIterations) {
  EXPECT_THROW(cl_loss(fixture_pred(), fixture_mask(), 0), ArgumentError);
}

// ---------------------------------------------------------------------------
// Persistence

TEST(Persistence, WorkedFixture) {
  const auto r = per_loss(fixture_pred(), fixture_mask());
  EXPECT_NEAR(r.matched_by_category[0], 0.1 / (1 + s), 1e-12);
  EXPECT_NEAR(r.unmatched_by_category[0], 0.6 / (1 + s), 1e-12);
  EXPECT_NEAR(r.value, 0.35, 1e-5);
  EXPECT_NEAR(r.value, 0.5 * 0.7 / (1 + s), 1e-12);
}

TEST(Persistence, FixtureGradientSigns) {
  const auto r = per_loss(fixture_pred(), fixture_mask());
  const double c = 0.5 / (1 + s);
  EXPECT_NEAR(r.grad.at(0, 1), -c, 1e-12);  // matched birth 0.9 below 1
  EXPECT_NEAR(r.grad.at(0, 4), c, 1e-12);   // unmatched birth; essential, no death pixel
  EXPECT_EQ(r.grad.at(0, 0), 0.0);
  EXPECT_EQ(r.grad.at(0, 2), 0.0);
  EXPECT_EQ(r.grad.at(0, 3), 0.0);
}

TEST(Persistence, PerfectPredictionIsZero) {
  const LabelMask m(2, 3, 4, {1, 1, 0, 2, 0, 0, 0, 2, 1, 0, 2, 2});
  EXPECT_EQ(per_loss(one_hot(m), m).value, 0.0);
}

TEST(Persistence, EmptyPredictionIsZero) {
  const auto r = per_loss(LikelihoodMap(1, 1, 5, std::vector<double>(5, 0.0)), fixture_mask());
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(r.matchings[0].unmatched_gt.size(), 1u);
}

TEST(Persistence, MonotoneInSpuriousPeak) {
  double last = -1.0;
  for (int k = 1; k <= 9; ++k) {
    const double peak = k / 10.0;
    const double v = per_loss(map_of(row({0, 0.9, 0.9, 0, peak})), fixture_mask()).value;
    EXPECT_GT(v, last) << "peak " << peak;
    EXPECT_NEAR(v, 0.5 * (0.1 + peak) / (1 + s), 1e-12);
    last = v;
  }
}

TEST(Persistence, BoundedByOne) {
  for (std::size_t i = 0; i < 200; ++i) {
    SplitMix64 rng(case_seed(13, "bound", i));
    const auto pred = gen::uniform_map(2, 8, 8, rng);
    const auto mask = gen::pixel_mask(2, 8, 8, 0.5, rng);
    const auto r = per_loss(pred, mask);
    ASSERT_GE(r.value, 0.0);
    ASSERT_LE(r.value, 1.0);
  }
}

TEST(Persistence, GradientOnlyAtCriticalPixels) {
  SplitMix64 rng(21);
  const auto pred = gen::uniform_map(1, 8, 8, rng);
  const auto mask = gen::rect_mask(1, 8, 8, 3, rng);
  const auto r = per_loss(pred, mask);
  std::set<std::size_t> critical;
  const auto& m = r.matchings[0];
  auto add = [&](const Bar& b) {
    critical.insert(static_cast<std::size_t>(b.birth_pixel.row * 8 + b.birth_pixel.col));
    if (b.death_pixel) critical.insert(static_cast<std::size_t>(b.death_pixel->row * 8 + b.death_pixel->col));
  };
  for (const auto& [p, g] : m.matched) add(p);
  for (const auto& b : m.unmatched_pred) add(b);
  for (std::size_t i = 0; i < 64; ++i) {
    if (!critical.count(i)) {
      EXPECT_EQ(r.grad.at(0, i), 0.0);
    }
  }
}

// ---------------------------------------------------------------------------
// Total

TEST(Warmup, LinearRamp) {
  EXPECT_EQ(warmup_scale(0, 10), 0.0);
  EXPECT_EQ(warmup_scale(5, 10), 0.5);
  EXPECT_EQ(warmup_scale(10, 10), 1.0);
  EXPECT_EQ(warmup_scale(25, 10), 1.0);
  EXPECT_THROW(warmup_scale(1, 0), ArgumentError);
}

TEST(Total, DefaultsMatchPublishedWeights) {
  const LossOptions o;
  EXPECT_EQ(o.weights.dice, 0.4);
  EXPECT_EQ(o.weights.cl, 0.4);
  EXPECT_EQ(o.weights.per, 0.2);
  EXPECT_EQ(o.warmup_epochs, 10u);
  EXPECT_EQ(o.skeleton_iterations, 10);
}

TEST(Total, ComposesIndependentlyRecomputedTerms) {
  const auto r = total_loss(fixture_pred(), fixture_mask()).report;
  const std::vector<double> p{0, 0.9, 0.9, 0, 0.6}, g{0, 1, 1, 0, 0};
  const double dice = 1.0 - (2.0 * 1.8 + s) / (2.4 + 2.0 + s);
  const double cl = 1.0 - naive_cldice(p, g, 1, 5, 10);
  EXPECT_NEAR(r.dice, dice, 1e-12);
  EXPECT_NEAR(r.cl, cl, 1e-12);
  EXPECT_NEAR(r.per, 0.35, 1e-5);
  EXPECT_NEAR(r.total, 0.4 * dice + 0.4 * cl + 0.2 * r.per, 1e-12);
}

TEST(Total, ReportInvariants) {
  for (std::size_t i = 0; i < 50; ++i) {
    SplitMix64 rng(case_seed(13, "report", i));
    LossOptions o;
    o.weights = {rng.unit(), rng.unit(), rng.unit()};
    o.epoch = rng.below(20);
    const auto r = total_loss(gen::uniform_map(3, 8, 8, rng), gen::rect_mask(3, 8, 8, 4, rng), o).report;
    const double w = warmup_scale(o.epoch, o.warmup_epochs);
    EXPECT_EQ(r.weights_used.dice, o.weights.dice);
    EXPECT_EQ(r.weights_used.cl, w * o.weights.cl);
    EXPECT_EQ(r.weights_used.per, w * o.weights.per);
    const double expect = r.weights_used.dice * r.dice + r.weights_used.cl * r.cl + r.weights_used.per * r.per;
    EXPECT_LE(std::abs(r.total - expect), 1e-12 * std::max(1.0, std::abs(expect)));
    for (double v : {r.dice, r.cl, r.per, r.total}) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GE(v, 0.0);
    }
    EXPECT_LE(r.dice, 1.0 + 1e-3);
    EXPECT_LE(r.cl, 1.0 + 1e-3);
  }
}

TEST(Total, DegenerateWeightsLeaveDiceOnly) {
  LossOptions o;
  o.weights = {0.7, 0.0, 0.0};
  const auto r = total_loss(fixture_pred(), fixture_mask(), o);
  EXPECT_EQ(r.report.total, 0.7 * r.report.dice);
  const auto d = dice_loss(fixture_pred(), fixture_mask());
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(r.grad.values[i], 0.7 * d.grad.values[i]);
}

TEST(Total, EpochZeroDisablesTopologyTerms) {
  LossOptions o;
  o.epoch = 0;
  const auto r = total_loss(fixture_pred(), fixture_mask(), o).report;
  EXPECT_EQ(r.warmup, 0.0);
  EXPECT_EQ(r.total, 0.4 * r.dice);
}

TEST(Total, PerfectPredictionNearZero) {
  for (std::size_t i = 0; i < 50; ++i) {
    SplitMix64 rng(case_seed(13, "opt", i));
    const auto mask = gen::rect_mask(3, 12, 12, 4, rng);
    const auto r = total_loss(one_hot(mask), mask).report;
    EXPECT_LT(r.dice, 1e-3);
    EXPECT_LT(r.cl, 1e-3);
    EXPECT_LT(r.per, 1e-3);
    EXPECT_LT(r.total, 1e-3);
  }
}

TEST(Total, CategoryPermutationEquivariance) {
  for (std::size_t i = 0; i < 30; ++i) {
    SplitMix64 rng(case_seed(13, "perm", i));
    const auto pred = gen::uniform_map(3, 8, 8, rng);
    const auto mask = gen::rect_mask(3, 8, 8, 4, rng);
    const std::size_t perm[3] = {2, 0, 1};  // new plane j holds old plane perm[j]
    std::vector<double> pv;
    for (std::size_t j = 0; j < 3; ++j) {
      const auto plane = pred.plane(perm[j]);
      pv.insert(pv.end(), plane.begin(), plane.end());
    }
    std::vector<std::uint8_t> mv(mask.labels().values());
    for (auto& v : mv) {
      if (v == 0) continue;
      for (std::size_t j = 0; j < 3; ++j)
        if (perm[j] + 1 == v) {
          v = static_cast<std::uint8_t>(j + 1);
          break;
        }
    }
    const auto a = total_loss(pred, mask).report;
    const auto b = total_loss(LikelihoodMap(3, 8, 8, pv), LabelMask(3, 8, 8, mv)).report;
    EXPECT_NEAR(a.dice, b.dice, 1e-12);
    EXPECT_NEAR(a.cl, b.cl, 1e-12);
    EXPECT_NEAR(a.per, b.per, 1e-12);
    EXPECT_NEAR(a.total, b.total, 1e-12);
  }
}

TEST(Total, OptionValidation) {
  LossOptions o;
  o.weights.per = -0.1;
  EXPECT_THROW(total_loss(fixture_pred(), fixture_mask(), o), ArgumentError);
  o = {};
  o.skeleton_iterations = 0;
  EXPECT_THROW(total_loss(fixture_pred(), fixture_mask(), o), ArgumentError);
  o = {};
  o.warmup_epochs = 0;
  EXPECT_THROW(total_loss(fixture_pred(), fixture_mask(), o), ArgumentError);
}
