#include <gtest/gtest.h>

#include "helpers.hpp"
#include "toponet/oracles.hpp"
#include "toponet/verify.hpp"

using namespace toponet;
using toponet::test::mask_row;
using toponet::test::TempDir;

namespace {

LabelMask shifted(const LabelMask& m, std::size_t dr, std::size_t dc, std::size_t h, std::size_t w) {
  Grid<std::uint8_t> g(h, w, 0);
  for (std::size_t r = 0; r < m.height(); ++r)
    for (std::size_t c = 0; c < m.width(); ++c) g(r + dr, c + dc) = m(r, c);
  return {m.categories(), std::move(g)};
}

}  // namespace

TEST(Overlap, IdenticalAndDisjoint) {
  const auto a = mask_row(1, {1, 1, 0, 0});
  const auto b = mask_row(1, {0, 0, 1, 1});
  EXPECT_EQ(dsc(a, a, 1), 1.0);
  EXPECT_EQ(iou(a, a, 1), 1.0);
  EXPECT_EQ(dsc(a, b, 1), 0.0);
  EXPECT_EQ(iou(a, b, 1), 0.0);
}

TEST(Overlap, TwoPixelOverlap) {
  const LabelMask a(1, 2, 4, {1, 1, 0, 0, 1, 1, 0, 0});
  const LabelMask b(1, 2, 4, {0, 1, 1, 0, 0, 1, 1, 0});
  EXPECT_DOUBLE_EQ(dsc(a, b, 1), 0.5);
  EXPECT_DOUBLE_EQ(iou(a, b, 1), 1.0 / 3.0);
}

TEST(Overlap, EmptyConventions) {
  const auto empty = mask_row(2, {0, 0, 0});
  const auto one = mask_row(2, {0, 1, 0});
  EXPECT_EQ(dsc(empty, empty, 1), 1.0);
  EXPECT_EQ(iou(empty, empty, 1), 1.0);
  EXPECT_EQ(dsc(empty, one, 1), 0.0);
  EXPECT_EQ(iou(one, empty, 1), 0.0);
}

TEST(Overlap, ShapeMismatch) { EXPECT_THROW(dsc(mask_row(1, {1}), mask_row(1, {1, 0}), 1), ShapeError); }

TEST(DistanceTransform, MatchesBruteForce) {
  for (std::size_t i = 0; i < 100; ++i) {
    SplitMix64 rng(case_seed(41, "edt", i));
    const std::size_t h = 1 + rng.below(12), w = 1 + rng.below(12);
    BinaryGrid fg(h, w);
    for (std::size_t k = 0; k < fg.size(); ++k) fg[k] = rng.unit() < 0.15;
    const auto d = squared_distance_transform(fg);
    bool any = false;
    for (auto v : fg.values()) any = any || v;
    for (std::size_t k = 0; k < fg.size(); ++k) {
      if (!any) {
        ASSERT_EQ(d[k], -1);
        continue;
      }
      std::int64_t best = std::numeric_limits<std::int64_t>::max();
      for (std::size_t j = 0; j < fg.size(); ++j) {
        if (!fg[j]) continue;
        const auto dr = static_cast<std::int64_t>(k / w) - static_cast<std::int64_t>(j / w);
        const auto dc = static_cast<std::int64_t>(k % w) - static_cast<std::int64_t>(j % w);
        best = std::min(best, dr * dr + dc * dc);
      }
      ASSERT_EQ(d[k], best);
    }
  }
}

TEST(Assd, WorkedExamples) {
  const auto a = mask_row(1, {1, 1, 0, 1});
  EXPECT_EQ(*assd(a, a, 1), 0.0);
  EXPECT_DOUBLE_EQ(*assd(mask_row(1, {1, 0, 0, 0, 0, 0}), mask_row(1, {0, 0, 0, 0, 0, 1}), 1), 5.0);
  EXPECT_DOUBLE_EQ(*assd(mask_row(1, {1, 0, 0, 0}), mask_row(1, {1, 0, 0, 1}), 1), 1.0);
}

TEST(Assd, UndefinedWhenOneSideEmpty) {
  EXPECT_FALSE(assd(mask_row(1, {0, 0}), mask_row(1, {0, 1}), 1));
  EXPECT_FALSE(assd(mask_row(1, {1, 0}), mask_row(1, {0, 0}), 1));
}

TEST(Assd, MatchesBruteForceAndIsSymmetric) {
  for (std::size_t i = 0; i < 200; ++i) {
    SplitMix64 rng(case_seed(42, "assd", i));
    const auto p = gen::pixel_mask(1, 16, 16, 0.3 * rng.unit(), rng);
    const auto g = gen::pixel_mask(1, 16, 16, 0.3 * rng.unit(), rng);
    const auto fast = assd(p, g, 1);
    const double slow = oracle::brute_force_assd(p.indicator(1), g.indicator(1));
    ASSERT_EQ(fast.has_value(), !std::isnan(slow));
    if (fast) {
      ASSERT_NEAR(*fast, slow, 1e-9);
      ASSERT_EQ(*fast, *assd(g, p, 1));
    }
    ASSERT_EQ(dsc(p, g, 1), dsc(g, p, 1));
    ASSERT_EQ(iou(p, g, 1), iou(g, p, 1));
    ASSERT_GE(dsc(p, g, 1), iou(p, g, 1));
  }
}

TEST(Assd, TranslationInvariant) {
  for (std::size_t i = 0; i < 50; ++i) {
    SplitMix64 rng(case_seed(43, "shift", i));
    const auto p = gen::pixel_mask(1, 8, 8, 0.3, rng);
    const auto g = gen::pixel_mask(1, 8, 8, 0.3, rng);
    const std::size_t dr = rng.below(5), dc = rng.below(5);
    const auto ps = shifted(p, dr, dc, 13, 13), gs = shifted(g, dr, dc, 13, 13);
    EXPECT_EQ(dsc(p, g, 1), dsc(ps, gs, 1));
    EXPECT_EQ(iou(p, g, 1), iou(ps, gs, 1));
    const auto a = assd(p, g, 1), b = assd(ps, gs, 1);
    ASSERT_EQ(a.has_value(), b.has_value());
    if (a) {
      EXPECT_NEAR(*a, *b, 1e-12);
    }
  }
}

TEST(Assd, SpuriousBlobRaisesDistanceNotOverlap) {
  Grid<std::uint8_t> gt(20, 20, 0), pred(20, 20, 0);
  for (std::size_t r = 2; r < 6; ++r)
    for (std::size_t c = 2; c < 6; ++c) gt(r, c) = pred(r, c) = 1;
  pred(2, 2) = 0;  // imperfect so the baseline assd is positive
  const LabelMask g(1, gt), p0(1, pred);
  for (std::size_t r = 16; r < 18; ++r)
    for (std::size_t c = 16; c < 18; ++c) pred(r, c) = 1;
  const LabelMask p1(1, pred);
  EXPECT_GT(*assd(p1, g, 1), *assd(p0, g, 1));
  // relative blob area: 4 spurious pixels over |P| + |G|
  const double blob_share = 4.0 / (19.0 + 16.0);
  EXPECT_LE(std::abs(dsc(p1, g, 1) - dsc(p0, g, 1)), blob_share);
  EXPECT_LT(dsc(p1, g, 1), dsc(p0, g, 1));
}

TEST(Aggregate, MeansAndExclusions) {
  const auto a = mask_row(2, {1, 0, 0, 0});
  const auto b = mask_row(2, {1, 0, 0, 1});
  const auto img1 = evaluate_image(a, a, "x");  // cat 1 perfect, cat 2 empty on both sides
  const auto img2 = evaluate_image(a, b, "w");
  const auto r = aggregate({img1, img2});
  ASSERT_EQ(r.images.size(), 2u);
  EXPECT_EQ(r.images[0].stem, "w");
  ASSERT_EQ(r.per_category.size(), 2u);
  EXPECT_DOUBLE_EQ(r.per_category[0].mean_dsc, (1.0 + 2.0 / 3.0) / 2.0);
  EXPECT_DOUBLE_EQ(*r.per_category[0].mean_assd, 0.5);
  EXPECT_EQ(r.per_category[1].assd_excluded, 2u);
  EXPECT_FALSE(r.per_category[1].mean_assd);
  EXPECT_EQ(r.assd_excluded, 2u);
  EXPECT_DOUBLE_EQ(*r.mean_assd, 0.5);
  EXPECT_DOUBLE_EQ(r.mean_dsc, (1.0 + 2.0 / 3.0 + 1.0 + 1.0) / 4.0);
}

TEST(Corpus, SingleIdenticalPair) {
  TempDir pd("pred"), gd("gt");
  const LabelMask m(1, 2, 3, {0, 1, 1, 0, 0, 1});
  write_mask(pd / "a.pgm", m);
  write_mask(gd / "a.pgm", m);
  const auto r = evaluate_corpus(pd.path(), gd.path());
  EXPECT_EQ(r.mean_dsc, 1.0);
  EXPECT_EQ(r.mean_iou, 1.0);
  EXPECT_EQ(*r.mean_assd, 0.0);
}

TEST(Corpus, TwoImageMeans) {
  TempDir pd("pred"), gd("gt");
  write_mask(pd / "one.pgm", mask_row(1, {1, 0, 0, 0}));
  write_mask(gd / "one.pgm", mask_row(1, {1, 0, 0, 1}));  // dsc 2/3, iou 1/2, assd 1
  write_mask(pd / "two.pgm", mask_row(1, {1, 1, 0, 0}));
  write_mask(gd / "two.pgm", mask_row(1, {0, 1, 1, 0}));  // dsc 1/2, iou 1/3, assd 1/2
  const auto r = evaluate_corpus(pd.path(), gd.path(), {std::nullopt, 2});
  EXPECT_DOUBLE_EQ(r.mean_dsc, (2.0 / 3.0 + 0.5) / 2.0);
  EXPECT_DOUBLE_EQ(r.mean_iou, (0.5 + 1.0 / 3.0) / 2.0);
  EXPECT_DOUBLE_EQ(*r.mean_assd, 0.75);
}

TEST(Corpus, MissingPairsListed) {
  TempDir pd("pred"), gd("gt");
  const auto m = mask_row(1, {1});
  write_mask(pd / "a.pgm", m);
  write_mask(gd / "a.pgm", m);
  write_mask(pd / "only_pred.pgm", m);
  write_mask(gd / "only_gt.pgm", m);
  try {
    evaluate_corpus(pd.path(), gd.path());
    FAIL() << "expected MissingPairError";
  } catch (const MissingPairError& e) {
    EXPECT_EQ(e.pred_only(), std::vector<std::string>{"only_pred"});
    EXPECT_EQ(e.gt_only(), std::vector<std::string>{"only_gt"});
    EXPECT_NE(std::string(e.what()).find("only_pred"), std::string::npos);
  }
}

TEST(Corpus, EmptyCorpus) {
  TempDir pd("pred"), gd("gt");
  EXPECT_THROW(evaluate_corpus(pd.path(), gd.path()), EmptyCorpusError);
}

TEST(Corpus, ShapeMismatchPropagates) {
  TempDir pd("pred"), gd("gt");
  write_mask(pd / "a.pgm", mask_row(1, {1, 0}));
  write_mask(gd / "a.pgm", mask_row(1, {1, 0, 0}));
  EXPECT_THROW(evaluate_corpus(pd.path(), gd.path()), ShapeError);
}

TEST(Corpus, NotADirectory) { EXPECT_THROW(evaluate_corpus("/nonexistent/p", "/nonexistent/g"), IoError); }

TEST(Corpus, WorkerCountDoesNotChangeResult) {
  TempDir pd("pred"), gd("gt");
  for (std::size_t i = 0; i < 12; ++i) {
    SplitMix64 rng(case_seed(44, "corpus", i));
    write_mask(pd / ("img" + std::to_string(i) + ".pgm"), gen::pixel_mask(3, 10, 10, 0.3, rng));
    write_mask(gd / ("img" + std::to_string(i) + ".pgm"), gen::pixel_mask(3, 10, 10, 0.3, rng));
  }
  const auto a = metric_report_json(evaluate_corpus(pd.path(), gd.path(), {std::nullopt, 1})).dump();
  const auto b = metric_report_json(evaluate_corpus(pd.path(), gd.path(), {std::nullopt, 5})).dump();
  EXPECT_EQ(a, b);
}
