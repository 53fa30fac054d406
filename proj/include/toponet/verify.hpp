#pragma once

// Self-verification: randomized oracle suites and worked fixtures.
// Every case draws from its own generator seeded by (seed, suite, index),
// so a run is reproducible and any single case can be replayed.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "toponet/btf.hpp"
#include "toponet/gradcheck.hpp"
#include "toponet/grid.hpp"
#include "toponet/losses.hpp"
#include "toponet/matching.hpp"
#include "toponet/metrics.hpp"
#include "toponet/oracles.hpp"
#include "toponet/persistence.hpp"
#include "toponet/serialize.hpp"

namespace toponet {

// ---------------------------------------------------------------------------
// Deterministic generators (no std distributions: their output is
// implementation-defined).

class SplitMix64 {
public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::size_t below(std::size_t n) { return static_cast<std::size_t>((*this)() % n); }
  double unit() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
  std::uint64_t state_;
};

inline std::uint64_t case_seed(std::uint64_t seed, std::string_view suite, std::size_t index) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (char c : suite) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ull;
  SplitMix64 mix(seed ^ h ^ (0x9e3779b97f4a7c15ull * (index + 1)));
  return mix();
}

namespace gen {

/// Values drawn from {0, 1/(levels-1), ..., 1}.
inline RealGrid level_map(std::size_t h, std::size_t w, std::size_t levels, SplitMix64& rng) {
  RealGrid g(h, w);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = static_cast<double>(rng.below(levels)) / static_cast<double>(levels - 1);
  }
  return g;
}

inline LikelihoodMap uniform_map(std::size_t categories, std::size_t h, std::size_t w, SplitMix64& rng) {
  std::vector<double> v(categories * h * w);
  for (double& x : v) x = rng.unit();
  return {categories, h, w, std::move(v)};
}

/// Random axis-aligned rectangles with random labels painted over background.
inline LabelMask rect_mask(std::size_t categories, std::size_t h, std::size_t w, std::size_t rects, SplitMix64& rng) {
  Grid<std::uint8_t> g(h, w, 0);
  for (std::size_t k = 0; k < rects; ++k) {
    const std::size_t r0 = rng.below(h), c0 = rng.below(w);
    const std::size_t rh = 1 + rng.below(std::max<std::size_t>(1, h / 2));
    const std::size_t cw = 1 + rng.below(std::max<std::size_t>(1, w / 2));
    const auto label = static_cast<std::uint8_t>(1 + rng.below(categories));
    for (std::size_t r = r0; r < std::min(h, r0 + rh); ++r)
      for (std::size_t c = c0; c < std::min(w, c0 + cw); ++c) g(r, c) = label;
  }
  return {categories, std::move(g)};
}

inline LabelMask pixel_mask(std::size_t categories, std::size_t h, std::size_t w, double density, SplitMix64& rng) {
  Grid<std::uint8_t> g(h, w, 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (rng.unit() < density) g[i] = static_cast<std::uint8_t>(1 + rng.below(categories));
  }
  return {categories, std::move(g)};
}

/// Single-category instance whose prediction components at 0.5 and
/// ground-truth components are pairwise disjoint or identical. Prediction
/// noise below 0.5 is placed only off the ground truth.
struct SeparatedInstance {
  RealGrid pred;
  LabelMask mask;
};

inline SeparatedInstance separated_instance(std::size_t h, std::size_t w, SplitMix64& rng) {
  Grid<std::uint8_t> occupied(h, w, 0);  // rectangle plus one-pixel margin
  Grid<std::uint8_t> gt(h, w, 0);
  RealGrid pred(h, w, 0.0);
  Grid<std::uint8_t> in_rect(h, w, 0);
  const std::size_t attempts = 4 + rng.below(6);
  for (std::size_t a = 0; a < attempts; ++a) {
    const std::size_t rh = 1 + rng.below(4), cw = 1 + rng.below(4);
    if (rh > h || cw > w) continue;
    const std::size_t r0 = rng.below(h - rh + 1), c0 = rng.below(w - cw + 1);
    bool clash = false;
    for (std::size_t r = r0; r < r0 + rh && !clash; ++r)
      for (std::size_t c = c0; c < c0 + cw; ++c) clash = clash || occupied(r, c);
    if (clash) continue;
    const std::size_t kind = rng.below(3);  // 0 pred only, 1 gt only, 2 both
    for (std::size_t r = r0; r < r0 + rh; ++r) {
      for (std::size_t c = c0; c < c0 + cw; ++c) {
        in_rect(r, c) = 1;
        if (kind != 0) gt(r, c) = 1;
        if (kind != 1) pred(r, c) = 0.5 + 0.125 * static_cast<double>(rng.below(5));
      }
    }
    const std::size_t rlo = r0 ? r0 - 1 : 0, clo = c0 ? c0 - 1 : 0;
    for (std::size_t r = rlo; r < std::min(h, r0 + rh + 1); ++r)
      for (std::size_t c = clo; c < std::min(w, c0 + cw + 1); ++c) occupied(r, c) = 1;
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!in_rect[i] && rng.below(2)) pred[i] = 0.1 * static_cast<double>(1 + rng.below(4));
  }
  return {std::move(pred), LabelMask(1, std::move(gt))};
}

}  // namespace gen

// ---------------------------------------------------------------------------
// Suites

struct SuiteResult {
  explicit SuiteResult(std::string suite_name) : name(std::move(suite_name)) {}

  std::string name;
  std::size_t cases = 0;
  std::size_t passed = 0;
  std::optional<json> counterexample;  // first failure
  double worst = 0.0;                  // largest error measure seen, where meaningful

  bool ok() const { return passed == cases; }

  void record(bool pass, std::size_t index, const std::function<json()>& describe) {
    ++cases;
    if (pass) {
      ++passed;
    } else if (!counterexample) {
      json j = describe();
      j["suite"] = name;
      j["case"] = index;
      counterexample = std::move(j);
    }
  }
};

inline json grid_json(const RealGrid& g) {
  json rows = json::array();
  for (std::size_t r = 0; r < g.height(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < g.width(); ++c) row.push_back(g(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json mask_json(const LabelMask& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.height(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < m.width(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

/// superlevel_barcode vs. the threshold-sweep oracle on random level maps.
inline SuiteResult persistence_suite(std::uint64_t seed, std::size_t cases, std::size_t size = 8,
                                     std::size_t levels = 8) {
  SuiteResult res{"persistence_oracle"};
  for (std::size_t i = 0; i < cases; ++i) {
    SplitMix64 rng(case_seed(seed, res.name, i));
    const RealGrid map = gen::level_map(size, size, levels, rng);
    std::multiset<std::pair<double, double>> got;
    for (const auto& b : superlevel_barcode(map)) got.emplace(b.birth, b.death);
    const auto want = oracle::threshold_sweep_barcode(map);
    res.record(got == want, i, [&] { return json{{"map", grid_json(map)}}; });
  }
  return res;
}

/// assd vs. exhaustive nearest-distance search; dsc >= iou.
inline SuiteResult assd_suite(std::uint64_t seed, std::size_t cases, std::size_t size = 16) {
  SuiteResult res{"assd_oracle"};
  for (std::size_t i = 0; i < cases; ++i) {
    SplitMix64 rng(case_seed(seed, res.name, i));
    const std::size_t cats = 1 + rng.below(3);
    const auto p = rng.below(2) ? gen::rect_mask(cats, size, size, 1 + rng.below(4), rng)
                                : gen::pixel_mask(cats, size, size, 0.05 + 0.3 * rng.unit(), rng);
    const auto g = gen::rect_mask(cats, size, size, 1 + rng.below(4), rng);
    bool pass = true;
    double worst = 0.0;
    for (std::size_t l = 1; l <= cats; ++l) {
      const auto fast = assd(p, g, l);
      const double slow = oracle::brute_force_assd(p.indicator(l), g.indicator(l));
      if (std::isnan(slow)) {
        pass = pass && !fast;
      } else {
        pass = pass && fast && std::abs(*fast - slow) <= 1e-9;
        if (fast) worst = std::max(worst, std::abs(*fast - slow));
      }
      pass = pass && dsc(p, g, l) >= iou(p, g, l);
    }
    res.worst = std::max(res.worst, worst);
    res.record(pass, i, [&] { return json{{"pred", mask_json(p)}, {"gt", mask_json(g)}}; });
  }
  return res;
}

/// On separated instances matched pairs are exactly the overlapping
/// component pairs found by the brute-force matcher.
inline SuiteResult matching_overlap_suite(std::uint64_t seed, std::size_t cases, std::size_t size = 16) {
  SuiteResult res{"matching_overlap"};
  for (std::size_t i = 0; i < cases; ++i) {
    SplitMix64 rng(case_seed(seed, res.name, i));
    const auto inst = gen::separated_instance(size, size, rng);
    const Matching m = betti_match(inst.pred, inst.mask, 1);
    const auto ov = oracle::overlap_matcher(inst.pred, inst.mask.indicator(1));
    std::set<std::pair<int, int>> got;
    bool pass = true;
    for (const auto& [pb, gb] : m.matched) {
      const int a = ov.pred_labels[inst.pred.index(pb.birth_pixel)];
      const int b = ov.gt_labels[inst.pred.index(gb.birth_pixel)];
      pass = pass && got.emplace(a, b).second;
    }
    pass = pass && got == ov.pairs;
    res.record(pass, i, [&] { return json{{"pred", grid_json(inst.pred)}, {"gt", mask_json(inst.mask)}}; });
  }
  return res;
}

/// Injectivity and partition structure of betti_match on unconstrained inputs.
inline SuiteResult matching_injectivity_suite(std::uint64_t seed, std::size_t cases, std::size_t size = 8) {
  SuiteResult res{"matching_injectivity"};
  for (std::size_t i = 0; i < cases; ++i) {
    SplitMix64 rng(case_seed(seed, res.name, i));
    const RealGrid pred = gen::level_map(size, size, 8, rng);
    const LabelMask mask = gen::rect_mask(2, size, size, 1 + rng.below(5), rng);
    bool pass = true;
    for (std::size_t l = 1; l <= 2; ++l) {
      const Matching m = betti_match(pred, mask, l);
      std::set<PixelCoord> pred_seen, gt_seen;
      for (const auto& [pb, gb] : m.matched) {
        pass = pass && pred_seen.insert(pb.birth_pixel).second && gt_seen.insert(gb.birth_pixel).second;
      }
      pass = pass && m.matched.size() + m.unmatched_pred.size() == superlevel_barcode(pred).size();
      pass = pass && m.matched.size() + m.unmatched_gt.size() == gt_barcode(mask, l).size();
    }
    res.record(pass, i, [&] { return json{{"pred", grid_json(pred)}, {"gt", mask_json(mask)}}; });
  }
  return res;
}

/// Analytic vs. central-difference gradients of dice, cl and per at
/// tie-free probes (random probes plus critical pixels of the barcodes).
inline SuiteResult gradient_suite(std::uint64_t seed, std::size_t cases, std::size_t size = 8, double h = 1e-4,
                                  double tolerance = 1e-3) {
  SuiteResult res{"gradient_fd"};
  const LossOptions opt;
  for (std::size_t i = 0; i < cases; ++i) {
    SplitMix64 rng(case_seed(seed, res.name, i));
    const std::size_t cats = 2;
    const LikelihoodMap pred = gen::uniform_map(cats, size, size, rng);
    const LabelMask mask = gen::rect_mask(cats, size, size, 1 + rng.below(5), rng);

    std::vector<Probe> probes = pick_tie_free_probes(pred, 4, h, rng);
    const auto per = per_loss(pred, mask);
    std::size_t critical = 0;
    for (std::size_t l = 0; l < cats && critical < 4; ++l) {
      std::vector<PixelCoord> pixels;
      for (const auto& [pb, gb] : per.matchings[l].matched) {
        pixels.push_back(pb.birth_pixel);
        if (pb.death_pixel) pixels.push_back(*pb.death_pixel);
      }
      for (const auto& b : per.matchings[l].unmatched_pred) {
        pixels.push_back(b.birth_pixel);
        if (b.death_pixel) pixels.push_back(*b.death_pixel);
      }
      for (const auto& px : pixels) {
        const Probe p{l, static_cast<std::size_t>(px.row), static_cast<std::size_t>(px.col)};
        if (critical < 4 && !tie_diagnostic(pred, p, h)) {
          probes.push_back(p);
          ++critical;
        }
      }
    }

    double worst = 0.0;
    json detail = json::object();
    for (auto which : {LossComponent::Dice, LossComponent::Centerline, LossComponent::Persistence}) {
      const auto rep = finite_difference_check(pred, mask, opt, which, probes, h);
      worst = std::max(worst, rep.max_relative_error);
      detail[to_string(which)] = rep.max_relative_error;
    }
    res.worst = std::max(res.worst, worst);
    res.record(worst < tolerance, i, [&] {
      json probes_json = json::array();
      for (const auto& p : probes) probes_json.push_back({p.category, p.row, p.col});
      json planes = json::array();
      for (std::size_t l = 0; l < cats; ++l) planes.push_back(grid_json(pred.channel(l)));
      return json{{"pred", planes}, {"gt", mask_json(mask)}, {"probes", probes_json}, {"max_relative_error", detail}};
    });
  }
  return res;
}

/// total_loss(one_hot(mask), mask): every component below 1e-3.
inline SuiteResult optimum_suite(std::uint64_t seed, std::size_t cases, std::size_t size = 16) {
  SuiteResult res{"zero_at_optimum"};
  for (std::size_t i = 0; i < cases; ++i) {
    SplitMix64 rng(case_seed(seed, res.name, i));
    const LabelMask mask = rng.below(2) ? gen::rect_mask(1, size, size, 1 + rng.below(5), rng)
                                        : gen::pixel_mask(1, size, size, 0.3 * rng.unit(), rng);
    const auto r = total_loss(one_hot(mask), mask).report;
    const double worst = std::max({r.dice, r.cl, r.per, r.total});
    res.worst = std::max(res.worst, worst);
    res.record(r.dice < 1e-3 && r.cl < 1e-3 && r.per < 1e-3, i, [&] {
      return json{{"gt", mask_json(mask)}, {"dice", r.dice}, {"cl", r.cl}, {"per", r.per}};
    });
  }
  return res;
}

/// The hand-traced examples.
inline SuiteResult fixtures_suite() {
  SuiteResult res{"worked_fixtures"};
  std::size_t k = 0;
  auto check = [&](const char* what, bool pass) {
    res.record(pass, k++, [&] { return json{{"fixture", what}}; });
  };
  auto bars_of = [](const RealGrid& g) {
    std::multiset<std::pair<double, double>> s;
    for (const auto& b : superlevel_barcode(g)) s.emplace(b.birth, b.death);
    return s;
  };

  const RealGrid y(1, 5, std::vector<double>{0, 0.9, 0.9, 0, 0.6});
  const LabelMask g(1, 1, 5, std::vector<std::uint8_t>{0, 1, 1, 0, 0});
  check("barcode [0,.9,.9,0,.6]", bars_of(y) == std::multiset<std::pair<double, double>>{{0.9, 0.0}, {0.6, 0.0}});
  check("barcode [.2,1,.4,.8,.2]", bars_of(RealGrid(1, 5, std::vector<double>{0.2, 1.0, 0.4, 0.8, 0.2})) ==
                                       std::multiset<std::pair<double, double>>{{1.0, 0.0}, {0.8, 0.4}});

  const Matching m = betti_match(y, g, 1);
  check("matching fixture", m.n_matched() == 1 && m.n_unmatched() == 1 && m.matched[0].first.birth == 0.9 &&
                                m.unmatched_pred[0].birth == 0.6 && m.unmatched_gt.empty());
  const LikelihoodMap pred(1, 1, 5, y.values());
  const auto per = per_loss(pred, g);
  check("per fixture 0.35", std::abs(per.value - 0.35) <= 1e-5);
  check("per gradient at birth pixel", std::abs(per.grad.at(0, 1) + 0.5 / (1.0 + kSmoothing)) <= 1e-12);

  const LabelMask p1(1, 1, 4, std::vector<std::uint8_t>{1, 0, 0, 0});
  const LabelMask g1(1, 1, 4, std::vector<std::uint8_t>{1, 0, 0, 1});
  check("assd fixture 1.0", assd(p1, g1, 1) && std::abs(*assd(p1, g1, 1) - 1.0) <= 1e-12);
  const LabelMask a(1, 2, 4, std::vector<std::uint8_t>{1, 1, 0, 0, 1, 1, 0, 0});
  const LabelMask b(1, 2, 4, std::vector<std::uint8_t>{0, 1, 1, 0, 0, 1, 1, 0});
  check("dsc/iou overlap fixture", std::abs(dsc(a, b, 1) - 0.5) <= 1e-12 && std::abs(iou(a, b, 1) - 1.0 / 3.0) <= 1e-12);

  const FeatureMap zero(2, 3, 3, 0.0);
  const auto w = BtfWeights::neutral(2);
  const auto att = fused_attention(zero, zero, w);
  check("attention on zero inputs", att[0] == 0.5 && att[1] == 0.5);
  const FeatureMap rgb(2, 3, 3, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9, -1, 0, 1, 2, 3, 2, 1, 0, -1});
  check("btf residual identity",
        btf_forward(rgb, rgb, FeatureMap(2, 3, 3, 0.7), w) == primary_fusion(rgb, rgb, fused_attention(rgb, rgb, w)));
  const auto mb = boundary_map(FeatureMap(1, 4, 5, 0.3));
  check("boundary map of constant", std::all_of(mb.values().begin(), mb.values().end(), [](double v) { return v == 0.0; }));
  check("warmup 5/10", warmup_scale(5, 10) == 0.5);
  return res;
}

struct VerifyOptions {
  std::uint64_t seed = 1;
  std::size_t cases = 200;
};

struct VerifySummary {
  std::vector<SuiteResult> suites;

  bool ok() const {
    return std::all_of(suites.begin(), suites.end(), [](const auto& s) { return s.ok(); });
  }

  const SuiteResult* first_failure() const {
    for (const auto& s : suites)
      if (!s.ok()) return &s;
    return nullptr;
  }

  /// Human-readable summary; contains no timing so it is reproducible.
  std::string text(const VerifyOptions& opt) const {
    std::ostringstream out;
    out << "seed " << opt.seed << ", " << opt.cases << " cases per randomized suite\n";
    for (const auto& s : suites) {
      out << (s.ok() ? "PASS " : "FAIL ") << s.name << ": " << s.passed << "/" << s.cases << " passed";
      if (s.worst > 0.0) out << " (worst " << format_number(s.worst) << ")";
      out << "\n";
    }
    out << (ok() ? "all suites passed" : "verification FAILED") << "\n";
    return out.str();
  }
};

inline VerifySummary run_verify(const VerifyOptions& opt) {
  VerifySummary s;
  s.suites.push_back(persistence_suite(opt.seed, opt.cases));
  s.suites.push_back(assd_suite(opt.seed, opt.cases));
  s.suites.push_back(matching_overlap_suite(opt.seed, opt.cases));
  s.suites.push_back(matching_injectivity_suite(opt.seed, opt.cases));
  s.suites.push_back(gradient_suite(opt.seed, opt.cases));
  s.suites.push_back(optimum_suite(opt.seed, opt.cases));
  s.suites.push_back(fixtures_suite());
  return s;
}

}  // namespace toponet
