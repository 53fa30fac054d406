#pragma once

// Overlap and surface-distance metrics on label masks, plus corpus-level
// aggregation over directories of PGM masks paired by filename stem.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "toponet/error.hpp"
#include "toponet/grid.hpp"
#include "toponet/io.hpp"

namespace toponet {

namespace detail {

struct Overlap {
  std::size_t pred = 0, gt = 0, both = 0;
};

inline Overlap overlap(const LabelMask& pred, const LabelMask& gt, std::size_t category) {
  require_same_shape(pred.labels(), gt.labels(), "metrics");
  Overlap o;
  const auto& p = pred.labels().values();
  const auto& g = gt.labels().values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool a = p[i] == category, b = g[i] == category;
    o.pred += a;
    o.gt += b;
    o.both += a && b;
  }
  return o;
}

}  // namespace detail

/// 2|P&G| / (|P|+|G|); 1 when both empty.
inline double dsc(const LabelMask& pred, const LabelMask& gt, std::size_t category) {
  const auto o = detail::overlap(pred, gt, category);
  if (o.pred + o.gt == 0) return 1.0;
  return 2.0 * static_cast<double>(o.both) / static_cast<double>(o.pred + o.gt);
}

/// |P&G| / |P or G|; 1 when both empty.
inline double iou(const LabelMask& pred, const LabelMask& gt, std::size_t category) {
  const auto o = detail::overlap(pred, gt, category);
  const std::size_t uni = o.pred + o.gt - o.both;
  if (uni == 0) return 1.0;
  return static_cast<double>(o.both) / static_cast<double>(uni);
}

/// Exact squared Euclidean distance from every pixel to the nearest
/// foreground pixel (Meijster, Roerdink & Hesselink; integer arithmetic).
/// Pixels of an all-background grid get -1.
inline Grid<std::int64_t> squared_distance_transform(const BinaryGrid& fg) {
  const auto h = static_cast<std::int64_t>(fg.height());
  const auto w = static_cast<std::int64_t>(fg.width());
  const std::int64_t inf = h + w;
  Grid<std::int64_t> g(fg.height(), fg.width());
  bool any = false;
  for (std::int64_t x = 0; x < w; ++x) {
    g(0, x) = fg(0, x) ? 0 : inf;
    for (std::int64_t y = 1; y < h; ++y) g(y, x) = fg(y, x) ? 0 : g(y - 1, x) + 1;
    for (std::int64_t y = h - 2; y >= 0; --y) g(y, x) = std::min(g(y, x), g(y + 1, x) + 1);
  }
  for (auto v : fg.values()) any = any || v;
  Grid<std::int64_t> dt(fg.height(), fg.width(), -1);
  if (!any) return dt;

  std::vector<std::int64_t> s(static_cast<std::size_t>(w)), t(static_cast<std::size_t>(w));
  for (std::int64_t y = 0; y < h; ++y) {
    auto gy = [&](std::int64_t i) { return g(y, i); };
    auto f = [&](std::int64_t x, std::int64_t i) { return (x - i) * (x - i) + gy(i) * gy(i); };
    auto sep = [&](std::int64_t i, std::int64_t u) {
      const std::int64_t num = u * u - i * i + gy(u) * gy(u) - gy(i) * gy(i);
      const std::int64_t den = 2 * (u - i);
      return num >= 0 ? num / den : -((-num + den - 1) / den);  // floor division
    };
    std::int64_t q = 0;
    s[0] = 0;
    t[0] = 0;
    for (std::int64_t u = 1; u < w; ++u) {
      while (q >= 0 && f(t[q], s[q]) > f(t[q], u)) --q;
      if (q < 0) {
        q = 0;
        s[0] = u;
      } else {
        const std::int64_t x = 1 + sep(s[q], u);
        if (x < w) {
          ++q;
          s[q] = u;
          t[q] = x;
        }
      }
    }
    for (std::int64_t u = w - 1; u >= 0; --u) {
      dt(y, u) = f(u, s[q]);
      if (u == t[q]) --q;
    }
  }
  return dt;
}

/// Average symmetric surface distance in pixels over the full foregrounds
/// of `category`. nullopt when either side is empty.
inline std::optional<double> assd(const LabelMask& pred, const LabelMask& gt, std::size_t category) {
  require_same_shape(pred.labels(), gt.labels(), "assd");
  const BinaryGrid p = pred.indicator(category);
  const BinaryGrid g = gt.indicator(category);
  const auto dt_g = squared_distance_transform(g);
  const auto dt_p = squared_distance_transform(p);
  if (dt_g[0] < 0 || dt_p[0] < 0) return std::nullopt;
  // directional sums kept apart so swapping the arguments is bit-exact
  double sum_p = 0.0, sum_g = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i]) {
      sum_p += std::sqrt(static_cast<double>(dt_g[i]));
      ++count;
    }
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i]) {
      sum_g += std::sqrt(static_cast<double>(dt_p[i]));
      ++count;
    }
  }
  return (sum_p + sum_g) / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// Reports

struct CategoryMetrics {
  std::size_t category = 0;
  double dsc = 0.0;
  double iou = 0.0;
  std::optional<double> assd;
};

struct ImageMetrics {
  std::string stem;
  std::vector<CategoryMetrics> categories;
};

struct CategorySummary {
  std::size_t category = 0;
  double mean_dsc = 0.0;
  double mean_iou = 0.0;
  std::optional<double> mean_assd;
  std::size_t assd_excluded = 0;
};

struct MetricReport {
  std::vector<ImageMetrics> images;  // sorted by stem
  std::vector<CategorySummary> per_category;
  double mean_dsc = 0.0;
  double mean_iou = 0.0;
  std::optional<double> mean_assd;  // over defined (image, category) entries
  std::size_t assd_excluded = 0;
};

inline ImageMetrics evaluate_image(const LabelMask& pred, const LabelMask& gt, std::string stem = {}) {
  require_same_shape(pred.labels(), gt.labels(), stem.empty() ? "evaluate_image" : stem.c_str());
  const std::size_t cats = std::max(pred.categories(), gt.categories());
  ImageMetrics out{std::move(stem), {}};
  for (std::size_t l = 1; l <= cats; ++l) {
    out.categories.push_back({l, dsc(pred, gt, l), iou(pred, gt, l), assd(pred, gt, l)});
  }
  return out;
}

/// Per-category and grand means. Undefined assd entries are skipped and counted.
inline MetricReport aggregate(std::vector<ImageMetrics> images) {
  std::sort(images.begin(), images.end(), [](const auto& a, const auto& b) { return a.stem < b.stem; });
  MetricReport r;
  r.images = std::move(images);
  if (r.images.empty()) return r;
  const std::size_t cats = r.images.front().categories.size();
  double all_dsc = 0.0, all_iou = 0.0, all_assd = 0.0;
  std::size_t n_all = 0, n_assd = 0;
  for (std::size_t c = 0; c < cats; ++c) {
    CategorySummary s;
    s.category = c + 1;
    double sum_assd = 0.0;
    std::size_t n_def = 0;
    for (const auto& img : r.images) {
      const auto& m = img.categories.at(c);
      s.mean_dsc += m.dsc;
      s.mean_iou += m.iou;
      all_dsc += m.dsc;
      all_iou += m.iou;
      ++n_all;
      if (m.assd) {
        sum_assd += *m.assd;
        all_assd += *m.assd;
        ++n_def;
        ++n_assd;
      } else {
        ++s.assd_excluded;
      }
    }
    s.mean_dsc /= static_cast<double>(r.images.size());
    s.mean_iou /= static_cast<double>(r.images.size());
    if (n_def > 0) s.mean_assd = sum_assd / static_cast<double>(n_def);
    r.assd_excluded += s.assd_excluded;
    r.per_category.push_back(s);
  }
  if (n_all > 0) {
    r.mean_dsc = all_dsc / static_cast<double>(n_all);
    r.mean_iou = all_iou / static_cast<double>(n_all);
  }
  if (n_assd > 0) r.mean_assd = all_assd / static_cast<double>(n_assd);
  return r;
}

// ---------------------------------------------------------------------------
// Corpus

/// Stems present on one side only.
class MissingPairError : public Error {
public:
  MissingPairError(std::vector<std::string> pred_only, std::vector<std::string> gt_only)
      : Error(describe(pred_only, gt_only)), pred_only_(std::move(pred_only)), gt_only_(std::move(gt_only)) {}

  const std::vector<std::string>& pred_only() const noexcept { return pred_only_; }
  const std::vector<std::string>& gt_only() const noexcept { return gt_only_; }

private:
  static std::string describe(const std::vector<std::string>& p, const std::vector<std::string>& g) {
    std::string msg = "unpaired stems:";
    for (const auto& s : p) msg += " " + s + "(pred only)";
    for (const auto& s : g) msg += " " + s + "(gt only)";
    return msg;
  }

  std::vector<std::string> pred_only_;
  std::vector<std::string> gt_only_;
};

class EmptyCorpusError : public Error {
public:
  using Error::Error;
};

inline std::map<std::string, std::filesystem::path> pgm_files_by_stem(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::map<std::string, std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") {
      out[entry.path().stem().string()] = entry.path();
    }
  }
  return out;
}

struct CorpusOptions {
  std::optional<std::size_t> categories;  // default: largest label in the corpus
  unsigned workers = 0;                   // 0 = hardware concurrency
};

inline MetricReport evaluate_corpus(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                                    const CorpusOptions& opt = {}) {
  const auto preds = pgm_files_by_stem(pred_dir);
  const auto gts = pgm_files_by_stem(gt_dir);
  std::vector<std::string> pred_only, gt_only, stems;
  for (const auto& [stem, _] : preds) (gts.count(stem) ? stems : pred_only).push_back(stem);
  for (const auto& [stem, _] : gts)
    if (!preds.count(stem)) gt_only.push_back(stem);
  if (!pred_only.empty() || !gt_only.empty()) throw MissingPairError(pred_only, gt_only);
  if (stems.empty()) throw EmptyCorpusError("no paired masks in " + pred_dir.string() + " and " + gt_dir.string());

  std::size_t cats = 1;
  if (opt.categories) {
    cats = *opt.categories;
  } else {
    for (const auto& s : stems) {
      cats = std::max<std::size_t>({cats, max_label_in_pgm(preds.at(s)), max_label_in_pgm(gts.at(s))});
    }
  }

  std::vector<std::optional<ImageMetrics>> results(stems.size());
  std::vector<std::exception_ptr> errors(stems.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < stems.size(); i = next++) {
      try {
        const auto p = read_mask(preds.at(stems[i]), cats);
        const auto g = read_mask(gts.at(stems[i]), cats);
        results[i] = evaluate_image(p, g, stems[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned n_workers = opt.workers ? opt.workers : std::max(1u, std::thread::hardware_concurrency());
  n_workers = static_cast<unsigned>(std::min<std::size_t>(n_workers, stems.size()));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < n_workers; ++t) pool.emplace_back(work);
    work();
  }
  std::vector<ImageMetrics> images;
  for (std::size_t i = 0; i < stems.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    images.push_back(std::move(*results[i]));
  }
  return aggregate(std::move(images));
}

}  // namespace toponet
