#pragma once

// JSON and CSV emission for barcodes, matchings, loss and metric reports.
// Output is a pure function of the input (no timestamps), so identical
// inputs give byte-identical documents.

#include <charconv>
#include <string>

#include "json.hpp"
#include "toponet/gradcheck.hpp"
#include "toponet/losses.hpp"
#include "toponet/matching.hpp"
#include "toponet/metrics.hpp"
#include "toponet/persistence.hpp"

namespace toponet {

using json = nlohmann::ordered_json;

inline json to_json(const PixelCoord& p) { return json::array({p.row, p.col}); }

inline json to_json(const Bar& b) {
  json j;
  j["birth"] = b.birth;
  j["death"] = b.death;
  j["birth_pixel"] = to_json(b.birth_pixel);
  j["death_pixel"] = b.death_pixel ? to_json(*b.death_pixel) : json(nullptr);
  j["essential"] = b.essential;
  return j;
}

inline json barcode_json(const Barcode& bars) {
  json arr = json::array();
  for (const auto& b : bars) arr.push_back(to_json(b));
  return arr;
}

inline json matching_json(const Matching& m) {
  json j;
  j["matched"] = json::array();
  for (const auto& [p, g] : m.matched) j["matched"].push_back(json::array({to_json(p), to_json(g)}));
  j["unmatched_pred"] = barcode_json(m.unmatched_pred);
  j["unmatched_gt"] = barcode_json(m.unmatched_gt);
  return j;
}

inline json loss_report_json(const LossReport& r) {
  json j;
  j["dice"] = r.dice;
  j["cl"] = r.cl;
  j["per"] = r.per;
  j["per_matched_by_category"] = r.per_matched_by_category;
  j["per_unmatched_by_category"] = r.per_unmatched_by_category;
  j["matched_count_by_category"] = r.matched_count_by_category;
  j["unmatched_count_by_category"] = r.unmatched_count_by_category;
  j["unmatched_gt_count_by_category"] = r.unmatched_gt_count_by_category;
  j["total"] = r.total;
  j["weights_used"] = {{"lambda_d", r.weights_used.dice},
                       {"lambda_cl", r.weights_used.cl},
                       {"lambda_per", r.weights_used.per}};
  j["warmup_scale"] = r.warmup;
  return j;
}

inline json fd_report_json(const FdReport& r) {
  json j;
  j["probes"] = r.probes.size();
  j["max_relative_error"] = r.max_relative_error;
  return j;
}

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json metric_report_json(const MetricReport& r) {
  json j;
  j["images"] = json::array();
  for (const auto& img : r.images) {
    json im;
    im["stem"] = img.stem;
    im["categories"] = json::array();
    for (const auto& c : img.categories) {
      im["categories"].push_back({{"category", c.category},
                                  {"dsc", c.dsc},
                                  {"iou", c.iou},
                                  {"assd", optional_number(c.assd)},
                                  {"assd_defined", c.assd.has_value()}});
    }
    j["images"].push_back(std::move(im));
  }
  j["per_category"] = json::array();
  for (const auto& s : r.per_category) {
    j["per_category"].push_back({{"category", s.category},
                                 {"mean_dsc", s.mean_dsc},
                                 {"mean_iou", s.mean_iou},
                                 {"mean_assd", optional_number(s.mean_assd)},
                                 {"assd_excluded", s.assd_excluded}});
  }
  j["mean_dsc"] = r.mean_dsc;
  j["mean_iou"] = r.mean_iou;
  j["mean_assd"] = optional_number(r.mean_assd);
  j["assd_excluded"] = r.assd_excluded;
  return j;
}

/// Shortest decimal form that round-trips.
inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline constexpr const char* kMetricCsvHeader = "stem,category,dsc,iou,assd,assd_defined";

/// One row per image per category. Undefined assd is written as "nan".
inline std::string metric_report_csv(const MetricReport& r) {
  std::string out = std::string(kMetricCsvHeader) + "\n";
  for (const auto& img : r.images) {
    for (const auto& c : img.categories) {
      out += img.stem + "," + std::to_string(c.category) + "," + format_number(c.dsc) + "," + format_number(c.iou) +
             "," + (c.assd ? format_number(*c.assd) : std::string("nan")) + "," + (c.assd ? "1" : "0") + "\n";
    }
  }
  return out;
}

}  // namespace toponet
