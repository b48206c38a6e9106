#include "patx/evalio.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace patx::evalio {

double EvalResult::mean_iou() const {
  if (per_image_iou.empty()) return 0.0;
  return std::accumulate(per_image_iou.begin(), per_image_iou.end(), 0.0) /
         static_cast<double>(per_image_iou.size());
}

double iou(const Tensor<std::uint8_t>& pred, const Tensor<std::uint8_t>& ref) {
  if (!pred.same_shape(ref)) throw std::invalid_argument("iou: mask shapes differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, r = ref[i] != 0;
    inter += p && r;
    uni += p || r;
  }
  if (uni == 0) return 1.0;  // vacuous agreement of two empty masks
  return static_cast<double>(inter) / static_cast<double>(uni);
}

Tensor<std::uint8_t> reference_mask(const Tensor<std::uint8_t>& mask,
                                    const std::vector<int>& classes) {
  for (int c : classes)
    if (c < 0 || c >= data::kNumMaskClasses)
      throw std::invalid_argument("reference_mask: class id " + std::to_string(c) +
                                  " is outside the mask scheme 0.." +
                                  std::to_string(data::kNumMaskClasses - 1));
  Tensor<std::uint8_t> out(mask.shape());
  for (std::size_t i = 0; i < mask.size(); ++i)
    out[i] = std::find(classes.begin(), classes.end(), static_cast<int>(mask[i])) !=
                     classes.end()
                 ? std::uint8_t(1)
                 : std::uint8_t(0);
  return out;
}

double evaluate_attribution(const attr::AttributionMap& map, const data::SceneSample& sample,
                            const std::vector<int>& classes, double percentile) {
  if (map.values.dim(0) != sample.mask.dim(0) || map.values.dim(1) != sample.mask.dim(1))
    throw std::invalid_argument("evaluate_attribution: map and mask shapes differ");
  const Tensor<std::uint8_t> pred = attr::threshold_high(map, percentile);
  const Tensor<std::uint8_t> ref = reference_mask(sample.mask, classes);
  return iou(pred, ref);
}

CsvRow to_csv_row(const EvalResult& r) {
  CsvRow row;
  row.method = r.method;
  row.mode = r.mode;
  row.n_images = static_cast<long>(r.per_image_iou.size());
  row.mean_iou_percent = 100.0 * r.mean_iou();
  row.percentile = r.percentile;
  return row;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string emit_csv(const std::vector<CsvRow>& rows) {
  std::string out = "method,n_images,mean_iou_percent,percentile,mode\n";
  for (const auto& r : rows) {
    if (r.method.find(',') != std::string::npos || r.mode.find(',') != std::string::npos)
      throw std::invalid_argument("emit_csv: field contains a comma");
    out += r.method + "," + std::to_string(r.n_images) + "," + fmt(r.mean_iou_percent) +
           "," + fmt(r.percentile) + "," + r.mode + "\n";
  }
  return out;
}

std::vector<CsvRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "method,n_images,mean_iou_percent,percentile,mode")
    throw std::invalid_argument("parse_csv: unexpected header");
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string method, mode, n, mean, pct;
    if (!std::getline(ls, method, ',') || !std::getline(ls, n, ',') ||
        !std::getline(ls, mean, ',') || !std::getline(ls, pct, ',') || !std::getline(ls, mode))
      throw std::invalid_argument("parse_csv: malformed row: " + line);
    CsvRow r;
    r.method = method;
    r.mode = mode;
    r.n_images = std::stol(n);
    r.mean_iou_percent = std::stod(mean);
    r.percentile = std::stod(pct);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string render_rows_text(const std::vector<CsvRow>& rows, bool paper_reference_row) {
  std::ostringstream t;
  t << "method        mode         n    mean IoU %\n";
  t << "--------------------------------------------\n";
  for (const auto& r : rows) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-13s %-11s %4ld   %8.2f\n", r.method.c_str(),
                  r.mode.c_str(), r.n_images, r.mean_iou_percent);
    t << buf;
  }
  if (paper_reference_row) {
    t << "--------------------------------------------\n";
    t << "paper-reported, not recomputed (full-scale): "
         "Ours 93.2, DeepLIFT 81.2, OSM 69.1, GradCAM 53.3\n";
  }
  return t.str();
}

ReportTable report_table(const std::vector<EvalResult>& results, bool paper_reference_row) {
  if (results.empty()) throw std::invalid_argument("report_table: no results");
  std::vector<CsvRow> rows;
  rows.reserve(results.size());
  for (const auto& r : results) rows.push_back(to_csv_row(r));

  ReportTable out;
  out.text = render_rows_text(rows, paper_reference_row);
  out.csv = emit_csv(rows);
  return out;
}

}  // namespace patx::evalio
