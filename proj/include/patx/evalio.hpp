#pragma once

#include <string>
#include <vector>

#include "patx/attribution.hpp"
#include "patx/data.hpp"

namespace patx::evalio {

struct EvalResult {
  std::string method;               // e.g. "ours", "occlusion", "gradcam"
  std::string mode;                 // attribution mode tag, "-" for baselines
  std::vector<double> per_image_iou;
  double percentile = 80.0;
  std::vector<int> classes = {1, 2};

  double mean_iou() const;
};

/// |a and b| / |a or b| for binary masks; 1 when both masks are empty.
double iou(const Tensor<std::uint8_t>& pred, const Tensor<std::uint8_t>& ref);

/// Binary reference: pixels whose mask id belongs to the class set.
Tensor<std::uint8_t> reference_mask(const Tensor<std::uint8_t>& mask,
                                    const std::vector<int>& classes);

/// IoU of the map's high-attribution pixels against the sample's reference
/// classes at the given percentile.
double evaluate_attribution(const attr::AttributionMap& map, const data::SceneSample& sample,
                            const std::vector<int>& classes = {1, 2}, double percentile = 80.0);

struct CsvRow {
  std::string method;
  std::string mode;
  long n_images = 0;
  double mean_iou_percent = 0.0;
  double percentile = 80.0;

  bool operator==(const CsvRow&) const = default;
};

CsvRow to_csv_row(const EvalResult& r);
std::string emit_csv(const std::vector<CsvRow>& rows);
std::vector<CsvRow> parse_csv(const std::string& text);

struct ReportTable {
  std::string text;
  std::string csv;
};

std::string render_rows_text(const std::vector<CsvRow>& rows, bool paper_reference_row);

/// One row per method with mean IoU %; optionally an extra text row echoing
/// the published full-scale numbers, labeled as not recomputed.
ReportTable report_table(const std::vector<EvalResult>& results, bool paper_reference_row);

}  // namespace patx::evalio
