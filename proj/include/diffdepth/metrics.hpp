#pragma once

#include <cstdint>
#include <string>

#include "diffdepth/grid.hpp"

#include <json.hpp>

namespace diffdepth {

struct EvalProtocol {
  double min_depth = 0.5;  // meters
  double max_depth = 80.0;

  void validate() const;
};

struct MetricReport {
  double rel = 0.0;      // mean |p-g| / g
  double rmse = 0.0;     // sqrt(mean (p-g)^2)
  double delta1 = 0.0;   // fraction with max(p/g, g/p) < 1.25
  double delta2 = 0.0;   // threshold 1.25^2
  double delta3 = 0.0;   // threshold 1.25^3
  double log10_err = 0.0;  // mean |log10 p - log10 g|
  double sq_rel = 0.0;   // mean (p-g)^2 / g
  double rms_log = 0.0;  // sqrt(mean (ln p - ln g)^2)
  std::int64_t n_pixels = 0;
};

// Pools pixels across a whole split (not a mean of per-image metrics).
// Pixels enter if gt is valid and min_depth <= gt <= max_depth. Predictions
// are floored at min_depth for the log-based metrics only. A prediction grid
// whose shape differs from gt is resized with nearest neighbor first.
class MetricAccumulator {
 public:
  explicit MetricAccumulator(const EvalProtocol& protocol);

  void add(const Grid& pred, const DepthMap& gt);

  // Throws DataError if no pixel ever passed the mask.
  MetricReport finalize() const;

 private:
  EvalProtocol protocol_;
  double abs_rel_ = 0, sq_ = 0, sq_rel_ = 0, log10_ = 0, sq_log_ = 0;
  std::int64_t d1_ = 0, d2_ = 0, d3_ = 0, n_ = 0;
};

MetricReport evaluate_pair(const Grid& pred, const DepthMap& gt,
                           const EvalProtocol& protocol);

nlohmann::json report_to_json(const MetricReport& report,
                              const EvalProtocol& protocol);

// CSV helpers; `name` labels the row (split or run id).
std::string report_csv_header();
std::string report_csv_row(const std::string& name, const MetricReport& report);

}  // namespace diffdepth
