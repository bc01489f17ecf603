#include "diffdepth/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "diffdepth/resize.hpp"

namespace diffdepth {

void EvalProtocol::validate() const {
  if (!(min_depth > 0.0) || !(max_depth > min_depth))
    throw UsageError("eval protocol requires 0 < min_depth < max_depth");
}

MetricAccumulator::MetricAccumulator(const EvalProtocol& protocol)
    : protocol_(protocol) {
  protocol_.validate();
}

void MetricAccumulator::add(const Grid& pred, const DepthMap& gt) {
  validate_depth_map(gt, "metrics");
  Grid p = pred;
  if (pred.rows() != gt.values.rows() || pred.cols() != gt.values.cols())
    p = resize_nearest(pred, gt.height(), gt.width());
  if (any_non_finite(p)) throw NumericError("metrics: non-finite prediction");

  constexpr double kD1 = 1.25, kD2 = 1.25 * 1.25, kD3 = 1.25 * 1.25 * 1.25;
  for (int j = 0; j < gt.width(); ++j) {
    for (int i = 0; i < gt.height(); ++i) {
      if (!gt.valid(i, j)) continue;
      const double g = gt.values(i, j);
      if (g < protocol_.min_depth || g > protocol_.max_depth) continue;
      const double pr = p(i, j);
      const double diff = pr - g;
      abs_rel_ += std::abs(diff) / g;
      sq_ += diff * diff;
      sq_rel_ += diff * diff / g;
      const double ratio = pr > 0.0
                               ? std::max(pr / g, g / pr)
                               : std::numeric_limits<double>::infinity();
      d1_ += ratio < kD1;
      d2_ += ratio < kD2;
      d3_ += ratio < kD3;
      const double pf = std::max(pr, protocol_.min_depth);  // log floor
      log10_ += std::abs(std::log10(pf) - std::log10(g));
      const double dl = std::log(pf) - std::log(g);
      sq_log_ += dl * dl;
      ++n_;
    }
  }
}

MetricReport MetricAccumulator::finalize() const {
  if (n_ == 0) throw DataError("metrics: no pixels passed the eval mask");
  const double n = static_cast<double>(n_);
  MetricReport r;
  r.rel = abs_rel_ / n;
  r.rmse = std::sqrt(sq_ / n);
  r.delta1 = d1_ / n;
  r.delta2 = d2_ / n;
  r.delta3 = d3_ / n;
  r.log10_err = log10_ / n;
  r.sq_rel = sq_rel_ / n;
  r.rms_log = std::sqrt(sq_log_ / n);
  r.n_pixels = n_;
  return r;
}

MetricReport evaluate_pair(const Grid& pred, const DepthMap& gt,
                           const EvalProtocol& protocol) {
  MetricAccumulator acc(protocol);
  acc.add(pred, gt);
  return acc.finalize();
}

nlohmann::json report_to_json(const MetricReport& report,
                              const EvalProtocol& protocol) {
  return nlohmann::json{{"rel", report.rel},
                        {"rmse", report.rmse},
                        {"delta1", report.delta1},
                        {"delta2", report.delta2},
                        {"delta3", report.delta3},
                        {"log10", report.log10_err},
                        {"sq_rel", report.sq_rel},
                        {"rms_log", report.rms_log},
                        {"n_pixels", report.n_pixels},
                        {"protocol",
                         {{"min_depth", protocol.min_depth},
                          {"max_depth", protocol.max_depth}}}};
}

std::string report_csv_header() {
  return "name,rel,rmse,delta1,delta2,delta3,log10,sq_rel,rms_log,n_pixels";
}

std::string report_csv_row(const std::string& name,
                           const MetricReport& report) {
  std::ostringstream ss;
  ss.precision(9);
  ss << name << ',' << report.rel << ',' << report.rmse << ',' << report.delta1
     << ',' << report.delta2 << ',' << report.delta3 << ',' << report.log10_err
     << ',' << report.sq_rel << ',' << report.rms_log << ',' << report.n_pixels;
  return ss.str();
}

}  // namespace diffdepth
