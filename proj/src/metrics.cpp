#include "aasist3/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace aasist3 {

namespace {

// Midpoints between adjacent distinct scores plus one threshold below and
// one above everything; this hits every achievable (FAR, FRR) pair.
std::vector<double> candidate_thresholds(const std::vector<double>& bona,
                                         const std::vector<double>& spoof) {
  std::vector<double> all;
  all.reserve(bona.size() + spoof.size());
  all.insert(all.end(), bona.begin(), bona.end());
  all.insert(all.end(), spoof.begin(), spoof.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  std::vector<double> thresholds;
  thresholds.reserve(all.size() + 1);
  thresholds.push_back(all.front() - 1.0);
  for (std::size_t i = 0; i + 1 < all.size(); ++i) {
    thresholds.push_back(0.5 * (all[i] + all[i + 1]));
  }
  thresholds.push_back(all.back() + 1.0);
  return thresholds;
}

void check_inputs(const std::vector<double>& bona, const std::vector<double>& spoof,
                  const char* op) {
  if (bona.empty() || spoof.empty()) {
    throw std::invalid_argument(std::string(op) + ": need at least one score per class");
  }
  for (double s : bona) {
    if (!std::isfinite(s)) throw std::invalid_argument(std::string(op) + ": non-finite score");
  }
  for (double s : spoof) {
    if (!std::isfinite(s)) throw std::invalid_argument(std::string(op) + ": non-finite score");
  }
}

double far_at(const std::vector<double>& spoof, double t) {
  std::size_t fa = 0;
  for (double s : spoof) fa += s >= t ? 1 : 0;
  return static_cast<double>(fa) / static_cast<double>(spoof.size());
}

double frr_at(const std::vector<double>& bona, double t) {
  std::size_t fr = 0;
  for (double s : bona) fr += s < t ? 1 : 0;
  return static_cast<double>(fr) / static_cast<double>(bona.size());
}

}  // namespace

MetricResult compute_eer(const std::vector<double>& bonafide_scores,
                         const std::vector<double>& spoof_scores) {
  check_inputs(bonafide_scores, spoof_scores, "compute_eer");
  MetricResult best{2.0, 0.0};
  for (double t : candidate_thresholds(bonafide_scores, spoof_scores)) {
    const double rate = 0.5 * (far_at(spoof_scores, t) + frr_at(bonafide_scores, t));
    if (rate < best.value) best = {rate, t};
  }
  return best;
}

MetricResult compute_min_dcf(const std::vector<double>& bonafide_scores,
                             const std::vector<double>& spoof_scores, double p_target,
                             double c_miss, double c_fa) {
  check_inputs(bonafide_scores, spoof_scores, "compute_min_dcf");
  if (!(p_target > 0.0) || !(p_target < 1.0) || !(c_miss > 0.0) || !(c_fa > 0.0)) {
    throw std::invalid_argument("compute_min_dcf: invalid cost parameters");
  }
  const double norm = std::min(p_target * c_miss, (1.0 - p_target) * c_fa);
  MetricResult best{std::numeric_limits<double>::infinity(), 0.0};
  for (double t : candidate_thresholds(bonafide_scores, spoof_scores)) {
    const double dcf = (p_target * c_miss * frr_at(bonafide_scores, t) +
                        (1.0 - p_target) * c_fa * far_at(spoof_scores, t)) /
                       norm;
    if (dcf < best.value) best = {dcf, t};
  }
  return best;
}

}  // namespace aasist3
