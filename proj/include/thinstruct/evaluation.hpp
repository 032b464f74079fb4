#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace thinstruct {

struct PrPoint {
  double threshold = 0.0;
  std::size_t predicted = 0;  // predicted pixels at this threshold
  std::size_t matched = 0;    // matched pairs
  std::size_t truth = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

struct EvalResult {
  std::vector<PrPoint> curve;
  std::size_t best = 0;  // index into curve with the largest F
  const PrPoint& best_point() const { return curve[best]; }
};

struct EvalOptions {
  double tolerance = 2.0;  // matching radius in pixels
  int steps = 64;          // thresholds k / (steps - 1)
};

/// Precision/recall sweep of a probability raster against a binary truth raster.
/// At each threshold t the prediction is {value >= t and value > 0}; predicted
/// pixels are matched greedily in raster order to the nearest unmatched truth
/// pixel within the tolerance.
EvalResult evaluate_masks(const std::vector<double>& predicted, const std::vector<std::uint8_t>& truth, int width,
                          int height, const EvalOptions& opts = {});

/// Number of one-to-one matches for a fixed binary prediction.
std::size_t greedy_match(const std::vector<std::uint8_t>& predicted, const std::vector<std::uint8_t>& truth, int width,
                         int height, double tolerance);

std::string pr_curve_csv(const EvalResult& result);

}  // namespace thinstruct
