#include "thinstruct/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <tuple>

#include "thinstruct/error.hpp"

namespace thinstruct {

namespace {

struct Offset {
  int dx, dy;
  double d2;
};

// Window offsets within the tolerance, nearest first, then raster order.
std::vector<Offset> window(double tolerance) {
  const int r = static_cast<int>(std::floor(tolerance));
  std::vector<Offset> out;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const double d2 = dx * dx + dy * dy;
      if (d2 <= tolerance * tolerance + 1e-12) out.push_back({dx, dy, d2});
    }
  std::sort(out.begin(), out.end(), [](const Offset& a, const Offset& b) {
    return std::tie(a.d2, a.dy, a.dx) < std::tie(b.d2, b.dy, b.dx);
  });
  return out;
}

}  // namespace

std::size_t greedy_match(const std::vector<std::uint8_t>& predicted, const std::vector<std::uint8_t>& truth, int width,
                         int height, double tolerance) {
  const std::size_t n = static_cast<std::size_t>(width) * height;
  if (width < 1 || height < 1 || predicted.size() != n || truth.size() != n)
    throw InputError("mask sizes do not match");
  if (!(tolerance >= 0.0)) throw InputError("matching tolerance must be >= 0");
  const auto offsets = window(tolerance);
  std::vector<std::uint8_t> used(n, 0);
  std::size_t matched = 0;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      if (!predicted[static_cast<std::size_t>(y) * width + x]) continue;
      for (const auto& o : offsets) {
        const int X = x + o.dx, Y = y + o.dy;
        if (X < 0 || Y < 0 || X >= width || Y >= height) continue;
        const std::size_t k = static_cast<std::size_t>(Y) * width + X;
        if (truth[k] && !used[k]) {
          used[k] = 1;
          ++matched;
          break;
        }
      }
    }
  return matched;
}

EvalResult evaluate_masks(const std::vector<double>& predicted, const std::vector<std::uint8_t>& truth, int width,
                          int height, const EvalOptions& opts) {
  const std::size_t n = static_cast<std::size_t>(width) * height;
  if (width < 1 || height < 1 || predicted.size() != n || truth.size() != n)
    throw InputError("predicted and truth masks differ in size");
  if (opts.steps < 2) throw InputError("threshold sweep needs at least 2 steps");
  const std::size_t truth_count = static_cast<std::size_t>(std::count_if(truth.begin(), truth.end(), [](auto b) { return b != 0; }));
  EvalResult res;
  std::vector<std::uint8_t> pred(n);
  for (int k = 0; k < opts.steps; ++k) {
    PrPoint pt;
    pt.threshold = static_cast<double>(k) / (opts.steps - 1);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = predicted[i] > 0.0 && predicted[i] >= pt.threshold;
      pt.predicted += pred[i];
    }
    pt.truth = truth_count;
    pt.matched = greedy_match(pred, truth, width, height, opts.tolerance);
    pt.precision = pt.predicted ? static_cast<double>(pt.matched) / pt.predicted : 0.0;
    pt.recall = truth_count ? static_cast<double>(pt.matched) / truth_count : 0.0;
    pt.f = pt.precision + pt.recall > 0.0 ? 2.0 * pt.precision * pt.recall / (pt.precision + pt.recall) : 0.0;
    res.curve.push_back(pt);
    if (pt.f > res.curve[res.best].f) res.best = res.curve.size() - 1;
  }
  return res;
}

std::string pr_curve_csv(const EvalResult& result) {
  std::string s = "threshold,precision,recall,f,predicted,matched,truth\n";
  char buf[256];
  for (const auto& p : result.curve) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%zu,%zu,%zu\n", p.threshold, p.precision, p.recall, p.f,
                  p.predicted, p.matched, p.truth);
    s += buf;
  }
  return s;
}

}  // namespace thinstruct
