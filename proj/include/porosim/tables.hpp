#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace porosim {

// Piecewise-linear table with clamping outside the abscissa range.
// At a breakpoint the slope of the right-hand segment is reported; beyond
// the ends the value is held constant and the slope is zero.
class PiecewiseLinear {
 public:
  PiecewiseLinear() = default;
  PiecewiseLinear(std::vector<double> xs, std::vector<double> ys)
      : xs_(std::move(xs)), ys_(std::move(ys)) {}

  bool empty() const { return xs_.empty(); }
  std::size_t size() const { return xs_.size(); }
  double frontX() const { return xs_.front(); }
  double backX() const { return xs_.back(); }

  double eval(double x) const { return evalWithSlope(x).first; }

  std::pair<double, double> evalWithSlope(double x) const {
    const std::size_t n = xs_.size();
    if (n == 1 || x < xs_.front()) return {ys_.front(), 0.0};
    if (x >= xs_.back()) return {ys_.back(), 0.0};
    std::size_t lo = 0, hi = n - 1;
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      if (xs_[mid] <= x)
        lo = mid;
      else
        hi = mid;
    }
    const double slope = (ys_[hi] - ys_[lo]) / (xs_[hi] - xs_[lo]);
    return {ys_[lo] + slope * (x - xs_[lo]), slope};
  }

 private:
  std::vector<double> xs_;
  std::vector<double> ys_;
};

}  // namespace porosim
