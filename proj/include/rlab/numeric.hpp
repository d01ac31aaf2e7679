#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace rlab {

// Neumaier compensated summation.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::fabs(sum_) >= std::fabs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// Linear-interpolation quantile (type 7) of unsorted data; q in [0,1].
double quantile(std::vector<double> values, double q);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // root-mean-square residual
  std::size_t points = 0;
};

// Ordinary least squares y = intercept + slope * x. Needs at least 2 points
// with distinct x.
LineFit least_squares(std::span<const double> x, std::span<const double> y);

}  // namespace rlab
