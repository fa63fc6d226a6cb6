#include "bohm/report.hpp"

#include <cmath>

namespace bohm {

void ResidualReport::add(const Point& x, double value) {
  samples_.push_back({x, value});
  const double a = std::abs(value);
  if (!std::isfinite(a)) {
    max_abs_ = std::numeric_limits<double>::infinity();
  } else if (a > max_abs_) {
    max_abs_ = a;
  }
  sum_abs_ += a;
}

void ResidualReport::merge(const ResidualReport& other) {
  for (const auto& s : other.samples_) add(s.x, s.value);
  skipped_ += other.skipped_;
}

double ResidualReport::fraction_above(double threshold) const {
  if (samples_.empty()) return 0.0;
  std::size_t n = 0;
  for (const auto& s : samples_)
    if (std::abs(s.value) > threshold) ++n;
  return static_cast<double>(n) / static_cast<double>(samples_.size());
}

bool ResidualReport::passed(double tolerance_scale) const {
  if (!tolerance_) return true;
  if (samples_.empty()) return false;
  return max_abs_ <= *tolerance_ * tolerance_scale;
}

}  // namespace bohm
