#pragma once

#include "bohm/core.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace bohm {

/// Named scalar defect samples for one equation evaluated over a point set.
class ResidualReport {
 public:
  struct Sample {
    Point x;
    double value;
  };

  ResidualReport() = default;
  explicit ResidualReport(std::string name, std::optional<double> tolerance = std::nullopt)
      : name_(std::move(name)), tolerance_(tolerance) {}

  void add(const Point& x, double value);
  // Points where the equation could not be evaluated (e.g. wave-function nodes).
  void add_skipped() { ++skipped_; }

  // Append the samples of `other`, in order.
  void merge(const ResidualReport& other);

  const std::string& name() const { return name_; }
  const std::vector<Sample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  std::size_t skipped() const { return skipped_; }

  double max_abs() const { return max_abs_; }
  double mean_abs() const { return samples_.empty() ? 0.0 : sum_abs_ / static_cast<double>(samples_.size()); }

  const std::optional<double>& tolerance() const { return tolerance_; }
  void set_tolerance(std::optional<double> tol) { tolerance_ = tol; }

  // Fraction of samples whose |value| exceeds `threshold`.
  double fraction_above(double threshold) const;

  // Passes when max_abs <= tolerance * scale, or when no tolerance is set.
  // A report with no samples at all fails if it is gated.
  bool passed(double tolerance_scale = 1.0) const;

 private:
  std::string name_;
  std::optional<double> tolerance_;
  std::vector<Sample> samples_;
  std::size_t skipped_ = 0;
  double max_abs_ = 0.0;
  double sum_abs_ = 0.0;
};

}  // namespace bohm
