#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace funnelkit {

struct Summary {
  double mean = 0.0;
  double p25 = 0.0;
  double p50 = 0.0;
  double p75 = 0.0;
  std::size_t n = 0;

  friend bool operator==(const Summary&, const Summary&) = default;
};

// Linear-interpolation quantile (type 7) of already sorted data.
double quantile_sorted(std::span<const double> sorted, double q);

// Mean and quartiles; `values` must be non-empty.
Summary summarize(std::vector<double> values);

double mean(std::span<const double> xs);
// Unbiased sample variance (n - 1 denominator); 0 for n < 2.
double sample_variance(std::span<const double> xs);
double sample_covariance(std::span<const double> xs, std::span<const double> ys);

double normal_cdf(double z);
double normal_pdf(double z);
double normal_quantile(double p);

// Welford accumulator.
class RunningStats {
 public:
  void push(double x) {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  // Sum of squared deviations from the running mean.
  double sum_sq() const { return m2_; }
  double variance() const { return n_ < 2 ? 0.0 : m2_ / static_cast<double>(n_ - 1); }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

}  // namespace funnelkit
