#pragma once

// Exact Gaussian-process regression with a squared-exponential kernel and a
// zero prior mean, plus the expected-improvement acquisition.

#include <memory>
#include <span>
#include <vector>

namespace funnelkit {

struct KernelParams {
  double signal_variance = 1.0;  // sigma_f^2
  double length_scale = 0.2;
  double noise_variance = 1e-6;  // sigma_n^2
};

double se_kernel(std::span<const double> x, std::span<const double> y, const KernelParams& params);

struct GpPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

class GpModel {
 public:
  GpModel(GpModel&&) noexcept;
  GpModel& operator=(GpModel&&) noexcept;
  ~GpModel();

  GpPrediction predict(std::span<const double> x) const;

  std::size_t size() const;
  std::size_t dim() const;
  const KernelParams& params() const;
  // Diagonal jitter that made the kernel matrix factorizable (0 if none).
  double jitter() const;

 private:
  friend GpModel gp_fit(const std::vector<std::vector<double>>&, std::span<const double>, const KernelParams&);
  struct Impl;
  explicit GpModel(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

// Cholesky factorization of K + sigma_n^2 I, escalating diagonal jitter from
// 1e-10 to 1e-6 when needed. Throws Error with no observations, mismatched
// dimensions, non-positive kernel parameters or if factorization still
// fails.
GpModel gp_fit(const std::vector<std::vector<double>>& points, std::span<const double> values,
               const KernelParams& params);

// Predictive variance is clamped at 0.
GpPrediction gp_predict(const GpModel& model, std::span<const double> x);

// EI for maximization: (mu - f*) Phi(z) + sigma phi(z), z = (mu - f*) / sigma;
// max(mu - f*, 0) when sigma = 0.
double expected_improvement(double mean, double sigma, double best_so_far);
double expected_improvement(const GpModel& model, std::span<const double> x, double best_so_far);

}  // namespace funnelkit
