#include "funnelkit/gp.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "funnelkit/error.hpp"
#include "funnelkit/stats.hpp"

namespace funnelkit {

struct GpModel::Impl {
  KernelParams params;
  Eigen::MatrixXd x;  // n x d
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::VectorXd weights;  // (K + s I)^-1 y
  double jitter = 0.0;
};

GpModel::GpModel(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
GpModel::GpModel(GpModel&&) noexcept = default;
GpModel& GpModel::operator=(GpModel&&) noexcept = default;
GpModel::~GpModel() = default;

std::size_t GpModel::size() const { return static_cast<std::size_t>(impl_->x.rows()); }
std::size_t GpModel::dim() const { return static_cast<std::size_t>(impl_->x.cols()); }
const KernelParams& GpModel::params() const { return impl_->params; }
double GpModel::jitter() const { return impl_->jitter; }

double se_kernel(std::span<const double> x, std::span<const double> y, const KernelParams& p) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    d2 += d * d;
  }
  return p.signal_variance * std::exp(-0.5 * d2 / (p.length_scale * p.length_scale));
}

namespace {

bool factor_ok(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  if (llt.info() != Eigen::Success) return false;
  const Eigen::MatrixXd& l = llt.matrixLLT();
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    if (!(l(i, i) > 0.0) || !std::isfinite(l(i, i))) return false;
  }
  return true;
}

}  // namespace

GpModel gp_fit(const std::vector<std::vector<double>>& points, std::span<const double> values,
               const KernelParams& params) {
  if (points.empty()) throw Error("gp_fit: no observations");
  if (points.size() != values.size()) throw Error("gp_fit: points and values differ in length");
  if (!(params.signal_variance > 0.0 && params.length_scale > 0.0 && params.noise_variance >= 0.0)) {
    throw Error("gp_fit: kernel parameters must be positive");
  }
  const auto n = static_cast<Eigen::Index>(points.size());
  const auto d = static_cast<Eigen::Index>(points.front().size());
  auto impl = std::make_unique<GpModel::Impl>();
  impl->params = params;
  impl->x.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(points[static_cast<std::size_t>(i)].size()) != d) {
      throw Error("gp_fit: inconsistent point dimension");
    }
    for (Eigen::Index j = 0; j < d; ++j) impl->x(i, j) = points[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      k(i, j) = k(j, i) = se_kernel(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(j)], params);
    }
  }
  k.diagonal().array() += params.noise_variance;

  impl->llt.compute(k);
  for (double jitter = 1e-10; !factor_ok(impl->llt); jitter *= 10.0) {
    if (jitter > 1e-6 * 1.0001) throw Error("gp_fit: kernel matrix not positive definite after jitter 1e-6");
    Eigen::MatrixXd kj = k;
    kj.diagonal().array() += jitter;
    impl->llt.compute(kj);
    impl->jitter = jitter;
  }
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = values[static_cast<std::size_t>(i)];
  impl->weights = impl->llt.solve(y);
  return GpModel(std::move(impl));
}

GpPrediction GpModel::predict(std::span<const double> x) const {
  const auto n = impl_->x.rows();
  const auto d = impl_->x.cols();
  if (static_cast<Eigen::Index>(x.size()) != d) throw Error("gp_predict: point dimension mismatch");
  Eigen::VectorXd kx(n);
  std::vector<double> row(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) row[static_cast<std::size_t>(j)] = impl_->x(i, j);
    kx(i) = se_kernel(row, x, impl_->params);
  }
  GpPrediction p;
  p.mean = kx.dot(impl_->weights);
  const Eigen::VectorXd v = impl_->llt.matrixL().solve(kx);
  p.variance = std::max(0.0, impl_->params.signal_variance - v.squaredNorm());
  return p;
}

GpPrediction gp_predict(const GpModel& model, std::span<const double> x) { return model.predict(x); }

double expected_improvement(double mean, double sigma, double best_so_far) {
  const double gain = mean - best_so_far;
  if (!(sigma > 0.0)) return std::max(gain, 0.0);
  const double z = gain / sigma;
  return std::max(0.0, gain * normal_cdf(z) + sigma * normal_pdf(z));
}

double expected_improvement(const GpModel& model, std::span<const double> x, double best_so_far) {
  const GpPrediction p = model.predict(x);
  return expected_improvement(p.mean, std::sqrt(p.variance), best_so_far);
}

}  // namespace funnelkit
