#pragma once

// Drift estimators for the Euler step. Each returns its cost in item
// evaluations; the prior gradient is free.

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "mlsgld/dataset.hpp"
#include "mlsgld/model.hpp"
#include "mlsgld/rng.hpp"

namespace mlsgld {

struct DriftEstimate {
  ParamVector drift;
  ItemCount cost = 0;

  bool finite() const { return drift.allFinite(); }
};

/// Exact first and second order item sums at a fixed centre (normally the MAP).
struct TaylorCenter {
  ParamVector theta0;
  ParamVector G0;  // sum_i grad log p(x_i | theta0)
  Matrix H0;       // sum_i hess log p(x_i | theta0)
  ItemCount build_cost = 0;
};

namespace detail {
inline void check_batch(std::span<const std::size_t> tau, std::size_t N) {
  if (tau.empty()) throw std::invalid_argument("batch must be non-empty");
  for (auto i : tau) check_index(i, N);
}
}  // namespace detail

template <PosteriorModel M>
DriftEstimate drift_full(const M& model, const ParamVector& theta) {
  return {log_posterior_grad_full(model, theta), static_cast<ItemCount>(model.item_count())};
}

/// prior grad + (N/n) sum over the batch.
template <PosteriorModel M>
DriftEstimate drift_subsampled(const M& model, const ParamVector& theta,
                               std::span<const std::size_t> tau) {
  detail::check_batch(tau, model.item_count());
  const double w = static_cast<double>(model.item_count()) / static_cast<double>(tau.size());
  ParamVector drift = model.prior_grad(theta);
  for (auto i : tau) model.accumulate_item_grad(i, theta, w, drift);
  return {std::move(drift), static_cast<ItemCount>(tau.size())};
}

template <PosteriorModel M>
TaylorCenter taylor_center(const M& model, const ParamVector& theta0) {
  require(theta0.allFinite(), "taylor_center: non-finite centre");
  const auto d = theta0.size();
  TaylorCenter c{theta0, ParamVector::Zero(d), Matrix::Zero(d, d),
                 static_cast<ItemCount>(model.item_count())};
  for (std::size_t i = 0; i < model.item_count(); ++i) {
    model.accumulate_item_grad(i, theta0, 1.0, c.G0);
    model.accumulate_item_hessian(i, theta0, 1.0, c.H0);
  }
  // Symmetrise away summation-order asymmetry.
  c.H0 = 0.5 * (c.H0 + c.H0.transpose()).eval();
  if (!c.G0.allFinite() || !c.H0.allFinite()) throw NumericalError("taylor_center: non-finite sums");
  return c;
}

/// prior grad + G0 + H0 (theta - theta0) + (N/n) sum over the batch of the
/// per-item Taylor remainder.
template <PosteriorModel M>
DriftEstimate drift_taylor(const M& model, const TaylorCenter& center, const ParamVector& theta,
                           std::span<const std::size_t> tau) {
  detail::check_batch(tau, model.item_count());
  const double w = static_cast<double>(model.item_count()) / static_cast<double>(tau.size());
  const ParamVector delta = theta - center.theta0;
  ParamVector remainder = ParamVector::Zero(theta.size());
  ParamVector item(theta.size());
  for (auto i : tau) {
    item.setZero();
    model.accumulate_item_grad(i, theta, 1.0, item);
    model.accumulate_item_grad(i, center.theta0, -1.0, item);
    model.accumulate_item_hessian_vector(i, center.theta0, delta, -1.0, item);
    remainder += item;
  }
  ParamVector drift = model.prior_grad(theta);
  drift += center.G0;
  drift.noalias() += center.H0 * delta;
  drift += w * remainder;
  return {std::move(drift), static_cast<ItemCount>(2 * tau.size())};
}

/// Taylor estimator inside the ball |theta - theta0| <= radius, standard
/// subsampling outside it.
template <PosteriorModel M>
DriftEstimate drift_switched(const M& model, const TaylorCenter& center, const ParamVector& theta,
                             std::span<const std::size_t> tau, double radius) {
  require(radius >= 0 && !std::isnan(radius), "drift_switched: radius must be >= 0");
  if ((theta - center.theta0).norm() <= radius) return drift_taylor(model, center, theta, tau);
  return drift_subsampled(model, theta, tau);
}

enum class EstimatorKind { full, subsample, taylor, switched };

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::taylor;
  double radius = std::numeric_limits<double>::infinity();

  bool uses_batches() const { return kind != EstimatorKind::full; }
  bool needs_center() const {
    return kind == EstimatorKind::taylor || kind == EstimatorKind::switched;
  }
};

/// Accepts `full`, `subsample`, `taylor`, `switched` (radius = inf) and `switched(r)`.
inline EstimatorConfig parse_estimator(std::string_view s) {
  if (s == "full") return {EstimatorKind::full};
  if (s == "subsample") return {EstimatorKind::subsample};
  if (s == "taylor") return {EstimatorKind::taylor};
  if (s == "switched") return {EstimatorKind::switched};
  constexpr std::string_view prefix = "switched(";
  if (s.starts_with(prefix) && s.ends_with(")")) {
    const auto inner = s.substr(prefix.size(), s.size() - prefix.size() - 1);
    const double r = inner == "inf" ? std::numeric_limits<double>::infinity() : parse_double(inner);
    require(r >= 0, "switched radius must be >= 0");
    return {EstimatorKind::switched, r};
  }
  throw std::invalid_argument("unknown estimator '" + std::string(s) + "'");
}

inline std::string to_string(const EstimatorConfig& c) {
  switch (c.kind) {
    case EstimatorKind::full: return "full";
    case EstimatorKind::subsample: return "subsample";
    case EstimatorKind::taylor: return "taylor";
    case EstimatorKind::switched:
      return std::isinf(c.radius) ? "switched(inf)" : "switched(" + format_double(c.radius) + ")";
  }
  return "?";
}

/// A model bound to an estimator choice, batch size and (if needed) a centre.
template <PosteriorModel M>
class DriftEstimator {
 public:
  DriftEstimator(const M& model, EstimatorConfig config, std::size_t batch_size,
                 std::optional<TaylorCenter> center = std::nullopt)
      : model_(&model), config_(config), batch_size_(batch_size), center_(std::move(center)) {
    if (config_.uses_batches()) require(batch_size_ >= 1, "DriftEstimator: batch size must be >= 1");
    if (config_.needs_center() && !center_) {
      throw std::invalid_argument("DriftEstimator: estimator '" + to_string(config_) +
                                  "' needs a Taylor centre");
    }
  }

  const M& model() const { return *model_; }
  const EstimatorConfig& config() const { return config_; }
  std::size_t batch_size() const { return batch_size_; }
  std::size_t item_count() const { return model_->item_count(); }
  std::size_t dimension() const { return model_->dimension(); }
  bool uses_batches() const { return config_.uses_batches(); }
  const std::optional<TaylorCenter>& center() const { return center_; }

  /// One-off cost outside the sampling loop (the centre build).
  ItemCount setup_cost() const { return center_ ? center_->build_cost : 0; }

  DriftEstimate operator()(const ParamVector& theta, std::span<const std::size_t> tau) const {
    switch (config_.kind) {
      case EstimatorKind::full: return drift_full(*model_, theta);
      case EstimatorKind::subsample: return drift_subsampled(*model_, theta, tau);
      case EstimatorKind::taylor: return drift_taylor(*model_, *center_, theta, tau);
      case EstimatorKind::switched:
        return drift_switched(*model_, *center_, theta, tau, config_.radius);
    }
    throw std::logic_error("unreachable estimator kind");
  }

 private:
  const M* model_;
  EstimatorConfig config_;
  std::size_t batch_size_;
  std::optional<TaylorCenter> center_;
};

}  // namespace mlsgld
