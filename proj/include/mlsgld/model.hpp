#pragma once

// Posterior models: the contract used by every sampler, Bayesian logistic
// regression, a conjugate Gaussian toy, Newton MAP, and the test function g.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <utility>

#include "mlsgld/dataset.hpp"
#include "mlsgld/types.hpp"

namespace mlsgld {

/// Posterior pi(theta | X) ∝ pi(theta) prod_i pi(x_i | theta), exposed item by item.
///
/// The accumulate_* members add `weight * (...)` into `acc` so hot loops
/// avoid temporaries; the value-returning helpers below are built on them.
template <typename M>
concept PosteriorModel = requires(const M& m, const ParamVector& theta, std::size_t i, double w,
                                  ParamVector& acc) {
  { m.dimension() } -> std::convertible_to<std::size_t>;
  { m.item_count() } -> std::convertible_to<std::size_t>;
  { m.log_prior(theta) } -> std::convertible_to<double>;
  { m.prior_grad(theta) } -> std::convertible_to<ParamVector>;
  { m.prior_hessian(theta) } -> std::convertible_to<Matrix>;
  { m.item_log_density(i, theta) } -> std::convertible_to<double>;
  m.accumulate_item_grad(i, theta, w, acc);
  m.accumulate_item_hessian(i, theta, w, std::declval<Matrix&>());
  // acc += w * H_i(theta) * v
  m.accumulate_item_hessian_vector(i, theta, theta, w, acc);
};

namespace detail {
inline void check_index(std::size_t i, std::size_t N) {
  if (i >= N) {
    throw std::out_of_range("item index " + std::to_string(i) + " out of range [0, " +
                            std::to_string(N) + ")");
  }
}

inline double log_sigmoid(double z) {
  return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}
}  // namespace detail

/// Bayesian logistic regression, p(y_i | iota_i, theta) = f(y_i theta^T iota_i),
/// with a standard Gaussian prior on theta.
class LogisticModel {
  using ConstRow = RowMatrix::ConstRowXpr;
  ConstRow row(std::size_t i) const { return data_.covariates.row(static_cast<Eigen::Index>(i)); }

 public:
  explicit LogisticModel(Dataset data) : data_(std::move(data)) {
    require(data_.kind == DataKind::logistic, "LogisticModel: dataset is not logistic");
    validate(data_);
  }

  std::size_t dimension() const { return static_cast<std::size_t>(data_.covariates.cols()); }
  std::size_t item_count() const { return static_cast<std::size_t>(data_.covariates.rows()); }
  const Dataset& data() const { return data_; }

  double log_prior(const ParamVector& theta) const { return -0.5 * theta.squaredNorm(); }
  ParamVector prior_grad(const ParamVector& theta) const { return -theta; }
  Matrix prior_hessian(const ParamVector& theta) const {
    return -Matrix::Identity(theta.size(), theta.size());
  }

  double item_log_density(std::size_t i, const ParamVector& theta) const {
    detail::check_index(i, item_count());
    return detail::log_sigmoid(margin(i, theta));
  }

  void accumulate_item_grad(std::size_t i, const ParamVector& theta, double w,
                            ParamVector& acc) const {
    detail::check_index(i, item_count());
    const double y = data_.labels[static_cast<Eigen::Index>(i)];
    // d/dtheta log f(z) = y iota (1 - f(z)) = y iota f(-z)
    const double s = w * y * detail::sigmoid(-margin(i, theta));
    acc.noalias() += s * row(i).transpose();
  }

  void accumulate_item_hessian(std::size_t i, const ParamVector& theta, double w,
                               Matrix& acc) const {
    detail::check_index(i, item_count());
    const double f = detail::sigmoid(margin(i, theta));
    const auto r = row(i);
    acc.noalias() -= (w * f * (1.0 - f)) * (r.transpose() * r);
  }

  void accumulate_item_hessian_vector(std::size_t i, const ParamVector& theta,
                                      const ParamVector& v, double w, ParamVector& acc) const {
    detail::check_index(i, item_count());
    const double f = detail::sigmoid(margin(i, theta));
    const auto r = row(i);
    acc.noalias() -= (w * f * (1.0 - f) * r.dot(v)) * r.transpose();
  }

 private:
  double margin(std::size_t i, const ParamVector& theta) const {
    return data_.labels[static_cast<Eigen::Index>(i)] * row(i).dot(theta);
  }

  Dataset data_;
};

/// Conjugate toy: theta ~ N(0, I), x_i | theta ~ N(theta, I). The posterior is
/// N(sum_i x_i / (N+1), I / (N+1)). An empty observation set gives the prior.
class GaussianModel {
 public:
  explicit GaussianModel(RowMatrix observations) : obs_(std::move(observations)) {
    require(obs_.cols() >= 1, "GaussianModel: dimension must be >= 1");
    require(obs_.allFinite(), "GaussianModel: non-finite observation");
  }

  explicit GaussianModel(const Dataset& data) : GaussianModel(data.covariates) {
    require(data.kind == DataKind::gaussian, "GaussianModel: dataset is not gaussian");
  }

  /// Prior-only model of dimension d.
  static GaussianModel prior_only(std::size_t d) {
    return GaussianModel(RowMatrix(0, static_cast<Eigen::Index>(d)));
  }

  std::size_t dimension() const { return static_cast<std::size_t>(obs_.cols()); }
  std::size_t item_count() const { return static_cast<std::size_t>(obs_.rows()); }
  const RowMatrix& observations() const { return obs_; }

  double log_prior(const ParamVector& theta) const { return -0.5 * theta.squaredNorm(); }
  ParamVector prior_grad(const ParamVector& theta) const { return -theta; }
  Matrix prior_hessian(const ParamVector& theta) const {
    return -Matrix::Identity(theta.size(), theta.size());
  }

  double item_log_density(std::size_t i, const ParamVector& theta) const {
    detail::check_index(i, item_count());
    return -0.5 * (obs_.row(static_cast<Eigen::Index>(i)).transpose() - theta).squaredNorm();
  }

  void accumulate_item_grad(std::size_t i, const ParamVector& theta, double w,
                            ParamVector& acc) const {
    detail::check_index(i, item_count());
    acc.noalias() += w * (obs_.row(static_cast<Eigen::Index>(i)).transpose() - theta);
  }

  void accumulate_item_hessian(std::size_t i, const ParamVector&, double w, Matrix& acc) const {
    detail::check_index(i, item_count());
    acc.diagonal().array() -= w;
  }

  void accumulate_item_hessian_vector(std::size_t i, const ParamVector&, const ParamVector& v,
                                      double w, ParamVector& acc) const {
    detail::check_index(i, item_count());
    acc.noalias() -= w * v;
  }

  ParamVector posterior_mean() const {
    ParamVector sum = ParamVector::Zero(obs_.cols());
    for (Eigen::Index i = 0; i < obs_.rows(); ++i) sum += obs_.row(i).transpose();
    return sum / static_cast<double>(item_count() + 1);
  }

  double posterior_variance() const { return 1.0 / static_cast<double>(item_count() + 1); }

 private:
  RowMatrix obs_;
};

static_assert(PosteriorModel<LogisticModel>);
static_assert(PosteriorModel<GaussianModel>);

template <PosteriorModel M>
ParamVector item_grad(const M& model, std::size_t i, const ParamVector& theta) {
  ParamVector g = ParamVector::Zero(theta.size());
  model.accumulate_item_grad(i, theta, 1.0, g);
  return g;
}

template <PosteriorModel M>
Matrix item_hessian(const M& model, std::size_t i, const ParamVector& theta) {
  Matrix h = Matrix::Zero(theta.size(), theta.size());
  model.accumulate_item_hessian(i, theta, 1.0, h);
  return h;
}

/// Gradient of the full log posterior: prior plus every item, summed in index order.
template <PosteriorModel M>
ParamVector log_posterior_grad_full(const M& model, const ParamVector& theta) {
  require(static_cast<std::size_t>(theta.size()) == model.dimension(),
          "log_posterior_grad_full: dimension mismatch");
  ParamVector g = model.prior_grad(theta);
  for (std::size_t i = 0; i < model.item_count(); ++i) model.accumulate_item_grad(i, theta, 1.0, g);
  return g;
}

template <PosteriorModel M>
Matrix log_posterior_hessian_full(const M& model, const ParamVector& theta) {
  Matrix h = model.prior_hessian(theta);
  for (std::size_t i = 0; i < model.item_count(); ++i)
    model.accumulate_item_hessian(i, theta, 1.0, h);
  return h;
}

/// Unnormalised log posterior density.
template <PosteriorModel M>
double log_posterior(const M& model, const ParamVector& theta) {
  double lp = model.log_prior(theta);
  for (std::size_t i = 0; i < model.item_count(); ++i) lp += model.item_log_density(i, theta);
  return lp;
}

struct MapEstimate {
  ParamVector theta0;
  double gradient_norm = 0.0;
  int iterations = 0;
};

/// Plain Newton-Raphson on the full log posterior, no line search.
template <PosteriorModel M>
MapEstimate map_newton(const M& model, ParamVector theta, double tol = 1e-8, int max_iter = 100) {
  require(tol > 0, "map_newton: tol must be > 0");
  require(max_iter >= 1, "map_newton: max_iter must be >= 1");
  require(static_cast<std::size_t>(theta.size()) == model.dimension(),
          "map_newton: dimension mismatch");
  for (int it = 0;; ++it) {
    const ParamVector grad = log_posterior_grad_full(model, theta);
    const double gnorm = grad.norm();
    if (!std::isfinite(gnorm)) throw NumericalError("map_newton: non-finite gradient");
    if (gnorm <= tol) return {theta, gnorm, it};
    if (it == max_iter) {
      throw NumericalError("map_newton: no convergence after " + std::to_string(max_iter) +
                           " iterations (|grad| = " + std::to_string(gnorm) + ")");
    }
    Eigen::FullPivLU<Matrix> lu(log_posterior_hessian_full(model, theta));
    if (!lu.isInvertible()) throw NumericalError("map_newton: singular Hessian");
    theta -= lu.solve(grad);
  }
}

/// g(theta) = |theta - center|^2.
inline double g_quadratic(const ParamVector& theta, const ParamVector& center) {
  require_same_dim(theta, center, "g_quadratic");
  return (theta - center).squaredNorm();
}

/// Squared distance to a fixed centre, as a callable quantity of interest.
struct QuadraticDistance {
  ParamVector center;
  double operator()(const ParamVector& theta) const { return g_quadratic(theta, center); }
};

}  // namespace mlsgld
