#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gclrec/rng.hpp"

namespace gclrec {

/// Row-major dense matrix; embedding rows are contiguous.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

/// Named parameter tensor with a paired gradient accumulator. Gradients
/// accumulate additively across loss terms; only an optimizer step clears
/// them.
struct ParamTensor {
  std::string name;
  std::vector<std::int64_t> shape;
  Vec values;
  Vec grad;

  ParamTensor() = default;
  ParamTensor(std::string n, std::vector<std::int64_t> s)
      : name(std::move(n)), shape(std::move(s)) {
    std::int64_t total = 1;
    for (const std::int64_t d : shape) {
      if (d <= 0)
        throw std::invalid_argument("ParamTensor " + name +
                                    ": zero or negative dimension");
      total *= d;
    }
    values = Vec::Zero(total);
    grad = Vec::Zero(total);
  }

  std::int64_t size() const { return values.size(); }

  Eigen::Map<Mat> matrix() {
    if (shape.size() != 2)
      throw std::logic_error("ParamTensor " + name + ": not 2-D");
    return Eigen::Map<Mat>(values.data(), shape[0], shape[1]);
  }
  Eigen::Map<const Mat> matrix() const {
    if (shape.size() != 2)
      throw std::logic_error("ParamTensor " + name + ": not 2-D");
    return Eigen::Map<const Mat>(values.data(), shape[0], shape[1]);
  }
  Eigen::Map<Mat> grad_matrix() {
    return Eigen::Map<Mat>(grad.data(), shape[0], shape[1]);
  }

  void zero_grad() { grad.setZero(); }
};

struct ParamStore {
  std::vector<ParamTensor> tensors;

  ParamTensor& add(std::string name, std::vector<std::int64_t> shape) {
    tensors.emplace_back(std::move(name), std::move(shape));
    return tensors.back();
  }
  ParamTensor& operator[](std::size_t i) { return tensors[i]; }
  const ParamTensor& operator[](std::size_t i) const { return tensors[i]; }
  std::size_t size() const { return tensors.size(); }

  ParamTensor& find(const std::string& name) {
    for (ParamTensor& t : tensors)
      if (t.name == name) return t;
    throw std::out_of_range("ParamStore: no tensor named " + name);
  }
  void zero_grad() {
    for (ParamTensor& t : tensors) t.zero_grad();
  }
};

/// Fills a tensor i.i.d. uniform on [-b, b], b = sqrt(6 / (fan_in + fan_out)).
/// fan_in/fan_out are the first two dimensions (a 1-D tensor uses its length
/// for both).
inline ParamTensor xavier_init(std::string name, std::vector<std::int64_t> shape,
                               Rng& rng) {
  if (shape.empty()) throw std::invalid_argument("xavier_init: empty shape");
  ParamTensor t(std::move(name), std::move(shape));
  const double fan_in = static_cast<double>(t.shape[0]);
  const double fan_out =
      static_cast<double>(t.shape.size() > 1 ? t.shape[1] : t.shape[0]);
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (std::int64_t k = 0; k < t.size(); ++k)
    t.values[k] = rng.uniform(-bound, bound);
  return t;
}

inline double xavier_bound(std::int64_t fan_in, std::int64_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

/// Standard bias-corrected Adam over a ParamStore. One moment pair per
/// tensor, one shared step counter.
class Adam {
public:
  Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  std::int64_t step_count() const { return t_; }

  /// Applies one update from the accumulated gradients, then zeroes them.
  void step(ParamStore& params) {
    if (m_.empty()) {
      for (const ParamTensor& p : params.tensors) {
        m_.emplace_back(Vec::Zero(p.size()));
        v_.emplace_back(Vec::Zero(p.size()));
      }
    }
    if (m_.size() != params.size())
      throw std::logic_error("Adam: parameter count changed mid-run");
    for (const ParamTensor& p : params.tensors)
      if (!p.grad.allFinite())
        throw std::runtime_error("Adam: non-finite gradient in " + p.name);

    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      ParamTensor& p = params.tensors[i];
      Vec& m = m_[i];
      Vec& v = v_[i];
      for (std::int64_t k = 0; k < p.size(); ++k) {
        const double g = p.grad[k];
        m[k] = beta1_ * m[k] + (1.0 - beta1_) * g;
        v[k] = beta2_ * v[k] + (1.0 - beta2_) * g * g;
        const double mhat = m[k] / bc1;
        const double vhat = v[k] / bc2;
        p.values[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
      p.zero_grad();
    }
  }

private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<Vec> m_;
  std::vector<Vec> v_;
};

/// L2 penalty lambda * sum ||theta||^2 over all tensors; adds 2*lambda*theta
/// to each gradient accumulator and returns the loss value.
inline double l2_penalty(ParamStore& params, double lambda_reg) {
  if (lambda_reg < 0.0) throw std::invalid_argument("l2_penalty: lambda < 0");
  double loss = 0.0;
  for (ParamTensor& p : params.tensors) {
    loss += lambda_reg * p.values.squaredNorm();
    if (lambda_reg != 0.0) p.grad += (2.0 * lambda_reg) * p.values;
  }
  return loss;
}

struct FdiffReport {
  double max_rel_err = 0.0;
  std::int64_t worst_coord = -1;
  std::int64_t coords_checked = 0;
};

/// Central-difference check of an analytic gradient. `loss` re-evaluates the
/// loss at the current values of `theta` (which is perturbed in place and
/// restored). Checks every coordinate, or `max_coords` randomly chosen ones
/// when an rng is given. Relative error uses a small floor so exact zero
/// gradients compare cleanly.
inline FdiffReport finite_diff_check(const std::function<double()>& loss,
                                     std::span<double> theta,
                                     std::span<const double> analytic_grad,
                                     double h, std::int64_t max_coords = -1,
                                     Rng* rng = nullptr) {
  if (theta.size() != analytic_grad.size())
    throw std::invalid_argument("finite_diff_check: grad size mismatch");
  const std::int64_t n = static_cast<std::int64_t>(theta.size());
  std::vector<std::int64_t> coords;
  if (max_coords > 0 && max_coords < n && rng) {
    for (std::int64_t k = 0; k < max_coords; ++k)
      coords.push_back(
          static_cast<std::int64_t>(rng->below(static_cast<std::uint64_t>(n))));
  } else {
    coords.resize(static_cast<std::size_t>(n));
    for (std::int64_t k = 0; k < n; ++k) coords[static_cast<std::size_t>(k)] = k;
  }

  FdiffReport report;
  for (const std::int64_t k : coords) {
    const double saved = theta[static_cast<std::size_t>(k)];
    theta[static_cast<std::size_t>(k)] = saved + h;
    const double up = loss();
    theta[static_cast<std::size_t>(k)] = saved - h;
    const double down = loss();
    theta[static_cast<std::size_t>(k)] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = analytic_grad[static_cast<std::size_t>(k)];
    const double denom =
        std::max({std::abs(numeric), std::abs(analytic), 1e-3});
    const double rel = std::abs(numeric - analytic) / denom;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_coord = k;
    }
    report.coords_checked++;
  }
  return report;
}

}  // namespace gclrec
