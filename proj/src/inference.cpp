// Copyright 2026 The prefopt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "prefopt/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Cholesky>

#include "prefopt/errors.hpp"

namespace prefopt {
namespace {

constexpr std::size_t kElboWindow = 100;

Eigen::MatrixXd standard_normal(std::size_t rows, std::size_t cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd z(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    for (Eigen::Index c = 0; c < z.cols(); ++c) z(r, c) = normal(rng);
  }
  return z;
}

// Adam ascent state for a flat parameter vector.
class AdamAscent {
 public:
  AdamAscent(std::size_t size, double learning_rate)
      : m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))),
        v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))),
        lr_(learning_rate) {}

  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad) {
    ++t_;
    m_ = kBeta1 * m_ + (1.0 - kBeta1) * grad;
    v_ = kBeta2 * v_ + (1.0 - kBeta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    theta.array() += lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + kEps);
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  double lr_;
  long t_ = 0;
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double inverse_softplus(double y) {
  if (!(y > 0.0)) throw InvalidArgument("softplus is only invertible on positive values");
  return y > 30.0 ? y : std::log(std::expm1(y));
}

void FitConfig::validate() const {
  if (mc_samples_per_step == 0) throw InvalidArgument("mc_samples_per_step must be positive");
  if (steps == 0) throw InvalidArgument("steps must be positive");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
  if (!(length_scale_penalty_weight >= 0.0)) {
    throw InvalidArgument("length_scale_penalty_weight must be nonnegative");
  }
  if (!(fixed_delta >= 0.0)) throw InvalidArgument("fixed_delta must be nonnegative");
  if (learn_delta && !(initial_delta > 0.0)) throw InvalidArgument("initial_delta must be positive");
  if (!(initial_length_scale_fraction > 0.0)) {
    throw InvalidArgument("initial_length_scale_fraction must be positive");
  }
  if (!(initial_signal_variance > 0.0)) throw InvalidArgument("initial_signal_variance must be positive");
}

double kl_gaussian(const VariationalPosterior& q, const Eigen::MatrixXd& prior_cov) {
  const auto n = q.mean.size();
  if (prior_cov.rows() != n || prior_cov.cols() != n || q.chol_factor.rows() != n ||
      q.chol_factor.cols() != n) {
    throw InvalidArgument("KL operands have mismatched dimensions");
  }
  if (n == 0) return 0.0;
  const double scale = prior_cov.diagonal().mean();
  const auto chol = jittered_cholesky(prior_cov, scale);
  const auto lk = chol.llt.matrixL();
  const Eigen::MatrixXd a = lk.solve(q.chol_factor);
  const Eigen::VectorXd b = lk.solve(q.mean);
  double log_det_prior = 0.0;
  double log_det_q = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    log_det_prior += 2.0 * std::log(chol.llt.matrixLLT()(i, i));
    log_det_q += 2.0 * std::log(std::abs(q.chol_factor(i, i)));
  }
  const double kl = 0.5 * (a.squaredNorm() + b.squaredNorm() - static_cast<double>(n) +
                           log_det_prior - log_det_q);
  return std::max(kl, 0.0);
}

ElboObjective::ElboObjective(const CompiledDataset& data, Eigen::MatrixXd inputs, bool learn_delta,
                             double fixed_delta, ElboParameterization parameterization)
    : data_(data),
      inputs_(std::move(inputs)),
      n_(static_cast<std::size_t>(inputs_.rows())),
      d_(static_cast<std::size_t>(inputs_.cols())),
      learn_delta_(learn_delta),
      fixed_delta_(fixed_delta),
      parameterization_(parameterization) {
  if (n_ != data_.num_inputs()) {
    throw InvalidArgument("ELBO inputs do not match the dataset's distinct inputs");
  }
}

std::size_t ElboObjective::num_parameters() const { return delta_offset() + 1; }

Eigen::VectorXd ElboObjective::pack(const VariationalPosterior& q, const KernelParams& kernel,
                                    TieThreshold delta) const {
  if (q.size() != n_ || kernel.dim() != d_) throw InvalidArgument("parameter shapes do not match");
  Eigen::VectorXd theta(static_cast<Eigen::Index>(num_parameters()));
  VariationalPosterior block = q;
  if (parameterization_ == ElboParameterization::kWhitened && n_ > 0) {
    const auto chol = jittered_cholesky(kernel_matrix(kernel, inputs_, inputs_), kernel.signal_variance);
    const auto r = chol.llt.matrixL();
    block.mean = r.solve(q.mean);
    block.chol_factor = r.solve(q.chol_factor);
    block.chol_factor.triangularView<Eigen::StrictlyUpper>().setZero();
  }
  theta.head(static_cast<Eigen::Index>(n_)) = block.mean;
  auto at = static_cast<Eigen::Index>(chol_offset());
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(n_); ++j) {
    for (Eigen::Index i = j; i < static_cast<Eigen::Index>(n_); ++i) {
      const double v = block.chol_factor(i, j);
      if (i == j && !(v > 0.0)) throw InvalidArgument("Cholesky factor diagonal must be positive");
      theta[at++] = i == j ? std::log(v) : v;
    }
  }
  theta.segment(static_cast<Eigen::Index>(length_scale_offset()), static_cast<Eigen::Index>(d_)) =
      kernel.length_scales.array().log().matrix();
  theta[static_cast<Eigen::Index>(signal_variance_offset())] = std::log(kernel.signal_variance);
  theta[static_cast<Eigen::Index>(delta_offset())] =
      learn_delta_ ? inverse_softplus(std::max(delta.delta, 1e-12)) : 0.0;
  return theta;
}

VariationalPosterior ElboObjective::unpack_posterior(const Eigen::VectorXd& theta) const {
  VariationalPosterior q = unpack_block(theta);
  if (parameterization_ == ElboParameterization::kDirect || n_ == 0) return q;
  const KernelParams kernel = unpack_kernel(theta);
  const auto chol = jittered_cholesky(kernel_matrix(kernel, inputs_, inputs_), kernel.signal_variance);
  const Eigen::MatrixXd r = chol.llt.matrixL();
  q.mean = r.triangularView<Eigen::Lower>() * q.mean;
  q.chol_factor = r.triangularView<Eigen::Lower>() * q.chol_factor;
  return q;
}

VariationalPosterior ElboObjective::unpack_block(const Eigen::VectorXd& theta) const {
  const auto n = static_cast<Eigen::Index>(n_);
  VariationalPosterior q{theta.head(n), Eigen::MatrixXd::Zero(n, n)};
  auto at = static_cast<Eigen::Index>(chol_offset());
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      q.chol_factor(i, j) = i == j ? std::exp(theta[at]) : theta[at];
      ++at;
    }
  }
  return q;
}

KernelParams ElboObjective::unpack_kernel(const Eigen::VectorXd& theta) const {
  KernelParams k;
  k.length_scales = theta.segment(static_cast<Eigen::Index>(length_scale_offset()),
                                  static_cast<Eigen::Index>(d_))
                        .array()
                        .exp()
                        .matrix();
  k.signal_variance = std::exp(theta[static_cast<Eigen::Index>(signal_variance_offset())]);
  return k;
}

TieThreshold ElboObjective::unpack_delta(const Eigen::VectorXd& theta) const {
  if (!learn_delta_) return {fixed_delta_};
  return {softplus(theta[static_cast<Eigen::Index>(delta_offset())])};
}

double ElboObjective::evaluate(const Eigen::VectorXd& theta, const Eigen::MatrixXd& noise,
                               Eigen::VectorXd* grad) const {
  if (theta.size() != static_cast<Eigen::Index>(num_parameters())) {
    throw InvalidArgument("parameter vector has the wrong length");
  }
  if (noise.cols() != static_cast<Eigen::Index>(n_) || noise.rows() < 1) {
    throw InvalidArgument("noise matrix has the wrong shape");
  }
  return parameterization_ == ElboParameterization::kDirect ? evaluate_direct(theta, noise, grad)
                                                            : evaluate_whitened(theta, noise, grad);
}

void ElboObjective::kernel_gradient(const Eigen::MatrixXd& k_bar, const Eigen::MatrixXd& k,
                                    double jitter, const KernelParams& kernel,
                                    Eigen::VectorXd& grad) const {
  const auto n = static_cast<Eigen::Index>(n_);
  for (std::size_t dim = 0; dim < d_; ++dim) {
    const auto c = static_cast<Eigen::Index>(dim);
    const double l = kernel.length_scales[c];
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double diff = (inputs_(i, c) - inputs_(j, c)) / l;
        acc += k_bar(i, j) * k(i, j) * diff * diff;
      }
    }
    grad[static_cast<Eigen::Index>(length_scale_offset()) + c] = acc;
  }
  // The jitter scales with the signal variance, so d(K + eps I)/d log s^2 = K + eps I.
  grad[static_cast<Eigen::Index>(signal_variance_offset())] =
      (k_bar.array() * k.array()).sum() + jitter * k_bar.trace();
}

double ElboObjective::evaluate_direct(const Eigen::VectorXd& theta, const Eigen::MatrixXd& noise,
                                      Eigen::VectorXd* grad) const {
  const auto n = static_cast<Eigen::Index>(n_);
  const auto q = unpack_block(theta);
  const auto kernel = unpack_kernel(theta);
  const auto delta = unpack_delta(theta);
  const double samples = static_cast<double>(noise.rows());

  // Expected log-likelihood via reparameterized samples f = mu + L eps, one
  // sample per column.
  Eigen::MatrixXd f = q.chol_factor.triangularView<Eigen::Lower>() * noise.transpose();
  f.colwise() += q.mean;
  Eigen::MatrixXd g_f;
  if (grad != nullptr) g_f = Eigen::MatrixXd::Zero(n, noise.rows());
  double g_delta = 0.0;
  double expected_ll = 0.0;
  for (Eigen::Index s = 0; s < noise.rows(); ++s) {
    if (grad != nullptr) {
      expected_ll += data_.log_likelihood(f.col(s), delta, g_f.col(s), &g_delta);
    } else {
      expected_ll += data_.log_likelihood(f.col(s), delta);
    }
  }
  expected_ll /= samples;

  // KL(q || N(0, K + eps I)).
  const Eigen::MatrixXd k = kernel_matrix(kernel, inputs_, inputs_);
  const auto chol = jittered_cholesky(k, kernel.signal_variance);
  const auto lk = chol.llt.matrixL();
  const Eigen::MatrixXd a = lk.solve(q.chol_factor);
  const Eigen::VectorXd b = lk.solve(q.mean);
  double log_det_prior = 0.0;
  double log_det_q = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    log_det_prior += 2.0 * std::log(chol.llt.matrixLLT()(i, i));
    log_det_q += 2.0 * std::log(q.chol_factor(i, i));
  }
  const double kl = 0.5 * (a.squaredNorm() + b.squaredNorm() - static_cast<double>(n) +
                           log_det_prior - log_det_q);
  const double elbo = expected_ll - kl;

  if (grad == nullptr) return elbo;

  grad->setZero(static_cast<Eigen::Index>(num_parameters()));
  const auto lk_t = chol.llt.matrixU();
  const Eigen::VectorXd alpha = lk_t.solve(b);  // K^-1 mu
  const Eigen::MatrixXd beta = lk_t.solve(a);   // K^-1 L

  grad->head(n) = g_f.rowwise().sum() / samples - alpha;

  const Eigen::MatrixXd g_l = g_f * noise / samples - beta;
  auto at = static_cast<Eigen::Index>(chol_offset());
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      if (i == j) {
        const double lii = q.chol_factor(i, i);
        (*grad)[at] = (g_l(i, i) + 1.0 / lii) * lii;
      } else {
        (*grad)[at] = g_l(i, j);
      }
      ++at;
    }
  }

  // dKL/dK = 0.5 (K^-1 - K^-1 Sigma K^-1 - K^-1 mu mu^T K^-1)
  //        = 0.5 R^-T (I - A A^T - b b^T) R^-1  with K = R R^T.
  Eigen::MatrixXd inner = Eigen::MatrixXd::Identity(n, n);
  inner.selfadjointView<Eigen::Lower>().rankUpdate(a, -1.0);
  inner.selfadjointView<Eigen::Lower>().rankUpdate(b, -1.0);
  inner = inner.selfadjointView<Eigen::Lower>();
  const Eigen::MatrixXd left = lk_t.solve(inner);
  const Eigen::MatrixXd dkl_dk = 0.5 * lk_t.solve(left.transpose());
  kernel_gradient(-dkl_dk, k, chol.jitter, kernel, *grad);
  if (learn_delta_) {
    const double eta = theta[static_cast<Eigen::Index>(delta_offset())];
    (*grad)[static_cast<Eigen::Index>(delta_offset())] = g_delta / samples * sigmoid(eta);
  }
  return elbo;
}

double ElboObjective::evaluate_whitened(const Eigen::VectorXd& theta, const Eigen::MatrixXd& noise,
                                        Eigen::VectorXd* grad) const {
  const auto n = static_cast<Eigen::Index>(n_);
  const auto w = unpack_block(theta);
  const auto kernel = unpack_kernel(theta);
  const auto delta = unpack_delta(theta);
  const double samples = static_cast<double>(noise.rows());

  const Eigen::MatrixXd k = kernel_matrix(kernel, inputs_, inputs_);
  const auto chol = jittered_cholesky(k, kernel.signal_variance);
  const Eigen::MatrixXd r = chol.llt.matrixL();

  // u = m + S eps and f = R u, one sample per column.
  Eigen::MatrixXd u = w.chol_factor.triangularView<Eigen::Lower>() * noise.transpose();
  u.colwise() += w.mean;
  const Eigen::MatrixXd f = r.triangularView<Eigen::Lower>() * u;
  Eigen::MatrixXd g_f;
  if (grad != nullptr) g_f = Eigen::MatrixXd::Zero(n, noise.rows());
  double g_delta = 0.0;
  double expected_ll = 0.0;
  for (Eigen::Index s = 0; s < noise.rows(); ++s) {
    if (grad != nullptr) {
      expected_ll += data_.log_likelihood(f.col(s), delta, g_f.col(s), &g_delta);
    } else {
      expected_ll += data_.log_likelihood(f.col(s), delta);
    }
  }
  expected_ll /= samples;

  // KL(N(m, S S^T) || N(0, I)).
  double log_det_s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) log_det_s += 2.0 * std::log(w.chol_factor(i, i));
  const double kl = 0.5 * (w.chol_factor.squaredNorm() + w.mean.squaredNorm() -
                           static_cast<double>(n) - log_det_s);
  const double elbo = expected_ll - kl;
  if (grad == nullptr) return elbo;

  grad->setZero(static_cast<Eigen::Index>(num_parameters()));
  const Eigen::MatrixXd rt_g = r.transpose().triangularView<Eigen::Upper>() * g_f;
  grad->head(n) = rt_g.rowwise().sum() / samples - w.mean;
  const Eigen::MatrixXd g_s = rt_g * noise / samples - w.chol_factor;
  auto at = static_cast<Eigen::Index>(chol_offset());
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      if (i == j) {
        const double sii = w.chol_factor(i, i);
        (*grad)[at] = (g_s(i, i) + 1.0 / sii) * sii;
      } else {
        (*grad)[at] = g_s(i, j);
      }
      ++at;
    }
  }

  // Reverse mode through R = chol(K + eps I): with R_bar the (lower) gradient
  // w.r.t. R, K_bar = R^-T Phi(R^T R_bar) R^-1, Phi keeping the lower
  // triangle with a halved diagonal.
  Eigen::MatrixXd r_bar = g_f * u.transpose() / samples;
  r_bar.triangularView<Eigen::StrictlyUpper>().setZero();
  Eigen::MatrixXd phi = r.transpose() * r_bar;
  phi.triangularView<Eigen::StrictlyUpper>().setZero();
  phi.diagonal() *= 0.5;
  const auto upper = r.transpose().triangularView<Eigen::Upper>();
  const Eigen::MatrixXd left = upper.solve(phi);
  const Eigen::MatrixXd k_bar_raw = upper.solve(left.transpose()).transpose();
  const Eigen::MatrixXd k_bar = 0.5 * (k_bar_raw + k_bar_raw.transpose());
  kernel_gradient(k_bar, k, chol.jitter, kernel, *grad);

  if (learn_delta_) {
    const double eta = theta[static_cast<Eigen::Index>(delta_offset())];
    (*grad)[static_cast<Eigen::Index>(delta_offset())] = g_delta / samples * sigmoid(eta);
  }
  return elbo;
}

double elbo_estimate(const VariationalPosterior& q, std::span<const Observation> data,
                     const CandidatePool& pool, const KernelParams& kernel, TieThreshold delta,
                     std::size_t n_mc, Rng& rng) {
  if (data.empty()) throw InvalidArgument("ELBO needs at least one observation");
  if (n_mc == 0) throw InvalidArgument("ELBO needs at least one Monte-Carlo sample");
  kernel.validate();
  delta.validate();
  const CompiledDataset compiled(data);
  if (q.size() != compiled.num_inputs()) {
    throw InvalidArgument("variational posterior does not cover the dataset's distinct inputs");
  }
  const ElboObjective objective(compiled, pool.rows(compiled.inputs()), false, delta.delta);
  const Eigen::VectorXd theta = objective.pack(q, kernel, delta);
  const Eigen::MatrixXd noise = standard_normal(n_mc, compiled.num_inputs(), rng);
  return objective.evaluate(theta, noise, nullptr);
}

KernelParams initial_kernel(const CandidatePool& pool, const FitConfig& config) {
  KernelParams k;
  k.signal_variance = config.initial_signal_variance;
  Eigen::VectorXd widths = pool.widths();
  for (Eigen::Index d = 0; d < widths.size(); ++d) {
    if (!(widths[d] > 0.0)) widths[d] = 1.0;
  }
  k.length_scales = config.initial_length_scale_fraction * widths;
  return k;
}

FitResult prior_model(const CandidatePool& pool, const FitConfig& config) {
  config.validate();
  FitResult out;
  out.kernel = initial_kernel(pool, config);
  out.initial_kernel = out.kernel;
  out.delta = {config.learn_delta ? config.initial_delta : config.fixed_delta};
  return out;
}

namespace {

// Carries the previous posterior over to a grown input set: inputs seen
// before keep their mean, new ones start at the previous predictive mean.
// When the old inputs are a prefix of the new ones the old factor is kept
// as the leading block.
void warm_start_posterior(const FitResult& previous, const CandidatePool& pool,
                          const std::vector<PoolIndex>& inputs, const KernelParams& kernel,
                          VariationalPosterior& q) {
  const std::size_t m = previous.inputs.size();
  if (m == 0 || previous.posterior.size() != m || m > inputs.size()) return;
  const Eigen::MatrixXd targets = pool.rows(inputs);
  const GaussianBelief predicted =
      posterior_predict(kernel, pool.rows(previous.inputs), previous.posterior, targets);
  q.mean = predicted.mean;
  if (!std::equal(previous.inputs.begin(), previous.inputs.end(), inputs.begin())) return;
  const auto mm = static_cast<Eigen::Index>(m);
  q.chol_factor.topLeftCorner(mm, mm) = previous.posterior.chol_factor;
  q.chol_factor.bottomLeftCorner(q.chol_factor.rows() - mm, mm).setZero();
}

}  // namespace

FitResult fit(std::span<const Observation> data, const CandidatePool& pool, const FitConfig& config,
              Rng& rng, const FitResult* warm_start) {
  config.validate();
  if (data.empty()) throw InvalidArgument("fit needs at least one observation");
  for (const auto& obs : data) {
    for (PoolIndex i : obs.query.indices) {
      if (i >= pool.size()) {
        throw InvalidArgument("observation references unknown pool index " + std::to_string(i));
      }
    }
  }
  const CompiledDataset compiled(data);
  if (compiled.has_ties() && !config.learn_delta && !(config.fixed_delta > 0.0)) {
    throw InvalidArgument("dataset contains ties but the tie threshold is fixed at 0");
  }
  const auto n = static_cast<Eigen::Index>(compiled.num_inputs());
  const Eigen::MatrixXd inputs = pool.rows(compiled.inputs());
  const ElboObjective objective(compiled, inputs, config.learn_delta, config.fixed_delta,
                                ElboParameterization::kWhitened);

  FitResult out;
  out.inputs = compiled.inputs();
  out.initial_kernel = initial_kernel(pool, config);
  TieThreshold delta0{config.learn_delta ? config.initial_delta : config.fixed_delta};
  KernelParams kernel0 = out.initial_kernel;
  if (warm_start != nullptr && warm_start->kernel.dim() == pool.dim()) {
    kernel0 = warm_start->kernel;
    if (config.learn_delta && warm_start->delta.delta > 0.0) delta0 = warm_start->delta;
  }
  const Eigen::MatrixXd k0 = kernel_matrix(kernel0, inputs, inputs);
  const auto chol0 = jittered_cholesky(k0, kernel0.signal_variance);
  VariationalPosterior q0{Eigen::VectorXd::Zero(n), 0.1 * Eigen::MatrixXd(chol0.llt.matrixL())};
  if (warm_start != nullptr) warm_start_posterior(*warm_start, pool, out.inputs, kernel0, q0);
  Eigen::VectorXd theta = objective.pack(q0, kernel0, delta0);
  const Eigen::VectorXd log_l0 = out.initial_kernel.length_scales.array().log().matrix();
  const auto ls_at = static_cast<Eigen::Index>(objective.length_scale_offset());
  const auto d = log_l0.size();

  const std::size_t samples = config.mc_samples_per_step;
  Rng eval_rng = derive_rng(rng(), 0x656c626fULL);
  const std::size_t window = std::min(kElboWindow, config.steps);
  double initial = 0.0;
  for (std::size_t b = 0; b < window; ++b) {
    initial += objective.evaluate(theta, standard_normal(samples, compiled.num_inputs(), eval_rng), nullptr);
  }
  out.initial_elbo = initial / static_cast<double>(window);

  AdamAscent adam(objective.num_parameters(), config.learning_rate);
  Eigen::VectorXd grad;
  out.elbo_trace.reserve(config.steps);
  for (std::size_t step = 0; step < config.steps; ++step) {
    const Eigen::MatrixXd noise = standard_normal(samples, compiled.num_inputs(), rng);
    const double elbo = objective.evaluate(theta, noise, &grad);
    // Quadratic pull of log length-scales toward their initial values.
    const Eigen::VectorXd drift = theta.segment(ls_at, d) - log_l0;
    grad.segment(ls_at, d) -= 2.0 * config.length_scale_penalty_weight * drift;
    if (!std::isfinite(elbo) || !grad.allFinite()) {
      throw NumericalFailure("non-finite ELBO or gradient at step " + std::to_string(step) +
                             " (elbo = " + std::to_string(elbo) + ")");
    }
    out.elbo_trace.push_back(elbo);
    adam.step(theta, grad);
  }
  const auto tail = out.elbo_trace.end() - static_cast<std::ptrdiff_t>(window);
  out.final_elbo = std::accumulate(tail, out.elbo_trace.end(), 0.0) / static_cast<double>(window);

  out.posterior = objective.unpack_posterior(theta);
  out.kernel = objective.unpack_kernel(theta);
  out.delta = objective.unpack_delta(theta);
  return out;
}

FitResult fit(std::span<const Observation> data, const CandidatePool& pool,
              const FitConfig& config) {
  Rng rng(config.seed);
  return fit(data, pool, config, rng);
}

GaussianBelief pool_belief(const CandidatePool& pool, const FitResult& fitted) {
  if (fitted.inputs.empty()) return prior_predict(fitted.kernel, pool.points());
  return posterior_predict(fitted.kernel, pool.rows(fitted.inputs), fitted.posterior, pool.points());
}

}  // namespace prefopt
