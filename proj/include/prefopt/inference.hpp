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

// Variational Gaussian inference over the latent values at the observed
// inputs. The ELBO is estimated with reparameterized Monte-Carlo samples and
// ascended jointly over the variational parameters, kernel hyperparameters
// and, optionally, the tie threshold.

#ifndef PREFOPT_INFERENCE_HPP_
#define PREFOPT_INFERENCE_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "prefopt/gp.hpp"
#include "prefopt/likelihood.hpp"

namespace prefopt {

struct FitConfig {
  std::size_t mc_samples_per_step = 64;
  std::size_t steps = 2000;
  double learning_rate = 0.01;
  bool learn_delta = false;
  // Threshold used when it is not learned.
  double fixed_delta = 0.0;
  // Starting value when it is learned.
  double initial_delta = 0.1;
  double length_scale_penalty_weight = 0.1;
  // Initial length-scale as a fraction of the pool width per dimension.
  double initial_length_scale_fraction = 0.2;
  double initial_signal_variance = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct FitResult {
  VariationalPosterior posterior;
  KernelParams kernel;
  TieThreshold delta;
  // Pool indices of X_D, aligned with the posterior coordinates.
  std::vector<PoolIndex> inputs;
  KernelParams initial_kernel;
  // ELBO at the initial parameters and over the last 100 steps, both
  // averaged over 100 Monte-Carlo batches.
  double initial_elbo = 0.0;
  double final_elbo = 0.0;
  std::vector<double> elbo_trace;
};

// KL( N(mu, L L^T) || N(0, K) ) in closed form, with K jittered before
// factorization.
double kl_gaussian(const VariationalPosterior& q, const Eigen::MatrixXd& prior_cov);

// How the variational block of the parameter vector encodes q(f).
//   kDirect:   the block holds mu and L themselves.
//   kWhitened: the block holds m and S with mu = R m and L = R S, where
//              R R^T = K + eps I. The KL term no longer involves K^-1, which
//              keeps the ascent well conditioned when inputs are close.
enum class ElboParameterization { kDirect, kWhitened };

// Unconstrained parameter vector layout:
//   [ mean (n) | lower triangle of the factor, column-major, diagonal as log
//   (n(n+1)/2) | log length-scales (d) | log signal variance
//   | softplus^-1 delta ]
class ElboObjective {
 public:
  ElboObjective(const CompiledDataset& data, Eigen::MatrixXd inputs, bool learn_delta,
                double fixed_delta,
                ElboParameterization parameterization = ElboParameterization::kDirect);

  std::size_t num_inputs() const { return n_; }
  std::size_t num_parameters() const;
  std::size_t mean_offset() const { return 0; }
  std::size_t chol_offset() const { return n_; }
  std::size_t length_scale_offset() const { return n_ + n_ * (n_ + 1) / 2; }
  std::size_t signal_variance_offset() const { return length_scale_offset() + d_; }
  std::size_t delta_offset() const { return signal_variance_offset() + 1; }

  Eigen::VectorXd pack(const VariationalPosterior& q, const KernelParams& kernel,
                       TieThreshold delta) const;
  VariationalPosterior unpack_posterior(const Eigen::VectorXd& theta) const;
  KernelParams unpack_kernel(const Eigen::VectorXd& theta) const;
  TieThreshold unpack_delta(const Eigen::VectorXd& theta) const;

  // ELBO estimate with the given standard-normal draws (rows are samples of
  // length n). Writes the gradient w.r.t. theta when grad is non-null. Both
  // parameterizations map the same draws to the same f samples.
  double evaluate(const Eigen::VectorXd& theta, const Eigen::MatrixXd& noise,
                  Eigen::VectorXd* grad) const;

  ElboParameterization parameterization() const { return parameterization_; }

 private:
  VariationalPosterior unpack_block(const Eigen::VectorXd& theta) const;
  double evaluate_direct(const Eigen::VectorXd& theta, const Eigen::MatrixXd& noise,
                         Eigen::VectorXd* grad) const;
  double evaluate_whitened(const Eigen::VectorXd& theta, const Eigen::MatrixXd& noise,
                           Eigen::VectorXd* grad) const;
  // Chain rule from dELBO/dK to the kernel hyperparameters.
  void kernel_gradient(const Eigen::MatrixXd& k_bar, const Eigen::MatrixXd& k, double jitter,
                       const KernelParams& kernel, Eigen::VectorXd& grad) const;

  const CompiledDataset& data_;
  Eigen::MatrixXd inputs_;
  std::size_t n_;
  std::size_t d_;
  bool learn_delta_;
  double fixed_delta_;
  ElboParameterization parameterization_;
};

// (1/n_mc) sum_s log p(D | mu + L eps_s) - KL(q || prior).
double elbo_estimate(const VariationalPosterior& q, std::span<const Observation> data,
                     const CandidatePool& pool, const KernelParams& kernel, TieThreshold delta,
                     std::size_t n_mc, Rng& rng);

// With warm_start, the ascent starts from a previous fit's kernel,
// threshold and posterior instead of the defaults. The length-scale
// regularizer still pulls toward the default length-scales.
FitResult fit(std::span<const Observation> data, const CandidatePool& pool, const FitConfig& config,
              Rng& rng, const FitResult* warm_start = nullptr);
// Uses a generator seeded from config.seed.
FitResult fit(std::span<const Observation> data, const CandidatePool& pool,
              const FitConfig& config);

// Model with no observations: the initial kernel and an empty X_D.
FitResult prior_model(const CandidatePool& pool, const FitConfig& config);

// Initial kernel guess for a pool: unit signal variance and length-scales a
// fixed fraction of the box width.
KernelParams initial_kernel(const CandidatePool& pool, const FitConfig& config);

// Predictive belief over the whole pool for a fitted model, or the prior
// belief when nothing has been observed.
GaussianBelief pool_belief(const CandidatePool& pool, const FitResult& fitted);

double softplus(double x);
double inverse_softplus(double y);

}  // namespace prefopt

#endif  // PREFOPT_INFERENCE_HPP_
