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

// Gaussian-process core: squared-exponential kernel, the finite candidate
// pool the optimizer works over, the predictive belief induced by a Gaussian
// variational posterior, and joint sampling from such beliefs.

#ifndef PREFOPT_GP_HPP_
#define PREFOPT_GP_HPP_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace prefopt {

using Rng = std::mt19937_64;
using PoolIndex = std::size_t;

struct KernelParams {
  double signal_variance = 1.0;
  Eigen::VectorXd length_scales;

  std::size_t dim() const { return static_cast<std::size_t>(length_scales.size()); }

  // Throws InvalidArgument unless the variance and every length-scale are
  // strictly positive and finite.
  void validate() const;
};

// Finite ordered discretization of a bounded box. Points are stored one per
// row. Construction validates that points are distinct and inside the box.
class CandidatePool {
 public:
  CandidatePool(Eigen::MatrixXd points, Eigen::VectorXd low, Eigen::VectorXd high,
                std::vector<std::string> labels = {});

  // `count` evenly spaced points including both endpoints.
  static CandidatePool grid(double low, double high, std::size_t count);

  // First `count` points of a Sobol sequence scaled to the box.
  static CandidatePool sobol(const Eigen::VectorXd& low, const Eigen::VectorXd& high,
                             std::size_t count);

  std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(points_.cols()); }
  const Eigen::MatrixXd& points() const { return points_; }
  Eigen::VectorXd point(PoolIndex i) const { return points_.row(static_cast<Eigen::Index>(i)).transpose(); }
  const Eigen::VectorXd& low() const { return low_; }
  const Eigen::VectorXd& high() const { return high_; }
  Eigen::VectorXd widths() const { return high_ - low_; }
  const std::vector<std::string>& labels() const { return labels_; }

  // Gathers the listed points into a |indices| x d matrix.
  Eigen::MatrixXd rows(std::span<const PoolIndex> indices) const;

 private:
  Eigen::MatrixXd points_;
  Eigen::VectorXd low_;
  Eigen::VectorXd high_;
  std::vector<std::string> labels_;
};

struct GaussianBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  std::size_t size() const { return static_cast<std::size_t>(mean.size()); }
  Eigen::VectorXd variances() const { return covariance.diagonal(); }

  // Marginal over a subset of coordinates, in the order given.
  GaussianBelief marginal(std::span<const std::size_t> coords) const;
};

// Gaussian q(f) = N(mean, L L^T) over the function values at the distinct
// observed inputs. The factor is lower triangular with a positive diagonal.
struct VariationalPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd chol_factor;

  std::size_t size() const { return static_cast<std::size_t>(mean.size()); }
  Eigen::MatrixXd covariance() const { return chol_factor * chol_factor.transpose(); }
};

// k(a, b) = s^2 exp(-0.5 sum_d ((a_d - b_d) / l_d)^2) for every row pair.
Eigen::MatrixXd kernel_matrix(const KernelParams& params, const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b);

// Cholesky of K + eps I with eps starting at 1e-6 s^2 and escalating by 10x
// up to 1e-3 s^2. Throws NumericalFailure if every attempt fails.
struct JitteredCholesky {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};
JitteredCholesky jittered_cholesky(const Eigen::MatrixXd& gram, double signal_variance);

inline constexpr double kBaseJitter = 1e-6;
inline constexpr int kJitterEscalations = 3;

// Predictive belief at `targets` given q over `observed_inputs`:
//   mean = K_*D K^-1 mu
//   cov  = K_** - K_*D K^-1 (K - Sigma) K^-1 K_D*
GaussianBelief posterior_predict(const KernelParams& params, const Eigen::MatrixXd& observed_inputs,
                                 const VariationalPosterior& q, const Eigen::MatrixXd& targets);

// Prior belief N(0, K_**) for when nothing has been observed yet.
GaussianBelief prior_predict(const KernelParams& params, const Eigen::MatrixXd& targets);

// Reusable square-root factor of a belief's covariance. A diagonally pivoted
// Cholesky stops at the numerical rank, so singular (but PSD) covariances
// sample exactly, zero included. Residual diagonals below -1e-8 times the
// largest variance (or 1) throw NumericalFailure.
class GaussianSampler {
 public:
  explicit GaussianSampler(const GaussianBelief& belief);

  // count x dim matrix of i.i.d. draws; rows consume the generator in order.
  Eigen::MatrixXd draw(std::size_t count, Rng& rng) const;

  std::size_t dim() const { return static_cast<std::size_t>(mean_.size()); }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd factor_;
};

Eigen::MatrixXd sample_joint(const GaussianBelief& belief, std::size_t count, Rng& rng);

// Derives an independent generator from a parent seed and a stream tag.
Rng derive_rng(std::uint64_t seed, std::uint64_t stream);

}  // namespace prefopt

#endif  // PREFOPT_GP_HPP_
