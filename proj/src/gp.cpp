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

#include "prefopt/gp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Cholesky>
#include <boost/random/sobol.hpp>

#include "prefopt/errors.hpp"

namespace prefopt {

void KernelParams::validate() const {
  if (!(signal_variance > 0.0) || !std::isfinite(signal_variance)) {
    throw InvalidArgument("kernel signal variance must be positive and finite");
  }
  if (length_scales.size() == 0) {
    throw InvalidArgument("kernel needs at least one length-scale");
  }
  for (Eigen::Index d = 0; d < length_scales.size(); ++d) {
    if (!(length_scales[d] > 0.0) || !std::isfinite(length_scales[d])) {
      throw InvalidArgument("kernel length-scales must be positive and finite");
    }
  }
}

CandidatePool::CandidatePool(Eigen::MatrixXd points, Eigen::VectorXd low, Eigen::VectorXd high,
                             std::vector<std::string> labels)
    : points_(std::move(points)), low_(std::move(low)), high_(std::move(high)),
      labels_(std::move(labels)) {
  const auto m = points_.rows();
  const auto d = points_.cols();
  if (m < 2) throw InvalidArgument("candidate pool needs at least 2 points");
  if (d < 1) throw InvalidArgument("candidate pool points need at least one dimension");
  if (low_.size() != d || high_.size() != d) {
    throw InvalidArgument("pool bounds dimension does not match points");
  }
  if (!labels_.empty() && static_cast<Eigen::Index>(labels_.size()) != m) {
    throw InvalidArgument("pool labels must be empty or one per point");
  }
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!(low_[j] <= high_[j])) throw InvalidArgument("pool bounds must satisfy low <= high");
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double v = points_(i, j);
      if (!std::isfinite(v) || v < low_[j] || v > high_[j]) {
        throw InvalidArgument("pool point " + std::to_string(i) + " lies outside bounds");
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto row_less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (points_(a, j) != points_(b, j)) return points_(a, j) < points_(b, j);
    }
    return false;
  };
  std::sort(order.begin(), order.end(), row_less);
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (!row_less(order[i - 1], order[i])) {
      throw InvalidArgument("pool contains duplicate points (rows " + std::to_string(order[i - 1]) +
                            " and " + std::to_string(order[i]) + ")");
    }
  }
}

CandidatePool CandidatePool::grid(double low, double high, std::size_t count) {
  if (count < 2) throw InvalidArgument("grid needs at least 2 points");
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(count), 1);
  for (std::size_t i = 0; i < count; ++i) {
    pts(static_cast<Eigen::Index>(i), 0) =
        low + (high - low) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  pts(static_cast<Eigen::Index>(count - 1), 0) = high;
  return CandidatePool(std::move(pts), Eigen::VectorXd::Constant(1, low),
                       Eigen::VectorXd::Constant(1, high));
}

CandidatePool CandidatePool::sobol(const Eigen::VectorXd& low, const Eigen::VectorXd& high,
                                   std::size_t count) {
  const auto d = low.size();
  if (high.size() != d) throw InvalidArgument("sobol bounds dimension mismatch");
  boost::random::sobol_engine<std::uint32_t, 32> engine(static_cast<std::size_t>(d));
  constexpr double scale = 4294967296.0;  // 2^32
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(count), d);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double u = static_cast<double>(engine()) / scale;
      pts(i, j) = low[j] + (high[j] - low[j]) * u;
    }
  }
  return CandidatePool(std::move(pts), low, high);
}

Eigen::MatrixXd CandidatePool::rows(std::span<const PoolIndex> indices) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(indices.size()), points_.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= size()) throw InvalidArgument("pool index out of range");
    out.row(static_cast<Eigen::Index>(r)) = points_.row(static_cast<Eigen::Index>(indices[r]));
  }
  return out;
}

GaussianBelief GaussianBelief::marginal(std::span<const std::size_t> coords) const {
  const auto n = static_cast<Eigen::Index>(coords.size());
  GaussianBelief out{Eigen::VectorXd(n), Eigen::MatrixXd(n, n)};
  for (Eigen::Index a = 0; a < n; ++a) {
    const auto ia = static_cast<Eigen::Index>(coords[static_cast<std::size_t>(a)]);
    if (ia >= mean.size()) throw InvalidArgument("belief coordinate out of range");
    out.mean[a] = mean[ia];
    for (Eigen::Index b = 0; b < n; ++b) {
      out.covariance(a, b) = covariance(ia, static_cast<Eigen::Index>(coords[static_cast<std::size_t>(b)]));
    }
  }
  return out;
}

Eigen::MatrixXd kernel_matrix(const KernelParams& params, const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b) {
  const auto d = static_cast<Eigen::Index>(params.dim());
  if (a.cols() != d || b.cols() != d) {
    throw InvalidArgument("kernel input dimension " + std::to_string(a.cols()) + "/" +
                          std::to_string(b.cols()) + " does not match " + std::to_string(d) +
                          " length-scales");
  }
  const Eigen::RowVectorXd inv_l = params.length_scales.cwiseInverse().transpose();
  const Eigen::MatrixXd as = a.array().rowwise() * inv_l.array();
  const Eigen::MatrixXd bs = b.array().rowwise() * inv_l.array();
  Eigen::MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const double r2 = (as.row(i) - bs.row(j)).squaredNorm();
      k(i, j) = params.signal_variance * std::exp(-0.5 * r2);
    }
  }
  return k;
}

JitteredCholesky jittered_cholesky(const Eigen::MatrixXd& gram, double signal_variance) {
  const double scale = signal_variance > 0.0 ? signal_variance : 1.0;
  double eps = kBaseJitter * scale;
  const Eigen::Index n = gram.rows();
  for (int attempt = 0; attempt <= kJitterEscalations; ++attempt, eps *= 10.0) {
    Eigen::MatrixXd jittered = gram;
    jittered.diagonal().array() += eps;
    JitteredCholesky out{Eigen::LLT<Eigen::MatrixXd>(jittered), eps};
    if (out.llt.info() == Eigen::Success) return out;
  }
  throw NumericalFailure("Cholesky of " + std::to_string(n) + "x" + std::to_string(n) +
                         " Gram matrix failed after jitter escalation");
}

GaussianBelief posterior_predict(const KernelParams& params, const Eigen::MatrixXd& observed_inputs,
                                 const VariationalPosterior& q, const Eigen::MatrixXd& targets) {
  params.validate();
  const auto n = observed_inputs.rows();
  if (q.mean.size() != n || q.chol_factor.rows() != n || q.chol_factor.cols() != n) {
    throw InvalidArgument("variational posterior dimension does not match observed inputs");
  }
  if (n == 0) return prior_predict(params, targets);

  const Eigen::MatrixXd k_dd = kernel_matrix(params, observed_inputs, observed_inputs);
  const auto chol = jittered_cholesky(k_dd, params.signal_variance);
  const Eigen::MatrixXd k_td = kernel_matrix(params, targets, observed_inputs);
  // With K = R R^T: V = R^-1 K_D* and K_*D K^-1 = V^T R^-1. Working through V
  // keeps K_** - V^T V free of the cancellation in K_*D K^-1 K_D*.
  const auto lower = chol.llt.matrixL();
  const Eigen::MatrixXd v = lower.solve(k_td.transpose());
  const Eigen::MatrixXd w = lower.solve(q.chol_factor);
  const Eigen::MatrixXd spread = v.transpose() * w;

  GaussianBelief out;
  out.mean = v.transpose() * lower.solve(q.mean);
  out.covariance = kernel_matrix(params, targets, targets);
  out.covariance.noalias() -= v.transpose() * v;
  out.covariance.noalias() += spread * spread.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  for (Eigen::Index i = 0; i < out.covariance.rows(); ++i) {
    double& v = out.covariance(i, i);
    if (v < -1e-8) {
      throw NumericalFailure("predictive variance " + std::to_string(v) + " at target " +
                             std::to_string(i) + " is negative beyond tolerance");
    }
    v = std::max(v, 0.0);
  }
  return out;
}

GaussianBelief prior_predict(const KernelParams& params, const Eigen::MatrixXd& targets) {
  params.validate();
  return {Eigen::VectorXd::Zero(targets.rows()), kernel_matrix(params, targets, targets)};
}

GaussianSampler::GaussianSampler(const GaussianBelief& belief) : mean_(belief.mean) {
  const auto n = belief.mean.size();
  if (belief.covariance.rows() != n || belief.covariance.cols() != n) {
    throw InvalidArgument("belief covariance shape does not match its mean");
  }
  if (n == 0) {
    factor_.resize(0, 0);
    return;
  }
  const Eigen::MatrixXd& cov = belief.covariance;
  if (!cov.allFinite()) throw NumericalFailure("belief covariance has non-finite entries");
  const double diag_scale = std::max(1.0, cov.diagonal().cwiseAbs().maxCoeff());
  const double tolerance = 1e-8 * diag_scale;
  const double stop = 1e-13 * diag_scale;

  // Diagonally pivoted Cholesky, stopped once the residual diagonal is
  // negligible. The factor is n x rank.
  Eigen::VectorXd residual = cov.diagonal();
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  Eigen::MatrixXd factor(n, n);
  Eigen::Index rank = 0;
  for (; rank < n; ++rank) {
    Eigen::Index p = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!used[static_cast<std::size_t>(i)] && (p < 0 || residual[i] > residual[p])) p = i;
    }
    if (residual[p] <= stop) break;
    used[static_cast<std::size_t>(p)] = true;
    const double pivot = std::sqrt(residual[p]);
    Eigen::VectorXd col = cov.col(p);
    if (rank > 0) col.noalias() -= factor.leftCols(rank) * factor.row(p).head(rank).transpose();
    col /= pivot;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (used[static_cast<std::size_t>(i)]) {
        col[i] = 0.0;
      } else {
        residual[i] -= col[i] * col[i];
      }
    }
    col[p] = pivot;
    factor.col(rank) = col;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!used[static_cast<std::size_t>(i)] && residual[i] < -tolerance) {
      throw NumericalFailure("belief covariance is not positive semidefinite (residual " +
                             std::to_string(residual[i]) + ")");
    }
  }
  factor_ = factor.leftCols(rank);
}

Eigen::MatrixXd GaussianSampler::draw(std::size_t count, Rng& rng) const {
  const auto rows = static_cast<Eigen::Index>(count);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto rank = factor_.cols();
  Eigen::MatrixXd z(rows, rank);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < rank; ++c) z(r, c) = normal(rng);
  }
  Eigen::MatrixXd out = z * factor_.transpose();
  out.rowwise() += mean_.transpose();
  return out;
}

Eigen::MatrixXd sample_joint(const GaussianBelief& belief, std::size_t count, Rng& rng) {
  if (count == 0) throw InvalidArgument("sample count must be positive");
  return GaussianSampler(belief).draw(count, rng);
}

Rng derive_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

}  // namespace prefopt
