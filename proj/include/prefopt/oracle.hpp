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

// Simulated preference oracles: benchmark objectives (negated so that larger
// is better), Gumbel random utilities, and observation generation under the
// same tie semantics as the likelihood. Tabular objectives come from CSV.

#ifndef PREFOPT_ORACLE_HPP_
#define PREFOPT_ORACLE_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "prefopt/gp.hpp"
#include "prefopt/likelihood.hpp"

namespace prefopt {

enum class ObjectiveKind { kForrester, kSixHumpCamel, kHartmann3, kTabular };

class Objective {
 public:
  static Objective forrester();
  // Restricted to [-1.5, 1.5]^2.
  static Objective six_hump_camel();
  static Objective hartmann3();
  // One utility per pool point, aligned by index.
  static Objective tabular(CandidatePool pool, std::vector<double> utilities);

  ObjectiveKind kind() const { return kind_; }
  std::string name() const;
  std::size_t dim() const { return static_cast<std::size_t>(low_.size()); }
  const Eigen::VectorXd& low() const { return low_; }
  const Eigen::VectorXd& high() const { return high_; }

  // Throws InvalidArgument outside the bounds. Tabular objectives only accept
  // points of their own pool.
  double evaluate(std::span<const double> x) const;
  double evaluate(const Eigen::VectorXd& x) const;

  // f at every pool point.
  std::vector<double> values_on(const CandidatePool& pool) const;

  const std::vector<double>& utilities() const;
  const CandidatePool& tabular_pool() const;

 private:
  Objective(ObjectiveKind kind, Eigen::VectorXd low, Eigen::VectorXd high);

  ObjectiveKind kind_;
  Eigen::VectorXd low_;
  Eigen::VectorXd high_;
  std::shared_ptr<const CandidatePool> pool_;
  std::vector<double> utilities_;
};

struct OracleConfig {
  double delta_true = 0.0;
  std::size_t k = 1;
  std::size_t query_size = 2;
  // Report every tie as a random strict pairwise preference instead.
  bool convert_ties = false;
  std::uint64_t seed = 0;

  void validate() const;
};

// u_i = f_i - ln(-ln U_i) with U_i uniform on the open interval (0, 1).
std::vector<double> sample_gumbel_utilities(std::span<const double> f, Rng& rng);

// One noisy observation of a query whose latent values are f_query.
Observation observe_values(const Query& query, std::span<const double> f_query,
                           const OracleConfig& config, Rng& rng);

Observation generate_observation(const Objective& objective, const CandidatePool& pool,
                                 const Query& query, const OracleConfig& config, Rng& rng);

struct TabularProblem {
  CandidatePool pool;
  Objective objective;
};

// CSV with header x1,...,xd,utility[,label]. Bounds are the per-column
// extremes of the points.
TabularProblem parse_tabular(std::string_view csv);
TabularProblem load_tabular(const std::filesystem::path& path);

}  // namespace prefopt

#endif  // PREFOPT_ORACLE_HPP_
