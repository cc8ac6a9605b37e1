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

// Multinomial-logit choice, Plackett-Luce top-k ranking and top-1-with-tie
// log-likelihoods. Everything is evaluated in log space with a max-shifted
// log-sum-exp.

#ifndef PREFOPT_LIKELIHOOD_HPP_
#define PREFOPT_LIKELIHOOD_HPP_

#include <cstddef>
#include <span>
#include <unordered_map>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "prefopt/gp.hpp"

namespace prefopt {

// The finite set C shown to the oracle, as pool indices. Order is the
// presentation order and carries no preference information.
struct Query {
  std::vector<PoolIndex> indices;

  std::size_t size() const { return indices.size(); }
  // Throws InvalidArgument unless |C| >= 2 and indices are distinct.
  void validate() const;
  // Position of a pool index within the query; throws if absent.
  std::size_t position_of(PoolIndex index) const;
  bool contains(PoolIndex index) const;
};

// The k most preferred members of C in descending order (no ties).
struct TopKRanking {
  std::vector<PoolIndex> winners;
};

// The single member of C that beat every other member by at least delta.
struct TopOneWinner {
  PoolIndex winner = 0;
};

// No member of C beat all others by delta.
struct Tie {};

using Outcome = std::variant<TopKRanking, TopOneWinner, Tie>;

struct Observation {
  Query query;
  Outcome outcome;

  void validate() const;
};

struct TieThreshold {
  double delta = 0.0;

  void validate() const;
  bool allows_ties() const { return delta > 0.0; }
};

// log p(chosen beats every other member of C by delta | f_C).
double choice_log_prob(std::span<const double> f, std::size_t chosen, TieThreshold delta);

// Plackett-Luce log-probability of a top-k ranking given as positions in C.
double topk_log_prob(std::span<const double> f, std::span<const std::size_t> ranking);

// log p(tie | f_C, delta) = log(1 - sum_o p(o beats C \ o)). The complement
// is clamped to [1e-300, 1], so delta = 0 yields log(1e-300).
double tie_log_prob(std::span<const double> f, TieThreshold delta);

inline constexpr double kTieProbabilityFloor = 1e-300;

using LatentValues = std::unordered_map<PoolIndex, double>;

double observation_log_likelihood(const Observation& obs, const LatentValues& f_pool,
                                  TieThreshold delta);

// Sum over observations, which are conditionally independent given f.
double dataset_log_likelihood(std::span<const Observation> data, const LatentValues& f_pool,
                              TieThreshold delta);

// Every ordered selection of k distinct positions out of n, in lexicographic
// order. There are n! / (n - k)! of them.
std::vector<std::vector<std::size_t>> enumerate_rankings(std::size_t n, std::size_t k);

// Observations re-expressed against a dense ordering of their distinct inputs
// X_D, in first-appearance order. This is the form inference works with.
class CompiledDataset {
 public:
  explicit CompiledDataset(std::span<const Observation> data);

  const std::vector<PoolIndex>& inputs() const { return inputs_; }
  std::size_t num_inputs() const { return inputs_.size(); }
  std::size_t num_observations() const { return items_.size(); }
  bool has_ties() const { return has_ties_; }
  bool has_thresholded_outcomes() const { return has_thresholded_; }

  // Dataset log-likelihood at latent values f over X_D. When the gradient
  // pointers are non-null, d/df is added into *grad_f and d/d delta into
  // *grad_delta (both accumulated, not overwritten).
  double log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& f, TieThreshold delta,
                        Eigen::Ref<Eigen::VectorXd> grad_f, double* grad_delta) const;
  double log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& f, TieThreshold delta) const;

 private:
  enum class Kind { kRanking, kWinner, kTie };
  struct Item {
    Kind kind;
    std::vector<std::size_t> members;  // positions into inputs_
    std::vector<std::size_t> ranking;  // positions within members
  };

  std::vector<PoolIndex> inputs_;
  std::vector<Item> items_;
  bool has_ties_ = false;
  bool has_thresholded_ = false;
};

namespace detail {

// Log-probability plus gradient accumulation for one choice term. grad_f is
// indexed like f; weight scales what is accumulated.
double choice_log_prob_grad(std::span<const double> f, std::size_t chosen, double delta,
                            std::span<double> grad_f, double* grad_delta, double weight);
double tie_log_prob_grad(std::span<const double> f, double delta, std::span<double> grad_f,
                         double* grad_delta, double weight);

}  // namespace detail

}  // namespace prefopt

#endif  // PREFOPT_LIKELIHOOD_HPP_
