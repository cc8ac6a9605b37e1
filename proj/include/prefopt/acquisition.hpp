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

// Query selection. The centerpiece is multinomial predictive entropy search
// (MPES): the mutual information between the outcome observed at a query and
// the location of the maximizer, estimated from joint posterior samples over
// the query and a finite maximizer set. Random and EI-pair baselines and the
// posterior-mean best guess live here too.
//
// Beliefs passed to functions in this header are predictive beliefs over the
// whole candidate pool: coordinate i is pool index i.

#ifndef PREFOPT_ACQUISITION_HPP_
#define PREFOPT_ACQUISITION_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "prefopt/gp.hpp"
#include "prefopt/likelihood.hpp"

namespace prefopt {

struct MaximizerSet {
  std::vector<PoolIndex> indices;
  std::vector<double> probabilities;

  std::size_t size() const { return indices.size(); }
  void validate() const;
};

struct AcquisitionConfig {
  std::size_t query_size = 2;
  std::size_t k = 1;
  std::size_t maximizer_set_size = 20;
  std::size_t mc_samples = 1000;
  std::size_t candidate_queries = 2000;
  bool use_ties = false;
  std::uint64_t seed = 0;

  void validate() const;
  // |C|! / (|C| - k)! strict rankings, or |C| + 1 outcomes with ties.
  std::size_t outcome_count() const;
};

// Largest number of enumerated outcomes mpes_score accepts.
inline constexpr std::size_t kMaxEnumeratedOutcomes = 10000;
// Largest joint-sampling block, in pool points.
inline constexpr std::size_t kMaxJointBlock = 2000;

// The observation space of a query, enumerated in a fixed order: either every
// top-k ranking (as positions in C) or every single winner followed by Tie.
class OutcomeSpace {
 public:
  OutcomeSpace(std::size_t query_size, std::size_t k, bool use_ties);

  std::size_t size() const { return use_ties_ ? query_size_ + 1 : rankings_.size(); }
  bool use_ties() const { return use_ties_; }
  const std::vector<std::vector<std::size_t>>& rankings() const { return rankings_; }

  // p(o | f_C) for every outcome o, written into out (resized to size()).
  void probabilities(std::span<const double> f_query, double delta, std::vector<double>& out) const;

 private:
  std::size_t query_size_;
  std::size_t k_;
  bool use_ties_;
  std::vector<std::vector<std::size_t>> rankings_;
};

// Intermediate quantities of the MPES estimate for one query.
struct MpesBreakdown {
  double score = 0.0;
  // H(p(o|D)) - sum_x p(x) H(p(o|D, x)), from the same estimates.
  double entropy_form = 0.0;
  std::vector<double> p_maximizer;
  std::vector<double> p_outcome;
  // |X_*| x |O| joint p(o, x_* | D).
  Eigen::MatrixXd joint;
};

// Index of the largest entry in every row (lowest column on ties).
std::vector<std::size_t> row_argmax(const Eigen::MatrixXd& samples);

// MPES from sample matrices: f_maximizers is n x |X_*|, f_query is n x |C|,
// rows aligned (one joint draw per row).
MpesBreakdown mpes_from_samples(const Eigen::MatrixXd& f_maximizers, const Eigen::MatrixXd& f_query,
                                const OutcomeSpace& outcomes, double delta);
MpesBreakdown mpes_from_labels(std::span<const std::size_t> argmax_labels, std::size_t num_maximizers,
                               const Eigen::MatrixXd& f_query, const OutcomeSpace& outcomes,
                               double delta);

// Sampled-outcome variant: draws o ~ p(o | f_C) per joint sample instead of
// summing over every outcome. Cost scales with the number of distinct sampled
// outcomes, never with |C|! / (|C| - k)!.
double mpes_stochastic_from_samples(const Eigen::MatrixXd& f_maximizers,
                                    const Eigen::MatrixXd& f_query, std::size_t k, bool use_ties,
                                    double delta, Rng& rng);

MaximizerSet build_maximizer_set(const CandidatePool& pool, const GaussianBelief& belief,
                                 std::size_t size, std::size_t n_samples, Rng& rng);

double mpes_score(const Query& query, const MaximizerSet& maximizers, const GaussianBelief& belief,
                  const AcquisitionConfig& config, TieThreshold delta, Rng& rng);
double mpes_score_stochastic(const Query& query, const MaximizerSet& maximizers,
                             const GaussianBelief& belief, const AcquisitionConfig& config,
                             TieThreshold delta, Rng& rng);

struct ScoredQuery {
  Query query;
  double score = 0.0;
  std::size_t candidates_scored = 0;
};

// Random-subset search for the MPES-maximizing query. Candidate 0 is always
// the top-|C| points by maximizer probability; ties go to the lower candidate.
ScoredQuery select_query_mpes(const CandidatePool& pool, const GaussianBelief& belief,
                              const MaximizerSet& maximizers, const AcquisitionConfig& config,
                              TieThreshold delta, Rng& rng);

Query select_query_random(const CandidatePool& pool, const AcquisitionConfig& config, Rng& rng);

// E[max(f - incumbent, 0)] for f ~ N(mean, variance).
double expected_improvement(double mean, double variance, double incumbent);

// Pairwise baseline: the EI maximizer against the best posterior mean,
// paired with the posterior-mean maximizer.
Query select_query_ei_pair(const CandidatePool& pool, const GaussianBelief& belief);

// Argmax of the posterior mean; ties go to the lowest index.
PoolIndex best_guess(const GaussianBelief& belief);

}  // namespace prefopt

#endif  // PREFOPT_ACQUISITION_HPP_
