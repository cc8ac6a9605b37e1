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

#include "prefopt/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "prefopt/errors.hpp"

namespace prefopt {
namespace {

constexpr std::size_t kTieKey = std::numeric_limits<std::size_t>::max();

std::size_t falling_factorial(std::size_t n, std::size_t k) {
  std::size_t out = 1;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t factor = n - i;
    if (out > std::numeric_limits<std::size_t>::max() / factor) {
      return std::numeric_limits<std::size_t>::max();
    }
    out *= factor;
  }
  return out;
}

// C(n, k), saturating.
std::size_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  double acc = 1.0;
  for (std::size_t i = 1; i <= k; ++i) {
    acc = acc * static_cast<double>(n - k + i) / static_cast<double>(i);
    if (acc > 1e15) return std::numeric_limits<std::size_t>::max();
  }
  return static_cast<std::size_t>(std::llround(acc));
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

// Uniform |C|-subset of [0, m), sorted ascending.
std::vector<PoolIndex> random_subset(std::size_t m, std::size_t size, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, m - 1);
  std::vector<PoolIndex> out;
  out.reserve(size);
  while (out.size() < size) {
    const PoolIndex i = pick(rng);
    if (std::find(out.begin(), out.end(), i) == out.end()) out.push_back(i);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void gather_row(const Eigen::MatrixXd& m, Eigen::Index row, std::vector<double>& out) {
  out.resize(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(c)] = m(row, c);
}

// Coordinates of the union of X_* and C inside a belief over the pool, with
// X_* first. Overlapping points share a coordinate.
struct JointLayout {
  std::vector<std::size_t> coords;
  std::vector<std::size_t> maximizer_cols;
  std::vector<std::size_t> query_cols;
};

JointLayout joint_layout(const MaximizerSet& maximizers, const Query& query) {
  JointLayout out;
  std::unordered_map<PoolIndex, std::size_t> col;
  auto add = [&](PoolIndex i) {
    const auto [it, inserted] = col.emplace(i, out.coords.size());
    if (inserted) out.coords.push_back(i);
    return it->second;
  };
  for (PoolIndex i : maximizers.indices) out.maximizer_cols.push_back(add(i));
  for (PoolIndex i : query.indices) out.query_cols.push_back(add(i));
  return out;
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& m, std::span<const std::size_t> cols) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    out.col(static_cast<Eigen::Index>(c)) = m.col(static_cast<Eigen::Index>(cols[c]));
  }
  return out;
}

void check_belief_covers_pool(const CandidatePool& pool, const GaussianBelief& belief) {
  if (belief.size() != pool.size() || static_cast<std::size_t>(belief.covariance.rows()) != pool.size()) {
    throw InvalidArgument("belief must cover the whole candidate pool");
  }
}

void check_query_against_belief(const Query& query, const MaximizerSet& maximizers,
                                const GaussianBelief& belief) {
  query.validate();
  maximizers.validate();
  for (PoolIndex i : query.indices) {
    if (i >= belief.size()) throw InvalidArgument("query index outside the belief");
  }
  for (PoolIndex i : maximizers.indices) {
    if (i >= belief.size()) throw InvalidArgument("maximizer index outside the belief");
  }
}

}  // namespace

void MaximizerSet::validate() const {
  if (indices.empty()) throw InvalidArgument("maximizer set must not be empty");
  if (indices.size() != probabilities.size()) {
    throw InvalidArgument("maximizer probabilities must align with indices");
  }
  double total = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0)) throw InvalidArgument("maximizer probabilities must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("maximizer probabilities must sum to 1");
  std::set<PoolIndex> seen(indices.begin(), indices.end());
  if (seen.size() != indices.size()) throw InvalidArgument("maximizer indices must be distinct");
}

void AcquisitionConfig::validate() const {
  if (query_size < 2) throw InvalidArgument("query_size must be at least 2");
  if (k < 1 || k >= query_size) throw InvalidArgument("need 1 <= k < query_size");
  if (use_ties && k != 1) throw Unsupported("ties are only modeled for top-1 observations");
  if (maximizer_set_size == 0) throw InvalidArgument("maximizer_set_size must be positive");
  if (mc_samples == 0) throw InvalidArgument("mc_samples must be positive");
  if (candidate_queries == 0) throw InvalidArgument("candidate_queries must be positive");
}

std::size_t AcquisitionConfig::outcome_count() const {
  return use_ties ? query_size + 1 : falling_factorial(query_size, k);
}

OutcomeSpace::OutcomeSpace(std::size_t query_size, std::size_t k, bool use_ties)
    : query_size_(query_size), k_(k), use_ties_(use_ties) {
  if (query_size < 2 || k < 1 || k >= query_size) {
    throw InvalidArgument("outcome space needs |C| >= 2 and 1 <= k < |C|");
  }
  if (use_ties && k != 1) throw Unsupported("ties are only modeled for top-1 observations");
  if (!use_ties) {
    if (falling_factorial(query_size, k) > kMaxEnumeratedOutcomes) {
      throw InvalidArgument("too many rankings to enumerate; use the stochastic estimator");
    }
    rankings_ = enumerate_rankings(query_size, k);
  }
}

void OutcomeSpace::probabilities(std::span<const double> f, double delta,
                                 std::vector<double>& out) const {
  out.resize(size());
  if (use_ties_) {
    double total = 0.0;
    for (std::size_t o = 0; o < query_size_; ++o) {
      out[o] = std::exp(detail::choice_log_prob_grad(f, o, delta, {}, nullptr, 0.0));
      total += out[o];
    }
    out[query_size_] = std::max(0.0, 1.0 - total);
    return;
  }
  if (k_ == 1) {
    const double top = *std::max_element(f.begin(), f.end());
    double total = 0.0;
    for (std::size_t o = 0; o < query_size_; ++o) {
      out[o] = std::exp(f[o] - top);
      total += out[o];
    }
    for (auto& p : out) p /= total;
    return;
  }
  for (std::size_t r = 0; r < rankings_.size(); ++r) {
    out[r] = std::exp(topk_log_prob(f, rankings_[r]));
  }
}

std::vector<std::size_t> row_argmax(const Eigen::MatrixXd& samples) {
  std::vector<std::size_t> out(static_cast<std::size_t>(samples.rows()));
  for (Eigen::Index r = 0; r < samples.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < samples.cols(); ++c) {
      if (samples(r, c) > samples(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = static_cast<std::size_t>(best);
  }
  return out;
}

MpesBreakdown mpes_from_labels(std::span<const std::size_t> labels, std::size_t num_maximizers,
                               const Eigen::MatrixXd& f_query, const OutcomeSpace& outcomes,
                               double delta) {
  const std::size_t n = labels.size();
  if (n == 0 || static_cast<std::size_t>(f_query.rows()) != n) {
    throw InvalidArgument("sample labels and query samples must be nonempty and aligned");
  }
  const auto s = static_cast<Eigen::Index>(num_maximizers);
  const auto num_outcomes = static_cast<Eigen::Index>(outcomes.size());
  MpesBreakdown out;
  out.joint = Eigen::MatrixXd::Zero(s, num_outcomes);
  std::vector<double> counts(num_maximizers, 0.0);
  std::vector<double> f;
  std::vector<double> probs;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t x = labels[i];
    if (x >= num_maximizers) throw InvalidArgument("argmax label out of range");
    gather_row(f_query, static_cast<Eigen::Index>(i), f);
    outcomes.probabilities(f, delta, probs);
    counts[x] += 1.0;
    for (Eigen::Index o = 0; o < num_outcomes; ++o) {
      out.joint(static_cast<Eigen::Index>(x), o) += probs[static_cast<std::size_t>(o)];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.joint *= inv_n;
  out.p_maximizer.resize(num_maximizers);
  for (std::size_t x = 0; x < num_maximizers; ++x) out.p_maximizer[x] = counts[x] * inv_n;
  out.p_outcome.resize(static_cast<std::size_t>(num_outcomes));
  for (Eigen::Index o = 0; o < num_outcomes; ++o) {
    out.p_outcome[static_cast<std::size_t>(o)] = out.joint.col(o).sum();
  }

  double score = 0.0;
  double conditional_entropy = 0.0;
  std::vector<double> conditional(static_cast<std::size_t>(num_outcomes));
  for (Eigen::Index x = 0; x < s; ++x) {
    const double px = out.p_maximizer[static_cast<std::size_t>(x)];
    if (px <= 0.0) continue;
    for (Eigen::Index o = 0; o < num_outcomes; ++o) {
      const double joint = out.joint(x, o);
      const double po = out.p_outcome[static_cast<std::size_t>(o)];
      conditional[static_cast<std::size_t>(o)] = joint / px;
      if (joint <= 0.0) continue;
      if (po <= 0.0) throw std::logic_error("outcome marginal vanished under a positive joint");
      score += joint * std::log(joint / (px * po));
    }
    conditional_entropy += px * entropy(conditional);
  }
  out.score = score;
  out.entropy_form = entropy(out.p_outcome) - conditional_entropy;
  return out;
}

MpesBreakdown mpes_from_samples(const Eigen::MatrixXd& f_maximizers, const Eigen::MatrixXd& f_query,
                                const OutcomeSpace& outcomes, double delta) {
  if (f_maximizers.rows() != f_query.rows() || f_maximizers.cols() < 1) {
    throw InvalidArgument("maximizer and query samples must be aligned");
  }
  const auto labels = row_argmax(f_maximizers);
  return mpes_from_labels(labels, static_cast<std::size_t>(f_maximizers.cols()), f_query, outcomes,
                          delta);
}

double mpes_stochastic_from_samples(const Eigen::MatrixXd& f_maximizers,
                                    const Eigen::MatrixXd& f_query, std::size_t k, bool use_ties,
                                    double delta, Rng& rng) {
  const auto n = static_cast<std::size_t>(f_query.rows());
  const auto c = static_cast<std::size_t>(f_query.cols());
  if (n == 0 || static_cast<std::size_t>(f_maximizers.rows()) != n || f_maximizers.cols() < 1) {
    throw InvalidArgument("maximizer and query samples must be nonempty and aligned");
  }
  if (c < 2 || k < 1 || k >= c) throw InvalidArgument("need |C| >= 2 and 1 <= k < |C|");
  if (use_ties && k != 1) throw Unsupported("ties are only modeled for top-1 observations");
  const auto labels = row_argmax(f_maximizers);
  const auto s = static_cast<std::size_t>(f_maximizers.cols());

  // Draw one outcome per joint sample.
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  auto open_uniform = [&] {
    double u = 0.0;
    do {
      u = uniform(rng);
    } while (u <= 0.0);
    return u;
  };
  std::map<std::vector<std::size_t>, std::size_t> outcome_ids;
  std::vector<std::vector<std::size_t>> keys;
  std::vector<std::size_t> drawn(n);
  std::vector<double> f;
  std::vector<double> probs(c + 1);
  std::vector<std::pair<double, std::size_t>> utilities(c);
  for (std::size_t i = 0; i < n; ++i) {
    gather_row(f_query, static_cast<Eigen::Index>(i), f);
    std::vector<std::size_t> key;
    if (use_ties) {
      double total = 0.0;
      for (std::size_t o = 0; o < c; ++o) {
        probs[o] = std::exp(detail::choice_log_prob_grad(f, o, delta, {}, nullptr, 0.0));
        total += probs[o];
      }
      probs[c] = std::max(0.0, 1.0 - total);
      double u = uniform(rng) * (total + probs[c]);
      std::size_t pick = 0;
      while (pick < c && u >= probs[pick]) u -= probs[pick++];
      key.push_back(pick == c ? kTieKey : pick);
    } else {
      // Gumbel top-k is an exact Plackett-Luce draw.
      for (std::size_t j = 0; j < c; ++j) {
        utilities[j] = {f[j] - std::log(-std::log(open_uniform())), j};
      }
      std::partial_sort(utilities.begin(), utilities.begin() + static_cast<std::ptrdiff_t>(k),
                        utilities.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
      for (std::size_t j = 0; j < k; ++j) key.push_back(utilities[j].second);
    }
    const auto [it, inserted] = outcome_ids.emplace(key, keys.size());
    if (inserted) keys.push_back(key);
    drawn[i] = it->second;
  }

  std::vector<double> counts(s, 0.0);
  for (std::size_t i = 0; i < n; ++i) counts[labels[i]] += 1.0;

  // p(o | D) and p(o | D, x_*) for every distinct sampled outcome.
  const std::size_t m = keys.size();
  std::vector<double> marginal(m, 0.0);
  Eigen::MatrixXd conditional = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s),
                                                      static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < n; ++i) {
    gather_row(f_query, static_cast<Eigen::Index>(i), f);
    for (std::size_t id = 0; id < m; ++id) {
      const auto& key = keys[id];
      double p = 0.0;
      if (use_ties) {
        p = key[0] == kTieKey ? std::exp(tie_log_prob(f, {delta}))
                              : std::exp(detail::choice_log_prob_grad(f, key[0], delta, {}, nullptr, 0.0));
      } else {
        p = std::exp(topk_log_prob(f, key));
      }
      marginal[id] += p;
      conditional(static_cast<Eigen::Index>(labels[i]), static_cast<Eigen::Index>(id)) += p;
    }
  }
  double estimate = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = labels[i];
    const auto id = drawn[i];
    const double p_cond = conditional(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(id)) / counts[x];
    const double p_marg = marginal[id] / static_cast<double>(n);
    estimate += std::log(p_cond / p_marg);
  }
  return estimate / static_cast<double>(n);
}

MaximizerSet build_maximizer_set(const CandidatePool& pool, const GaussianBelief& belief,
                                 std::size_t size, std::size_t n_samples, Rng& rng) {
  check_belief_covers_pool(pool, belief);
  if (size == 0) throw InvalidArgument("maximizer set size must be positive");
  if (n_samples == 0) throw InvalidArgument("maximizer set needs at least one sample");
  const std::size_t m = pool.size();

  // Argmax over the pool per joint draw; large pools are sampled blockwise.
  std::vector<double> best_value(n_samples, -std::numeric_limits<double>::infinity());
  std::vector<PoolIndex> best_index(n_samples, 0);
  for (std::size_t start = 0; start < m; start += kMaxJointBlock) {
    const std::size_t stop = std::min(m, start + kMaxJointBlock);
    std::vector<std::size_t> coords(stop - start);
    std::iota(coords.begin(), coords.end(), start);
    const Eigen::MatrixXd draws = sample_joint(belief.marginal(coords), n_samples, rng);
    const auto labels = row_argmax(draws);
    for (std::size_t i = 0; i < n_samples; ++i) {
      const double v = draws(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(labels[i]));
      if (v > best_value[i]) {
        best_value[i] = v;
        best_index[i] = start + labels[i];
      }
    }
  }
  std::vector<double> counts(m, 0.0);
  for (PoolIndex i : best_index) counts[i] += 1.0;

  MaximizerSet out;
  if (m <= size) {
    out.indices.resize(m);
    std::iota(out.indices.begin(), out.indices.end(), PoolIndex{0});
    for (double c : counts) out.probabilities.push_back(c / static_cast<double>(n_samples));
    return out;
  }
  std::vector<PoolIndex> seen;
  for (PoolIndex i = 0; i < m; ++i) {
    if (counts[i] > 0.0) seen.push_back(i);
  }
  std::stable_sort(seen.begin(), seen.end(),
                   [&](PoolIndex a, PoolIndex b) { return counts[a] > counts[b]; });
  if (seen.size() > size) seen.resize(size);
  double kept = 0.0;
  for (PoolIndex i : seen) kept += counts[i];
  out.indices = seen;
  for (PoolIndex i : seen) out.probabilities.push_back(counts[i] / kept);
  return out;
}

double mpes_score(const Query& query, const MaximizerSet& maximizers, const GaussianBelief& belief,
                  const AcquisitionConfig& config, TieThreshold delta, Rng& rng) {
  config.validate();
  delta.validate();
  check_query_against_belief(query, maximizers, belief);
  if (config.k >= query.size()) throw InvalidArgument("need k < |C|");
  const OutcomeSpace outcomes(query.size(), config.k, config.use_ties);
  const auto layout = joint_layout(maximizers, query);
  const Eigen::MatrixXd draws = sample_joint(belief.marginal(layout.coords), config.mc_samples, rng);
  return mpes_from_samples(select_columns(draws, layout.maximizer_cols),
                           select_columns(draws, layout.query_cols), outcomes, delta.delta)
      .score;
}

double mpes_score_stochastic(const Query& query, const MaximizerSet& maximizers,
                             const GaussianBelief& belief, const AcquisitionConfig& config,
                             TieThreshold delta, Rng& rng) {
  if (config.query_size < 2 || config.k < 1 || config.k >= query.size() || config.mc_samples == 0) {
    throw InvalidArgument("invalid acquisition config for the stochastic estimator");
  }
  delta.validate();
  check_query_against_belief(query, maximizers, belief);
  const auto layout = joint_layout(maximizers, query);
  const Eigen::MatrixXd draws = sample_joint(belief.marginal(layout.coords), config.mc_samples, rng);
  return mpes_stochastic_from_samples(select_columns(draws, layout.maximizer_cols),
                                      select_columns(draws, layout.query_cols), config.k,
                                      config.use_ties, delta.delta, rng);
}

ScoredQuery select_query_mpes(const CandidatePool& pool, const GaussianBelief& belief,
                              const MaximizerSet& maximizers, const AcquisitionConfig& config,
                              TieThreshold delta, Rng& rng) {
  config.validate();
  delta.validate();
  maximizers.validate();
  check_belief_covers_pool(pool, belief);
  const std::size_t m = pool.size();
  const std::size_t c = config.query_size;
  if (m < c) throw InvalidArgument("pool is smaller than the query size");
  if (m == c) {
    Query only;
    only.indices.resize(m);
    std::iota(only.indices.begin(), only.indices.end(), PoolIndex{0});
    return {only, 0.0, 0};
  }
  const OutcomeSpace outcomes(c, config.k, config.use_ties);

  // Candidate 0: the most probable maximizers, topped up by posterior mean.
  std::vector<std::vector<PoolIndex>> candidates;
  std::set<std::vector<PoolIndex>> seen;
  {
    std::vector<std::size_t> order(maximizers.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return maximizers.probabilities[a] > maximizers.probabilities[b];
    });
    std::vector<PoolIndex> greedy;
    for (std::size_t o : order) {
      if (greedy.size() == c) break;
      greedy.push_back(maximizers.indices[o]);
    }
    if (greedy.size() < c) {
      std::vector<PoolIndex> by_mean(m);
      std::iota(by_mean.begin(), by_mean.end(), PoolIndex{0});
      std::stable_sort(by_mean.begin(), by_mean.end(), [&](PoolIndex a, PoolIndex b) {
        return belief.mean[static_cast<Eigen::Index>(a)] > belief.mean[static_cast<Eigen::Index>(b)];
      });
      for (PoolIndex i : by_mean) {
        if (greedy.size() == c) break;
        if (std::find(greedy.begin(), greedy.end(), i) == greedy.end()) greedy.push_back(i);
      }
    }
    std::sort(greedy.begin(), greedy.end());
    seen.insert(greedy);
    candidates.push_back(std::move(greedy));
  }
  const std::size_t total = binomial(m, c);
  const std::size_t wanted = std::min(config.candidate_queries, total);
  if (total <= config.candidate_queries) {
    std::vector<PoolIndex> combo(c);
    std::iota(combo.begin(), combo.end(), PoolIndex{0});
    while (true) {
      if (seen.insert(combo).second) candidates.push_back(combo);
      std::size_t i = c;
      while (i > 0 && combo[i - 1] == m - c + (i - 1)) --i;
      if (i == 0) break;
      ++combo[i - 1];
      for (std::size_t j = i; j < c; ++j) combo[j] = combo[j - 1] + 1;
    }
  } else {
    while (candidates.size() < wanted) {
      auto subset = random_subset(m, c, rng);
      if (seen.insert(subset).second) candidates.push_back(std::move(subset));
    }
  }

  // One joint sample bank over X_* and every candidate point when it fits.
  std::vector<std::size_t> support(maximizers.indices.begin(), maximizers.indices.end());
  {
    std::set<PoolIndex> extra;
    std::set<PoolIndex> in_support(support.begin(), support.end());
    for (const auto& cand : candidates) {
      for (PoolIndex i : cand) {
        if (!in_support.count(i)) extra.insert(i);
      }
    }
    support.insert(support.end(), extra.begin(), extra.end());
  }

  ScoredQuery best;
  best.score = -std::numeric_limits<double>::infinity();
  if (support.size() <= kMaxJointBlock) {
    const Eigen::MatrixXd draws = sample_joint(belief.marginal(support), config.mc_samples, rng);
    std::vector<std::size_t> xs_cols(maximizers.size());
    std::iota(xs_cols.begin(), xs_cols.end(), std::size_t{0});
    const auto labels = row_argmax(select_columns(draws, xs_cols));
    std::unordered_map<PoolIndex, std::size_t> column;
    for (std::size_t j = 0; j < support.size(); ++j) column.emplace(support[j], j);
    std::vector<std::size_t> cols(c);
    for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
      for (std::size_t j = 0; j < c; ++j) cols[j] = column.at(candidates[ci][j]);
      const double score =
          mpes_from_labels(labels, maximizers.size(), select_columns(draws, cols), outcomes, delta.delta)
              .score;
      if (score > best.score) {
        best.score = score;
        best.query.indices = candidates[ci];
      }
    }
  } else {
    const std::uint64_t base = rng();
    for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
      Rng child = derive_rng(base, ci);
      const double score = mpes_score(Query{candidates[ci]}, maximizers, belief, config, delta, child);
      if (score > best.score) {
        best.score = score;
        best.query.indices = candidates[ci];
      }
    }
  }
  best.candidates_scored = candidates.size();
  return best;
}

Query select_query_random(const CandidatePool& pool, const AcquisitionConfig& config, Rng& rng) {
  if (config.query_size < 2) throw InvalidArgument("query_size must be at least 2");
  if (pool.size() < config.query_size) throw InvalidArgument("pool is smaller than the query size");
  return Query{random_subset(pool.size(), config.query_size, rng)};
}

double expected_improvement(double mean, double variance, double incumbent) {
  const double gap = mean - incumbent;
  if (!(variance > 0.0)) return std::max(gap, 0.0);
  const double sigma = std::sqrt(variance);
  const double z = gap / sigma;
  const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  return gap * cdf + sigma * pdf;
}

Query select_query_ei_pair(const CandidatePool& pool, const GaussianBelief& belief) {
  check_belief_covers_pool(pool, belief);
  const PoolIndex exploit = best_guess(belief);
  const double incumbent = belief.mean[static_cast<Eigen::Index>(exploit)];
  std::vector<double> ei(pool.size());
  for (std::size_t i = 0; i < ei.size(); ++i) {
    const auto e = static_cast<Eigen::Index>(i);
    ei[i] = expected_improvement(belief.mean[e], belief.covariance(e, e), incumbent);
  }
  auto argmax_excluding = [&](std::optional<PoolIndex> skip) {
    PoolIndex best = skip == PoolIndex{0} ? 1 : 0;
    for (PoolIndex i = 0; i < ei.size(); ++i) {
      if (skip && i == *skip) continue;
      if (ei[i] > ei[best]) best = i;
    }
    return best;
  };
  PoolIndex explore = argmax_excluding(std::nullopt);
  if (explore == exploit) explore = argmax_excluding(exploit);
  return Query{{explore, exploit}};
}

PoolIndex best_guess(const GaussianBelief& belief) {
  if (belief.size() == 0) throw InvalidArgument("best guess needs a nonempty belief");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < belief.mean.size(); ++i) {
    if (belief.mean[i] > belief.mean[best]) best = i;
  }
  return static_cast<PoolIndex>(best);
}

}  // namespace prefopt
