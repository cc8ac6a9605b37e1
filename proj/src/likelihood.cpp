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

#include "prefopt/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_set>

#include "prefopt/errors.hpp"

namespace prefopt {
namespace {

void require_finite(std::span<const double> f) {
  for (double v : f) {
    if (!std::isfinite(v)) throw InvalidArgument("latent values must be finite");
  }
}

void require_choice_set(std::span<const double> f) {
  if (f.size() < 2) throw InvalidArgument("a choice set needs at least 2 members");
  require_finite(f);
}

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace

void Query::validate() const {
  if (indices.size() < 2) throw InvalidArgument("a query needs at least 2 inputs");
  std::unordered_set<PoolIndex> seen;
  for (PoolIndex i : indices) {
    if (!seen.insert(i).second) {
      throw InvalidArgument("query index " + std::to_string(i) + " appears twice");
    }
  }
}

std::size_t Query::position_of(PoolIndex index) const {
  const auto it = std::find(indices.begin(), indices.end(), index);
  if (it == indices.end()) {
    throw InvalidArgument("index " + std::to_string(index) + " is not part of the query");
  }
  return static_cast<std::size_t>(it - indices.begin());
}

bool Query::contains(PoolIndex index) const {
  return std::find(indices.begin(), indices.end(), index) != indices.end();
}

void Observation::validate() const {
  query.validate();
  if (const auto* r = std::get_if<TopKRanking>(&outcome)) {
    const auto k = r->winners.size();
    if (k < 1 || k >= query.size()) {
      throw InvalidArgument("top-k ranking needs 1 <= k < |C| (k = " + std::to_string(k) + ")");
    }
    std::unordered_set<PoolIndex> seen;
    for (PoolIndex w : r->winners) {
      if (!query.contains(w)) {
        throw InvalidArgument("ranked index " + std::to_string(w) + " is not part of the query");
      }
      if (!seen.insert(w).second) {
        throw InvalidArgument("ranked index " + std::to_string(w) + " appears twice");
      }
    }
  } else if (const auto* w = std::get_if<TopOneWinner>(&outcome)) {
    if (!query.contains(w->winner)) {
      throw InvalidArgument("winner " + std::to_string(w->winner) + " is not part of the query");
    }
  }
}

void TieThreshold::validate() const {
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    throw InvalidArgument("tie threshold must be finite and nonnegative");
  }
}

namespace detail {

double choice_log_prob_grad(std::span<const double> f, std::size_t chosen, double delta,
                            std::span<double> grad_f, double* grad_delta, double weight) {
  const std::size_t n = f.size();
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) top = std::max(top, j == chosen ? f[j] : f[j] + delta);
  thread_local std::vector<double> scaled;
  scaled.resize(n);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    scaled[j] = std::exp((j == chosen ? f[j] : f[j] + delta) - top);
    total += scaled[j];
  }
  const double lse = top + std::log(total);
  if (!grad_f.empty() || grad_delta != nullptr) {
    double others = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double w = scaled[j] / total;
      if (j != chosen) others += w;
      if (!grad_f.empty()) grad_f[j] += weight * ((j == chosen ? 1.0 : 0.0) - w);
    }
    if (grad_delta != nullptr) *grad_delta -= weight * others;
  }
  return f[chosen] - lse;
}

double tie_log_prob_grad(std::span<const double> f, double delta, std::span<double> grad_f,
                         double* grad_delta, double weight) {
  const std::size_t n = f.size();
  std::vector<double> probs(n);
  CompensatedSum total;
  for (std::size_t o = 0; o < n; ++o) {
    probs[o] = std::exp(choice_log_prob_grad(f, o, delta, {}, nullptr, 0.0));
    total.add(probs[o]);
  }
  const double complement = std::clamp(1.0 - total.value(), 0.0, 1.0);
  if (complement <= kTieProbabilityFloor) return std::log(kTieProbabilityFloor);
  if (!grad_f.empty() || grad_delta != nullptr) {
    // d log(1 - P) = -dP / (1 - P), and dp_o = p_o d log p_o.
    for (std::size_t o = 0; o < n; ++o) {
      choice_log_prob_grad(f, o, delta, grad_f, grad_delta, -weight * probs[o] / complement);
    }
  }
  return std::log(complement);
}

}  // namespace detail

double choice_log_prob(std::span<const double> f, std::size_t chosen, TieThreshold delta) {
  require_choice_set(f);
  delta.validate();
  if (chosen >= f.size()) throw InvalidArgument("chosen position out of range");
  return detail::choice_log_prob_grad(f, chosen, delta.delta, {}, nullptr, 0.0);
}

double topk_log_prob(std::span<const double> f, std::span<const std::size_t> ranking) {
  require_choice_set(f);
  const std::size_t n = f.size();
  if (ranking.empty() || ranking.size() >= n) {
    throw InvalidArgument("top-k ranking needs 1 <= k < |C|");
  }
  std::vector<bool> used(n, false);
  for (std::size_t r : ranking) {
    if (r >= n || used[r]) throw InvalidArgument("ranking positions must be distinct members of C");
    used[r] = true;
  }
  std::vector<double> remaining(f.begin(), f.end());
  std::vector<std::size_t> slot(n);
  for (std::size_t j = 0; j < n; ++j) slot[j] = j;
  double total = 0.0;
  for (std::size_t r : ranking) {
    const auto pos = static_cast<std::size_t>(std::find(slot.begin(), slot.end(), r) - slot.begin());
    total += detail::choice_log_prob_grad(remaining, pos, 0.0, {}, nullptr, 0.0);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pos));
    slot.erase(slot.begin() + static_cast<std::ptrdiff_t>(pos));
  }
  return total;
}

double tie_log_prob(std::span<const double> f, TieThreshold delta) {
  delta.validate();
  require_choice_set(f);
  return detail::tie_log_prob_grad(f, delta.delta, {}, nullptr, 0.0);
}

double observation_log_likelihood(const Observation& obs, const LatentValues& f_pool,
                                  TieThreshold delta) {
  obs.validate();
  delta.validate();
  std::vector<double> f;
  f.reserve(obs.query.size());
  for (PoolIndex i : obs.query.indices) {
    const auto it = f_pool.find(i);
    if (it == f_pool.end()) {
      throw InvalidArgument("no latent value for pool index " + std::to_string(i));
    }
    f.push_back(it->second);
  }
  if (const auto* r = std::get_if<TopKRanking>(&obs.outcome)) {
    std::vector<std::size_t> ranking;
    for (PoolIndex w : r->winners) ranking.push_back(obs.query.position_of(w));
    return topk_log_prob(f, ranking);
  }
  if (const auto* w = std::get_if<TopOneWinner>(&obs.outcome)) {
    return choice_log_prob(f, obs.query.position_of(w->winner), delta);
  }
  if (!delta.allows_ties()) {
    throw InvalidArgument("tie observation is impossible under a zero tie threshold");
  }
  return tie_log_prob(f, delta);
}

double dataset_log_likelihood(std::span<const Observation> data, const LatentValues& f_pool,
                              TieThreshold delta) {
  double total = 0.0;
  for (const auto& obs : data) total += observation_log_likelihood(obs, f_pool, delta);
  return total;
}

std::vector<std::vector<std::size_t>> enumerate_rankings(std::size_t n, std::size_t k) {
  if (k < 1 || k > n) throw InvalidArgument("need 1 <= k <= n to enumerate rankings");
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> current;
  std::vector<bool> used(n, false);
  auto recurse = [&](auto&& self) -> void {
    if (current.size() == k) {
      out.push_back(current);
      return;
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (used[j]) continue;
      used[j] = true;
      current.push_back(j);
      self(self);
      current.pop_back();
      used[j] = false;
    }
  };
  recurse(recurse);
  return out;
}

CompiledDataset::CompiledDataset(std::span<const Observation> data) {
  std::unordered_map<PoolIndex, std::size_t> position;
  auto locate = [&](PoolIndex i) {
    const auto [it, inserted] = position.emplace(i, inputs_.size());
    if (inserted) inputs_.push_back(i);
    return it->second;
  };
  items_.reserve(data.size());
  for (const auto& obs : data) {
    obs.validate();
    Item item;
    for (PoolIndex i : obs.query.indices) item.members.push_back(locate(i));
    if (const auto* r = std::get_if<TopKRanking>(&obs.outcome)) {
      item.kind = Kind::kRanking;
      for (PoolIndex w : r->winners) item.ranking.push_back(obs.query.position_of(w));
    } else if (const auto* w = std::get_if<TopOneWinner>(&obs.outcome)) {
      item.kind = Kind::kWinner;
      item.ranking.push_back(obs.query.position_of(w->winner));
      has_thresholded_ = true;
    } else {
      item.kind = Kind::kTie;
      has_ties_ = true;
      has_thresholded_ = true;
    }
    items_.push_back(std::move(item));
  }
}

double CompiledDataset::log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& f,
                                       TieThreshold delta) const {
  Eigen::VectorXd unused(0);
  return log_likelihood(f, delta, unused, nullptr);
}

double CompiledDataset::log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& f,
                                       TieThreshold delta, Eigen::Ref<Eigen::VectorXd> grad_f,
                                       double* grad_delta) const {
  if (static_cast<std::size_t>(f.size()) != inputs_.size()) {
    throw InvalidArgument("latent vector does not match the dataset's distinct inputs");
  }
  delta.validate();
  if (has_ties_ && !delta.allows_ties()) {
    throw InvalidArgument("tie observation is impossible under a zero tie threshold");
  }
  const bool want_grad = grad_f.size() > 0;
  thread_local std::vector<double> fc;
  thread_local std::vector<double> gc;
  thread_local std::vector<std::size_t> slot;
  thread_local std::vector<double> remaining;
  thread_local std::vector<double> rg;
  double total = 0.0;
  for (const auto& item : items_) {
    const std::size_t n = item.members.size();
    fc.resize(n);
    for (std::size_t j = 0; j < n; ++j) fc[j] = f[static_cast<Eigen::Index>(item.members[j])];
    for (double v : fc) {
      if (!std::isfinite(v)) throw NumericalFailure("non-finite latent value during likelihood");
    }
    gc.assign(n, 0.0);
    std::span<double> g = want_grad ? std::span<double>(gc) : std::span<double>();
    switch (item.kind) {
      case Kind::kWinner:
        total += detail::choice_log_prob_grad(fc, item.ranking[0], delta.delta, g, grad_delta, 1.0);
        break;
      case Kind::kTie:
        total += detail::tie_log_prob_grad(fc, delta.delta, g, grad_delta, 1.0);
        break;
      case Kind::kRanking: {
        if (item.ranking.size() == 1) {
          total += detail::choice_log_prob_grad(fc, item.ranking[0], 0.0, g, nullptr, 1.0);
          break;
        }
        // Peel winners off one at a time; slot maps the shrinking set back to C.
        slot.resize(n);
        for (std::size_t j = 0; j < n; ++j) slot[j] = j;
        remaining.assign(fc.begin(), fc.end());
        for (std::size_t r : item.ranking) {
          const auto pos =
              static_cast<std::size_t>(std::find(slot.begin(), slot.end(), r) - slot.begin());
          rg.assign(remaining.size(), 0.0);
          total += detail::choice_log_prob_grad(remaining, pos, 0.0,
                                                want_grad ? std::span<double>(rg) : std::span<double>(),
                                                nullptr, 1.0);
          if (want_grad) {
            for (std::size_t j = 0; j < remaining.size(); ++j) gc[slot[j]] += rg[j];
          }
          remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pos));
          slot.erase(slot.begin() + static_cast<std::ptrdiff_t>(pos));
        }
        break;
      }
    }
    if (want_grad) {
      for (std::size_t j = 0; j < n; ++j) grad_f[static_cast<Eigen::Index>(item.members[j])] += gc[j];
    }
  }
  return total;
}

}  // namespace prefopt
