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

// Acceptance checks. Each criterion prints one PASS or FAIL line. With a
// criterion name as the only argument just that one runs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "prefopt/acquisition.hpp"
#include "prefopt/harness.hpp"
#include "prefopt/inference.hpp"
#include "prefopt/likelihood.hpp"
#include "prefopt/oracle.hpp"

namespace {

using namespace prefopt;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

// Outcome key shared by the simulator and the closed forms: a ranking as
// positions in C, or {SIZE_MAX} for a tie.
using OutcomeKey = std::vector<std::size_t>;

OutcomeKey key_of(const Observation& obs) {
  if (const auto* r = std::get_if<TopKRanking>(&obs.outcome)) {
    OutcomeKey key;
    for (PoolIndex w : r->winners) key.push_back(obs.query.position_of(w));
    return key;
  }
  if (const auto* w = std::get_if<TopOneWinner>(&obs.outcome)) return {obs.query.position_of(w->winner)};
  return {SIZE_MAX};
}

Verdict gumbel_equivalence() {
  constexpr std::size_t kDraws = 100000;
  Rng rng(20240611);
  std::uniform_int_distribution<std::size_t> size_dist(2, 4);
  std::uniform_int_distribution<int> pick(0, 2);
  std::uniform_real_distribution<double> f_dist(-1.5, 1.5);
  const double deltas[] = {0.0, 0.5, 1.0};
  std::size_t checked = 0;
  double worst = 0.0;
  for (int c = 0; c < 20; ++c) {
    const std::size_t n = size_dist(rng);
    const double delta = deltas[pick(rng)];
    const std::size_t k = delta > 0.0 ? 1 : 1 + (rng() % 2);
    std::vector<double> f(n);
    for (auto& v : f) v = f_dist(rng);
    Query query;
    for (std::size_t i = 0; i < n; ++i) query.indices.push_back(i);
    OracleConfig oc;
    oc.delta_true = delta;
    oc.k = k;
    oc.query_size = n;
    std::map<OutcomeKey, std::size_t> counts;
    for (std::size_t s = 0; s < kDraws; ++s) ++counts[key_of(observe_values(query, f, oc, rng))];

    std::vector<std::pair<OutcomeKey, double>> expected;
    if (delta > 0.0) {
      for (std::size_t i = 0; i < n; ++i) expected.push_back({{i}, std::exp(choice_log_prob(f, i, {delta}))});
      expected.push_back({{SIZE_MAX}, std::exp(tie_log_prob(f, {delta}))});
    } else {
      for (const auto& r : enumerate_rankings(n, k)) expected.push_back({r, std::exp(topk_log_prob(f, r))});
    }
    std::size_t covered = 0;
    for (const auto& [key, p] : expected) {
      const auto it = counts.find(key);
      const double hits = it == counts.end() ? 0.0 : static_cast<double>(it->second);
      covered += static_cast<std::size_t>(hits);
      const double se = std::sqrt(p * (1.0 - p) / kDraws);
      const double z = std::abs(hits / kDraws - p) / std::max(se, 1e-12);
      worst = std::max(worst, z);
      ++checked;
      if (z > 3.0) {
        return {false, fmt("config %d (|C|=%zu k=%zu delta=%.1f): outcome off by %.2f standard errors", c, n, k,
                           delta, z)};
      }
    }
    if (covered != kDraws) return {false, fmt("config %d produced outcomes outside the closed-form space", c)};
  }
  return {true, fmt("%zu outcomes over 20 configurations, worst deviation %.2f standard errors", checked, worst)};
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Verdict pl_normalization() {
  Rng rng(77);
  std::normal_distribution<double> normal(0.0, 2.0);
  double worst = 0.0;
  for (std::size_t n = 2; n <= 5; ++n) {
    for (std::size_t k = 1; k <= std::min<std::size_t>(3, n - 1); ++k) {
      const auto rankings = enumerate_rankings(n, k);
      for (int t = 0; t < 100; ++t) {
        std::vector<double> f(n);
        for (auto& v : f) v = normal(rng);
        double total = 0.0;
        for (const auto& r : rankings) total += std::exp(topk_log_prob(f, r));
        worst = std::max(worst, std::abs(total - 1.0));
      }
    }
  }
  if (worst > 1e-10) return {false, fmt("top-k probabilities sum to 1 only within %.3g", worst)};

  // Three points with p(x0 > x1) = 0.1 and p(x1 > x2) = 0.2 under a logistic
  // pairwise model. The marginalization identity
  //   p(x0 > x1) = p(0,1,2) + p(0,2,1) + p(2,0,1)
  // fails for both rankings-as-products-of-pairs constructions.
  const double f1 = 0.0;
  const double f0 = f1 + std::log(0.1 / 0.9);
  const double f2 = f1 - std::log(0.2 / 0.8);
  const std::vector<double> f = {f0, f1, f2};
  auto pair = [&](std::size_t i, std::size_t j) { return sigmoid(f[i] - f[j]); };
  auto all_pairs = [&](std::size_t a, std::size_t b, std::size_t c) { return pair(a, b) * pair(a, c) * pair(b, c); };
  auto consecutive = [&](std::size_t a, std::size_t b, std::size_t c) { return pair(a, b) * pair(b, c); };
  auto pl = [&](std::size_t a, std::size_t b, std::size_t c) {
    (void)c;
    const std::vector<std::size_t> r = {a, b};
    return std::exp(topk_log_prob(f, r));
  };
  auto gap = [&](const auto& p) { return std::abs(pair(0, 1) - (p(0, 1, 2) + p(0, 2, 1) + p(2, 0, 1))); };
  const double gap_all = gap(all_pairs);
  const double gap_consecutive = gap(consecutive);
  const double gap_pl = gap(pl);
  const bool ok = gap_all > 0.01 && gap_consecutive > 0.01 && gap_pl < 1e-12;
  return {ok, fmt("sum error %.2g; identity violated by %.4f (all pairs) and %.4f (consecutive pairs), "
                  "Plackett-Luce %.1g",
                  worst, gap_all, gap_consecutive, gap_pl)};
}

Verdict tie_partition() {
  Rng rng(91);
  std::uniform_int_distribution<std::size_t> size_dist(2, 5);
  std::normal_distribution<double> normal(0.0, 2.0);
  std::uniform_real_distribution<double> delta_dist(0.01, 3.0);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> f(size_dist(rng));
    for (auto& v : f) v = normal(rng);
    const TieThreshold delta{delta_dist(rng)};
    double total = std::exp(tie_log_prob(f, delta));
    for (std::size_t i = 0; i < f.size(); ++i) total += std::exp(choice_log_prob(f, i, delta));
    worst = std::max(worst, std::abs(total - 1.0));
  }
  return {worst <= 1e-10, fmt("winners plus tie sum to 1 within %.3g", worst)};
}

Verdict elbo_gradient() {
  const auto pool = CandidatePool::grid(0.0, 1.0, 5);
  const std::vector<Observation> data = {{Query{{0, 1}}, TopOneWinner{1}},
                                         {Query{{1, 2, 3}}, Tie{}},
                                         {Query{{2, 4}}, TopOneWinner{4}},
                                         {Query{{0, 3}}, TopOneWinner{3}}};
  const CompiledDataset compiled(data);
  VariationalPosterior q;
  q.mean = Eigen::VectorXd(5);
  q.mean << 0.3, -0.2, 0.1, 0.45, -0.4;
  q.chol_factor = 0.3 * Eigen::MatrixXd::Identity(5, 5);
  q.chol_factor(3, 1) = 0.1;
  q.chol_factor(4, 0) = -0.2;
  q.chol_factor(2, 2) = 0.5;
  KernelParams kernel;
  kernel.signal_variance = 1.3;
  kernel.length_scales = Eigen::VectorXd::Constant(1, 0.4);

  Rng rng(3);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd noise(16, 5);
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = normal(rng);

  constexpr double h = 1e-4;
  double worst = 0.0;
  std::string where;
  for (auto par : {ElboParameterization::kDirect, ElboParameterization::kWhitened}) {
    const ElboObjective objective(compiled, pool.rows(compiled.inputs()), true, 0.0, par);
    const Eigen::VectorXd theta = objective.pack(q, kernel, {0.7});
    Eigen::VectorXd grad;
    objective.evaluate(theta, noise, &grad);
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      Eigen::VectorXd up = theta, down = theta;
      up[i] += h;
      down[i] -= h;
      const double fd = (objective.evaluate(up, noise, nullptr) - objective.evaluate(down, noise, nullptr)) / (2 * h);
      const double rel = std::abs(fd - grad[i]) / std::max(std::abs(fd), 1e-6);
      if (rel > worst) {
        worst = rel;
        where = fmt("%s parameter %ld", par == ElboParameterization::kDirect ? "direct" : "whitened",
                    static_cast<long>(i));
      }
    }
  }
  return {worst < 1e-3, fmt("worst relative error %.3g (%s) over mean, factor, length-scale, variance, threshold",
                            worst, where.c_str())};
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size(); ++i) r[order[i]] = static_cast<double>(i);
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

Verdict posterior_sanity() {
  const auto pool = CandidatePool::grid(0.0, 1.0, 20);
  const auto truth = Objective::forrester().values_on(pool);
  Rng rng(5);
  std::vector<Observation> data;
  for (int r = 0; r < 3; ++r) {
    Query query;
    query.indices.resize(pool.size());
    std::iota(query.indices.begin(), query.indices.end(), 0);
    std::shuffle(query.indices.begin(), query.indices.end(), rng);
    std::vector<PoolIndex> order = query.indices;
    std::sort(order.begin(), order.end(), [&](PoolIndex a, PoolIndex b) { return truth[a] > truth[b]; });
    order.pop_back();
    data.push_back({query, TopKRanking{order}});
  }
  const auto fitted = fit(data, pool, FitConfig{}, rng);
  const auto belief = pool_belief(pool, fitted);
  const std::vector<double> mean(belief.mean.data(), belief.mean.data() + belief.mean.size());
  const double rho = spearman(mean, truth);
  return {rho >= 0.9, fmt("Spearman correlation %.4f", rho)};
}

Verdict mpes_estimator() {
  std::vector<std::string> notes;
  bool ok = true;
  Rng rng(11);

  // A random correlated belief over 8 points.
  const auto pool = CandidatePool::grid(0.0, 1.0, 8);
  KernelParams kernel;
  kernel.length_scales = Eigen::VectorXd::Constant(1, 0.3);
  GaussianBelief belief = prior_predict(kernel, pool.points());
  belief.mean << 0.2, -0.1, 0.5, 0.4, 0.0, 0.6, -0.3, 0.1;
  const MaximizerSet xs = build_maximizer_set(pool, belief, 5, 20000, rng);

  // Nonnegativity over random queries and outcome models.
  double lowest = INFINITY;
  for (int t = 0; t < 30; ++t) {
    AcquisitionConfig ac;
    ac.query_size = 2 + static_cast<std::size_t>(t % 3);
    ac.k = 1 + static_cast<std::size_t>(t % 2) * (ac.query_size > 2 ? 1 : 0);
    ac.mc_samples = 2000;
    std::vector<PoolIndex> all(pool.size());
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    const Query query{{all.begin(), all.begin() + static_cast<long>(ac.query_size)}};
    lowest = std::min(lowest, mpes_score(query, xs, belief, ac, {0.0}, rng));
  }
  if (lowest < -0.01) ok = false;
  notes.push_back(fmt("min score %.4f", lowest));

  // Permutation invariance with shared samples, against the spread of
  // independent estimates.
  AcquisitionConfig ac3;
  ac3.query_size = 3;
  ac3.k = 1;
  ac3.mc_samples = 5000;
  const Query forward{{1, 3, 5}};
  const Query reversed{{5, 1, 3}};
  std::vector<double> repeats;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng r(1000 + s);
    repeats.push_back(mpes_score(forward, xs, belief, ac3, {0.0}, r));
  }
  const double avg = std::accumulate(repeats.begin(), repeats.end(), 0.0) / repeats.size();
  double var = 0.0;
  for (double v : repeats) var += (v - avg) * (v - avg);
  const double se = std::sqrt(var / (repeats.size() - 1));
  Rng ra(42), rb(42);
  const double a = mpes_score(forward, xs, belief, ac3, {0.0}, ra);
  const double b = mpes_score(reversed, xs, belief, ac3, {0.0}, rb);
  if (std::abs(a - b) > 2.0 * se) ok = false;
  notes.push_back(fmt("reorder gap %.2g vs 2SE %.2g", std::abs(a - b), 2.0 * se));

  // Query independent of the maximizer set: block-diagonal covariance.
  GaussianBelief split;
  split.mean = Eigen::VectorXd::Zero(5);
  split.covariance = Eigen::MatrixXd::Zero(5, 5);
  split.covariance.topLeftCorner(3, 3) = prior_predict(kernel, pool.points().topRows(3)).covariance;
  split.covariance.bottomRightCorner(2, 2) << 1.0, 0.4, 0.4, 1.0;
  MaximizerSet block{{0, 1, 2}, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
  AcquisitionConfig ac2;
  ac2.mc_samples = 100000;
  const double independent = mpes_score(Query{{3, 4}}, block, split, ac2, {0.0}, rng);
  if (std::abs(independent) > 0.01) ok = false;
  notes.push_back(fmt("independent query %.4f", independent));

  // Sampled-outcome variant against the enumerating estimator.
  struct Case {
    std::size_t size, k;
    bool ties;
    double delta;
    Query query;
  };
  const std::vector<Case> cases = {{3, 1, false, 0.0, Query{{1, 3, 5}}},
                                   {3, 2, false, 0.0, Query{{2, 3, 5}}},
                                   {4, 2, false, 0.0, Query{{0, 2, 3, 5}}},
                                   {3, 1, true, 0.5, Query{{2, 3, 5}}}};
  double worst = 0.0;
  for (const auto& c : cases) {
    AcquisitionConfig ac;
    ac.query_size = c.size;
    ac.k = c.k;
    ac.use_ties = c.ties;
    ac.mc_samples = 50000;
    Rng r1(7), r2(8);
    const double exact = mpes_score(c.query, xs, belief, ac, {c.delta}, r1);
    const double sampled = mpes_score_stochastic(c.query, xs, belief, ac, {c.delta}, r2);
    worst = std::max(worst, std::abs(exact - sampled));
  }
  if (worst > 0.05) ok = false;
  notes.push_back(fmt("stochastic gap %.4f", worst));

  std::string detail;
  for (const auto& n : notes) detail += (detail.empty() ? "" : "; ") + n;
  return {ok, detail};
}

struct RunSummary {
  double initial = 0.0;
  double final = 0.0;
  std::size_t failures = 0;
};

RunSummary summarize(const std::vector<RegretTrace>& traces) {
  RunSummary s;
  std::size_t ok = 0;
  for (const auto& t : traces) {
    if (!t.ok || t.records.empty()) {
      ++s.failures;
      continue;
    }
    s.initial += t.records.front().regret;
    s.final += t.records.back().regret;
    ++ok;
  }
  if (ok > 0) {
    s.initial /= static_cast<double>(ok);
    s.final /= static_cast<double>(ok);
  }
  return s;
}

ExperimentConfig forrester_experiment(AcquisitionKind kind, std::size_t iterations, std::size_t reps) {
  ExperimentConfig c;
  c.objective.kind = "forrester";
  c.acquisition = kind;
  c.iterations = iterations;
  c.repetitions = reps;
  c.initial_observations = 5;
  c.seed = 1000;
  return c;
}

Verdict bo_efficacy() {
  const auto mpes = summarize(run_bo(forrester_experiment(AcquisitionKind::kMpes, 25, 10)));
  const auto random = summarize(run_bo(forrester_experiment(AcquisitionKind::kRandom, 25, 10)));
  const auto ei = summarize(run_bo(forrester_experiment(AcquisitionKind::kEiPair, 25, 10)));
  const bool a = mpes.final <= 0.5 * mpes.initial;
  const bool b = mpes.final < random.final;
  const bool c = mpes.final <= ei.final + 0.1;
  const std::size_t failures = mpes.failures + random.failures + ei.failures;
  return {a && b && c && failures == 0,
          fmt("MPES initial %.4f final %.4f; random final %.4f; EI-pair final %.4f; (a)%s (b)%s (c)%s; "
              "%zu failed runs",
              mpes.initial, mpes.final, random.final, ei.final, a ? "ok" : "no", b ? "ok" : "no",
              c ? "ok" : "no", failures)};
}

Verdict ranking_advantage() {
  auto four = forrester_experiment(AcquisitionKind::kMpes, 20, 10);
  four.acquisition_config.query_size = four.oracle.query_size = 4;
  const auto pair = summarize(run_bo(forrester_experiment(AcquisitionKind::kMpes, 20, 10)));
  const auto quad = summarize(run_bo(four));
  return {quad.final <= pair.final && pair.failures + quad.failures == 0,
          fmt("mean final regret |C|=4 %.4f, |C|=2 %.4f; %zu failed runs", quad.final, pair.final,
              pair.failures + quad.failures)};
}

Verdict tie_ablation() {
  auto aware = forrester_experiment(AcquisitionKind::kMpes, 25, 5);
  aware.oracle.delta_true = 2.0;
  aware.fit.learn_delta = true;
  aware.acquisition_config.use_ties = true;
  auto converted = forrester_experiment(AcquisitionKind::kMpes, 25, 5);
  converted.oracle.delta_true = 2.0;
  converted.oracle.convert_ties = true;
  converted.fit.fixed_delta = 0.0;
  const auto a = summarize(run_bo(aware));
  const auto c = summarize(run_bo(converted));
  return {a.final <= c.final && a.failures + c.failures == 0,
          fmt("mean final regret tie-aware %.4f, ties converted %.4f; %zu failed runs", a.final, c.final,
              a.failures + c.failures)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict determinism() {
  const auto root = std::filesystem::temp_directory_path() /
                    ("prefopt-determinism-" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
  std::vector<std::string> mismatched;
  std::size_t compared = 0;
  for (auto kind : {AcquisitionKind::kMpes, AcquisitionKind::kRandom, AcquisitionKind::kEiPair}) {
    auto config = forrester_experiment(kind, 4, 2);
    config.fit.steps = 300;
    if (kind == AcquisitionKind::kMpes) {
      config.oracle.delta_true = 1.0;
      config.fit.learn_delta = true;
      config.acquisition_config.use_ties = true;
    }
    std::string first[3];
    for (int pass = 0; pass < 2; ++pass) {
      config.output_dir = root / (to_string(kind) + std::to_string(pass));
      run_bo(config);
      const char* files[] = {"regrets.csv", "observations.jsonl", "fits.jsonl"};
      for (int f = 0; f < 3; ++f) {
        const auto bytes = slurp(config.output_dir / files[f]);
        if (pass == 0) {
          first[f] = bytes;
        } else {
          ++compared;
          if (bytes.empty() || bytes != first[f]) mismatched.push_back(to_string(kind) + "/" + files[f]);
        }
      }
    }
  }
  std::filesystem::remove_all(root);
  std::string detail = fmt("%zu file pairs compared", compared);
  for (const auto& m : mismatched) detail += "; differs: " + m;
  return {mismatched.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"gumbel_equivalence", gumbel_equivalence}, {"pl_normalization", pl_normalization},
      {"tie_partition", tie_partition},           {"elbo_gradient", elbo_gradient},
      {"posterior_sanity", posterior_sanity},     {"mpes_estimator", mpes_estimator},
      {"bo_efficacy", bo_efficacy},               {"ranking_advantage", ranking_advantage},
      {"tie_ablation", tie_ablation},             {"determinism", determinism},
  };
  const std::string only = argc > 1 ? argv[1] : "";
  bool all_passed = true;
  bool matched = false;
  for (const auto& [name, check] : criteria) {
    if (!only.empty() && only != name) continue;
    matched = true;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %s: %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str(), secs);
    std::fflush(stdout);
    all_passed = all_passed && v.pass;
  }
  if (!matched) {
    std::fprintf(stderr, "unknown criterion '%s'\n", only.c_str());
    return 2;
  }
  return all_passed ? 0 : 1;
}
