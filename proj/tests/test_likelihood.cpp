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

#include <doctest.h>

#include <cmath>
#include <random>

#include "prefopt/errors.hpp"
#include "prefopt/likelihood.hpp"

using namespace prefopt;

TEST_CASE("choice probabilities") {
  const std::vector<double> f = {1.0, 0.0};
  CHECK(choice_log_prob(f, 0, {0.0}) == doctest::Approx(std::log(0.7310585786300049)).epsilon(1e-13));
  const std::vector<double> flat = {0.0, 0.0};
  CHECK(choice_log_prob(flat, 1, {std::log(3.0)}) == doctest::Approx(std::log(0.25)).epsilon(1e-13));
}

TEST_CASE("top-k ranking probability") {
  const std::vector<double> f = {1.0, 0.0, 0.0};
  const std::vector<std::size_t> ranking = {0, 1};
  CHECK(topk_log_prob(f, ranking) == doctest::Approx(std::log(0.28805844238291455)).epsilon(1e-13));
}

TEST_CASE("tie probabilities") {
  const std::vector<double> flat = {0.0, 0.0};
  CHECK(tie_log_prob(flat, {std::log(3.0)}) == doctest::Approx(std::log(0.5)).epsilon(1e-13));
  CHECK(tie_log_prob(flat, {std::log(9.0)}) == doctest::Approx(std::log(0.8)).epsilon(1e-13));
  CHECK(tie_log_prob(flat, {0.0}) == doctest::Approx(std::log(kTieProbabilityFloor)));
}

TEST_CASE("extreme utilities stay finite") {
  const std::vector<double> f = {1000.0, 0.0, -1000.0};
  CHECK(choice_log_prob(f, 0, {0.0}) == doctest::Approx(0.0));
  CHECK(std::isfinite(choice_log_prob(f, 2, {0.0})));
  CHECK(std::isfinite(tie_log_prob(f, {0.5})));
  const std::vector<std::size_t> r = {2, 1};
  CHECK(std::isfinite(topk_log_prob(f, r)));
}

TEST_CASE("probabilities are invariant to a common shift") {
  Rng rng(4);
  std::normal_distribution<double> normal;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> f(4), g(4);
    for (std::size_t i = 0; i < 4; ++i) {
      f[i] = normal(rng);
      g[i] = f[i] + 7.5;
    }
    const std::vector<std::size_t> r = {3, 0};
    CHECK(topk_log_prob(f, r) == doctest::Approx(topk_log_prob(g, r)).epsilon(1e-12));
    CHECK(tie_log_prob(f, {0.4}) == doctest::Approx(tie_log_prob(g, {0.4})).epsilon(1e-12));
  }
}

TEST_CASE("ranking enumeration") {
  CHECK(enumerate_rankings(5, 3).size() == 60);
  CHECK(enumerate_rankings(4, 1).size() == 4);
  const auto r = enumerate_rankings(3, 2);
  CHECK(r.front() == std::vector<std::size_t>{0, 1});
  CHECK(r.back() == std::vector<std::size_t>{2, 1});
}

TEST_CASE("observation validation") {
  CHECK_THROWS_AS(Query{{3}}.validate(), InvalidArgument);
  CHECK_THROWS_AS((Query{{3, 3}}.validate()), InvalidArgument);
  CHECK_THROWS_AS((Observation{Query{{1, 2}}, TopKRanking{{5}}}.validate()), InvalidArgument);
  CHECK_THROWS_AS((Observation{Query{{1, 2, 3}}, TopKRanking{{1, 1}}}.validate()), InvalidArgument);
  CHECK_THROWS_AS((Observation{Query{{1, 2}}, TopKRanking{{1, 2}}}.validate()), InvalidArgument);
  CHECK_THROWS_AS((Observation{Query{{1, 2}}, TopOneWinner{7}}.validate()), InvalidArgument);
  CHECK_NOTHROW((Observation{Query{{1, 2}}, Tie{}}.validate()));
  CHECK_THROWS_AS(TieThreshold{-0.1}.validate(), InvalidArgument);
}

TEST_CASE("single pairwise observation") {
  const Observation obs{Query{{4, 9}}, TopKRanking{{4}}};
  const LatentValues f = {{4, 1.0}, {9, 0.0}};
  CHECK(observation_log_likelihood(obs, f, {0.0}) == doctest::Approx(std::log(0.7310585786300049)));
}

TEST_CASE("compiled dataset agrees with the map form and its gradient with finite differences") {
  const std::vector<Observation> data = {{Query{{7, 2}}, TopOneWinner{2}},
                                         {Query{{2, 5, 7}}, Tie{}},
                                         {Query{{5, 1, 7, 2}}, TopKRanking{{1, 7}}},
                                         {Query{{1, 2}}, TopKRanking{{1}}}};
  const CompiledDataset compiled(data);
  CHECK(compiled.inputs() == std::vector<PoolIndex>{7, 2, 5, 1});
  CHECK(compiled.has_ties());
  Eigen::VectorXd f(4);
  f << 0.3, -0.5, 1.1, 0.2;
  LatentValues map;
  for (std::size_t i = 0; i < 4; ++i) map[compiled.inputs()[i]] = f[static_cast<Eigen::Index>(i)];
  const TieThreshold delta{0.6};
  const double ll = compiled.log_likelihood(f, delta);
  CHECK(ll == doctest::Approx(dataset_log_likelihood(data, map, delta)).epsilon(1e-13));

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(4);
  double grad_delta = 0.0;
  compiled.log_likelihood(f, delta, grad, &grad_delta);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < 4; ++i) {
    Eigen::VectorXd up = f, down = f;
    up[i] += h;
    down[i] -= h;
    const double fd = (compiled.log_likelihood(up, delta) - compiled.log_likelihood(down, delta)) / (2 * h);
    CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-6));
  }
  const double fd_delta =
      (compiled.log_likelihood(f, {0.6 + h}) - compiled.log_likelihood(f, {0.6 - h})) / (2 * h);
  CHECK(grad_delta == doctest::Approx(fd_delta).epsilon(1e-6));
}

TEST_CASE("dataset likelihood edge cases") {
  const LatentValues f = {{0, 0.2}, {1, -0.4}, {2, 1.0}};
  CHECK(dataset_log_likelihood({}, f, {0.0}) == 0.0);
  const Observation tie{Query{{0, 1}}, Tie{}};
  CHECK_THROWS_AS(observation_log_likelihood(tie, f, {0.0}), InvalidArgument);
  const std::vector<Observation> two = {{Query{{0, 1}}, TopKRanking{{1}}}, {Query{{1, 2}}, TopKRanking{{2}}}};
  CHECK(dataset_log_likelihood(two, f, {0.0}) ==
        doctest::Approx(observation_log_likelihood(two[0], f, {0.0}) + observation_log_likelihood(two[1], f, {0.0})));
  CHECK_THROWS_AS(observation_log_likelihood(Observation{Query{{0, 7}}, TopKRanking{{0}}}, f, {0.0}),
                  InvalidArgument);
}
