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
#include <fstream>
#include <numeric>
#include <sstream>

#include "prefopt/errors.hpp"
#include "prefopt/oracle.hpp"

using namespace prefopt;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

double frequency(std::size_t hits, std::size_t n) { return static_cast<double>(hits) / static_cast<double>(n); }

}  // namespace

TEST_CASE("Forrester values") {
  const auto f = Objective::forrester();
  CHECK(f.evaluate(Eigen::VectorXd::Zero(1)) == doctest::Approx(-3.027209981231713).epsilon(1e-12));
  const auto pool = CandidatePool::grid(0.0, 1.0, 1000000);
  const auto values = f.values_on(pool);
  const auto best = std::max_element(values.begin(), values.end());
  CHECK(*best == doctest::Approx(6.0207400557670825).epsilon(1e-9));
  CHECK(pool.points()(best - values.begin(), 0) == doctest::Approx(0.75725).epsilon(1e-4));
}

TEST_CASE("six-hump camel values") {
  const auto f = Objective::six_hump_camel();
  CHECK(f.evaluate(Eigen::Vector2d(0.0, 0.0)) == 0.0);
  CHECK(f.evaluate(Eigen::Vector2d(0.08984201, -0.71265640)) == doctest::Approx(1.0316284534898728).epsilon(1e-8));
  CHECK(f.evaluate(Eigen::Vector2d(-0.08984201, 0.71265640)) == doctest::Approx(1.0316284534898728).epsilon(1e-8));
}

TEST_CASE("Hartmann-3 values") {
  const auto f = Objective::hartmann3();
  CHECK(f.evaluate(Eigen::Vector3d(0.11458888, 0.55564889, 0.85254698)) ==
        doctest::Approx(3.862779787332663).epsilon(1e-8));
  // A 100^3 cell-centred grid scan stays just under the continuous optimum.
  double best = -INFINITY;
  for (int i = 0; i < 100; ++i) {
    for (int j = 0; j < 100; ++j) {
      for (int k = 0; k < 100; ++k) {
        best = std::max(best, f.evaluate(Eigen::Vector3d((i + 0.5) / 100, (j + 0.5) / 100, (k + 0.5) / 100)));
      }
    }
  }
  CHECK(best == doctest::Approx(3.8621721523127035).epsilon(1e-9));
  CHECK(best < 3.862779787332663);
}

TEST_CASE("objectives reject points outside their domain") {
  CHECK_THROWS_AS(Objective::forrester().evaluate(Eigen::VectorXd::Constant(1, 1.5)), InvalidArgument);
  CHECK_THROWS_AS(Objective::hartmann3().evaluate(Eigen::Vector2d(0.5, 0.5)), InvalidArgument);
}

TEST_CASE("Gumbel noise has the Euler-Mascheroni mean") {
  Rng rng(1);
  const std::vector<double> zero(1000000, 0.0);
  const auto u = sample_gumbel_utilities(zero, rng);
  const double mean = std::accumulate(u.begin(), u.end(), 0.0) / u.size();
  CHECK(std::abs(mean - 0.5772156649015329) < 0.004);
}

TEST_CASE("simulated ties match the closed form") {
  OracleConfig c;
  c.delta_true = std::log(3.0);
  const std::vector<double> f = {0.0, 0.0};
  const Query q{{0, 1}};
  Rng rng(2);
  constexpr std::size_t n = 100000;
  std::size_t ties = 0;
  for (std::size_t s = 0; s < n; ++s) ties += std::holds_alternative<Tie>(observe_values(q, f, c, rng).outcome);
  CHECK(std::abs(frequency(ties, n) - 0.5) < 3.0 * std::sqrt(0.25 / n));
}

TEST_CASE("simulated top-2 rankings match the closed form") {
  OracleConfig c;
  c.k = 2;
  c.query_size = 3;
  const std::vector<double> f = {1.0, 0.0, 0.0};
  const Query q{{10, 11, 12}};
  Rng rng(3);
  constexpr std::size_t n = 100000;
  std::size_t hits = 0;
  for (std::size_t s = 0; s < n; ++s) {
    const auto obs = observe_values(q, f, c, rng);
    hits += std::get<TopKRanking>(obs.outcome).winners == std::vector<PoolIndex>{10, 11};
  }
  const double p = 0.28805844238291455;
  CHECK(std::abs(frequency(hits, n) - p) < 3.0 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("converted ties become random strict preferences") {
  OracleConfig c;
  c.delta_true = 5.0;
  c.convert_ties = true;
  const std::vector<double> f = {0.0, 0.0};
  const Query q{{3, 8}};
  Rng rng(4);
  std::size_t first = 0;
  for (int s = 0; s < 2000; ++s) {
    const auto obs = observe_values(q, f, c, rng);
    REQUIRE(std::holds_alternative<TopKRanking>(obs.outcome));
    first += std::get<TopKRanking>(obs.outcome).winners[0] == 3;
  }
  CHECK(first > 900);
  CHECK(first < 1100);
}

TEST_CASE("oracle config validation") {
  OracleConfig c;
  c.k = 2;
  c.query_size = 3;
  c.delta_true = 0.5;
  CHECK_THROWS_AS(c.validate(), Unsupported);
  c = OracleConfig{};
  c.convert_ties = true;
  c.query_size = 3;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("generate_observation evaluates the objective on the pool") {
  const auto pool = CandidatePool::grid(0.0, 1.0, 200);
  OracleConfig c;
  c.k = 1;
  c.query_size = 2;
  Rng rng(5);
  // The global maximum region beats x = 0 by about 9, so it nearly always wins.
  std::size_t wins = 0;
  for (int s = 0; s < 1000; ++s) {
    const auto obs = generate_observation(Objective::forrester(), pool, Query{{0, 151}}, c, rng);
    wins += std::get<TopKRanking>(obs.outcome).winners[0] == 151;
  }
  CHECK(wins > 990);
}

TEST_CASE("tabular files") {
  const auto problem = load_tabular(PREFOPT_TEST_DATA "/synthetic_100.csv");
  CHECK(problem.pool.size() == 100);
  CHECK(problem.pool.dim() == 2);
  CHECK(problem.pool.labels().at(11) == "item-011");
  const auto& u = problem.objective.utilities();
  std::size_t scan = 0;
  for (std::size_t i = 1; i < u.size(); ++i) {
    if (u[i] > u[scan]) scan = i;
  }
  CHECK(std::max_element(u.begin(), u.end()) - u.begin() == static_cast<long>(scan));
  CHECK(scan == 11);
  CHECK(problem.objective.evaluate(problem.pool.point(11)) == u[11]);

  const auto text = read_file(PREFOPT_TEST_DATA "/synthetic_100.csv");
  CHECK(parse_tabular("\xEF\xBB\xBF" + text).pool.size() == 100);
}

TEST_CASE("tabular parse errors carry line numbers") {
  try {
    parse_tabular("x1,utility\n0.1,1.0\n0.2,abc\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_tabular("x1,score\n0.1,1\n0.2,2\n"), ParseError);
  CHECK_THROWS_AS(parse_tabular("x1,utility\n0.1,1\n0.2\n"), ParseError);
  CHECK_THROWS_AS(parse_tabular("x1,utility\n0.1,1\n0.1,2\n"), InvalidArgument);
  CHECK(parse_tabular("x1,utility\n0.1,1\n\n0.2,2\n").pool.size() == 2);
}
