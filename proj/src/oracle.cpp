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

#include "prefopt/oracle.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "prefopt/errors.hpp"

namespace prefopt {
namespace {

constexpr std::array<double, 4> kHartmannAlpha = {1.0, 1.2, 3.0, 3.2};
constexpr std::array<std::array<double, 3>, 4> kHartmannA = {{
    {3.0, 10.0, 30.0},
    {0.1, 10.0, 35.0},
    {3.0, 10.0, 30.0},
    {0.1, 10.0, 35.0},
}};
constexpr std::array<std::array<double, 3>, 4> kHartmannP = {{
    {0.3689, 0.1170, 0.2673},
    {0.4699, 0.4387, 0.7470},
    {0.1091, 0.8732, 0.5547},
    {0.0381, 0.5743, 0.8828},
}};

double forrester_value(double x) { return -(6.0 * x - 2.0) * (6.0 * x - 2.0) * std::sin(12.0 * x - 4.0); }

double six_hump_camel_value(double x1, double x2) {
  const double a = x1 * x1;
  const double b = x2 * x2;
  return -((4.0 - 2.1 * a + a * a / 3.0) * a + x1 * x2 + (-4.0 + 4.0 * b) * b);
}

double hartmann3_value(std::span<const double> x) {
  double total = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    double inner = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      const double d = x[j] - kHartmannP[i][j];
      inner += kHartmannA[i][j] * d * d;
    }
    total += kHartmannAlpha[i] * std::exp(-inner);
  }
  return total;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_number(std::string_view field, std::size_t line, const char* what) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw ParseError(line, std::string("non-numeric ") + what + " '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

Objective::Objective(ObjectiveKind kind, Eigen::VectorXd low, Eigen::VectorXd high)
    : kind_(kind), low_(std::move(low)), high_(std::move(high)) {}

Objective Objective::forrester() {
  return Objective(ObjectiveKind::kForrester, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1));
}

Objective Objective::six_hump_camel() {
  return Objective(ObjectiveKind::kSixHumpCamel, Eigen::VectorXd::Constant(2, -1.5),
                   Eigen::VectorXd::Constant(2, 1.5));
}

Objective Objective::hartmann3() {
  return Objective(ObjectiveKind::kHartmann3, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(3));
}

Objective Objective::tabular(CandidatePool pool, std::vector<double> utilities) {
  if (utilities.size() != pool.size()) {
    throw InvalidArgument("tabular utilities must align with the pool");
  }
  for (double u : utilities) {
    if (!std::isfinite(u)) throw InvalidArgument("tabular utilities must be finite");
  }
  Objective out(ObjectiveKind::kTabular, pool.low(), pool.high());
  out.pool_ = std::make_shared<const CandidatePool>(std::move(pool));
  out.utilities_ = std::move(utilities);
  return out;
}

std::string Objective::name() const {
  switch (kind_) {
    case ObjectiveKind::kForrester: return "forrester";
    case ObjectiveKind::kSixHumpCamel: return "six_hump_camel";
    case ObjectiveKind::kHartmann3: return "hartmann3";
    case ObjectiveKind::kTabular: return "tabular";
  }
  return "unknown";
}

double Objective::evaluate(std::span<const double> x) const {
  if (x.size() != dim()) throw InvalidArgument("objective input has the wrong dimension");
  for (std::size_t j = 0; j < x.size(); ++j) {
    const auto e = static_cast<Eigen::Index>(j);
    if (!(x[j] >= low_[e] && x[j] <= high_[e])) {
      throw InvalidArgument("objective input lies outside the bounds");
    }
  }
  switch (kind_) {
    case ObjectiveKind::kForrester: return forrester_value(x[0]);
    case ObjectiveKind::kSixHumpCamel: return six_hump_camel_value(x[0], x[1]);
    case ObjectiveKind::kHartmann3: return hartmann3_value(x);
    case ObjectiveKind::kTabular: {
      const auto& pts = pool_->points();
      for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        bool same = true;
        for (Eigen::Index j = 0; j < pts.cols() && same; ++j) same = pts(i, j) == x[static_cast<std::size_t>(j)];
        if (same) return utilities_[static_cast<std::size_t>(i)];
      }
      throw InvalidArgument("tabular objective is only defined on its pool");
    }
  }
  throw InvalidArgument("unknown objective");
}

double Objective::evaluate(const Eigen::VectorXd& x) const {
  return evaluate(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

std::vector<double> Objective::values_on(const CandidatePool& pool) const {
  if (kind_ == ObjectiveKind::kTabular && pool.size() == pool_->size() &&
      pool.points() == pool_->points()) {
    return utilities_;
  }
  std::vector<double> out(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) out[i] = evaluate(pool.point(i));
  return out;
}

const std::vector<double>& Objective::utilities() const {
  if (kind_ != ObjectiveKind::kTabular) throw InvalidArgument("only tabular objectives carry utilities");
  return utilities_;
}

const CandidatePool& Objective::tabular_pool() const {
  if (kind_ != ObjectiveKind::kTabular) throw InvalidArgument("only tabular objectives carry a pool");
  return *pool_;
}

void OracleConfig::validate() const {
  if (!(delta_true >= 0.0) || !std::isfinite(delta_true)) {
    throw InvalidArgument("delta_true must be finite and nonnegative");
  }
  if (query_size < 2) throw InvalidArgument("query_size must be at least 2");
  if (k < 1 || k >= query_size) throw InvalidArgument("need 1 <= k < query_size");
  if (k > 1 && delta_true > 0.0) throw Unsupported("ties are only generated for top-1 observations");
  if (convert_ties && (k != 1 || query_size != 2)) {
    throw InvalidArgument("convert_ties requires pairwise queries with k = 1");
  }
}

std::vector<double> sample_gumbel_utilities(std::span<const double> f, Rng& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<double> u(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    double v = 0.0;
    do {
      v = uniform(rng);
    } while (v <= 0.0);
    u[i] = f[i] - std::log(-std::log(v));
  }
  return u;
}

Observation observe_values(const Query& query, std::span<const double> f_query,
                           const OracleConfig& config, Rng& rng) {
  query.validate();
  if (f_query.size() != query.size()) throw InvalidArgument("latent values must align with the query");
  if (config.k >= query.size()) throw InvalidArgument("need k < |C|");
  if (config.k > 1 && config.delta_true > 0.0) {
    throw Unsupported("ties are only generated for top-1 observations");
  }
  const auto u = sample_gumbel_utilities(f_query, rng);
  const std::size_t c = u.size();
  if (config.delta_true > 0.0) {
    const auto best = static_cast<std::size_t>(std::max_element(u.begin(), u.end()) - u.begin());
    bool clear = true;
    for (std::size_t j = 0; j < c; ++j) {
      if (j != best && u[best] < u[j] + config.delta_true) clear = false;
    }
    // Converted runs only ever report strict preferences.
    if (config.convert_ties) {
      if (clear) return {query, TopKRanking{{query.indices[best]}}};
      std::uniform_int_distribution<std::size_t> pick(0, c - 1);
      return {query, TopKRanking{{query.indices[pick(rng)]}}};
    }
    if (clear) return {query, TopOneWinner{query.indices[best]}};
    return {query, Tie{}};
  }
  std::vector<std::size_t> order(c);
  for (std::size_t j = 0; j < c; ++j) order[j] = j;
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(config.k), order.end(),
                    [&](std::size_t a, std::size_t b) { return u[a] > u[b]; });
  TopKRanking ranking;
  for (std::size_t j = 0; j < config.k; ++j) ranking.winners.push_back(query.indices[order[j]]);
  return {query, ranking};
}

Observation generate_observation(const Objective& objective, const CandidatePool& pool,
                                 const Query& query, const OracleConfig& config, Rng& rng) {
  query.validate();
  std::vector<double> f(query.size());
  for (std::size_t j = 0; j < query.size(); ++j) {
    const PoolIndex i = query.indices[j];
    if (i >= pool.size()) throw InvalidArgument("query index outside the pool");
    if (objective.kind() == ObjectiveKind::kTabular) {
      if (pool.size() != objective.utilities().size()) {
        throw InvalidArgument("tabular objective does not match the pool");
      }
      f[j] = objective.utilities()[i];
    } else {
      f[j] = objective.evaluate(pool.point(i));
    }
  }
  return observe_values(query, f, config, rng);
}

TabularProblem parse_tabular(std::string_view csv) {
  std::vector<std::string_view> lines;
  {
    std::size_t start = 0;
    while (start <= csv.size()) {
      const auto nl = csv.find('\n', start);
      lines.push_back(csv.substr(start, nl == std::string_view::npos ? nl : nl - start));
      if (nl == std::string_view::npos) break;
      start = nl + 1;
    }
  }
  if (lines.empty() || trim(lines[0]).empty()) throw ParseError(1, "missing header");
  std::string_view header_line = lines[0];
  if (header_line.substr(0, 3) == "\xEF\xBB\xBF") header_line.remove_prefix(3);
  const auto header = split_commas(header_line);
  std::size_t d = 0;
  while (d < header.size() && header[d] == "x" + std::to_string(d + 1)) ++d;
  if (d == 0 || d >= header.size() || header[d] != "utility") {
    throw ParseError(1, "header must be x1,...,xd,utility[,label]");
  }
  const bool has_label = header.size() == d + 2;
  if (has_label && header[d + 1] != "label") throw ParseError(1, "unexpected column '" + std::string(header[d + 1]) + "'");
  if (header.size() > d + 2) throw ParseError(1, "too many header columns");

  std::vector<std::vector<double>> rows;
  std::vector<double> utilities;
  std::vector<std::string> labels;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t line_no = li + 1;
    if (trim(lines[li]).empty()) continue;
    const auto fields = split_commas(lines[li]);
    if (fields.size() != header.size()) {
      throw ParseError(line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                    std::to_string(fields.size()));
    }
    std::vector<double> x(d);
    for (std::size_t j = 0; j < d; ++j) x[j] = parse_number(fields[j], line_no, "feature");
    rows.push_back(std::move(x));
    utilities.push_back(parse_number(fields[d], line_no, "utility"));
    if (has_label) labels.emplace_back(fields[d + 1]);
  }
  if (rows.size() < 2) throw ParseError(lines.size(), "tabular data needs at least 2 rows");

  Eigen::MatrixXd points(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  Eigen::VectorXd low = points.colwise().minCoeff().transpose();
  Eigen::VectorXd high = points.colwise().maxCoeff().transpose();
  CandidatePool pool(std::move(points), std::move(low), std::move(high), std::move(labels));
  Objective objective = Objective::tabular(pool, utilities);
  return {std::move(pool), std::move(objective)};
}

TabularProblem load_tabular(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open tabular file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_tabular(buffer.str());
}

}  // namespace prefopt
