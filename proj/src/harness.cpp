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

#include "prefopt/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include "prefopt/errors.hpp"

#ifndef PREFOPT_VERSION
#define PREFOPT_VERSION "0.0.0"
#endif

namespace prefopt {
namespace {

using nlohmann::json;

// Generator streams within one repetition.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kOracleStream = 2;
constexpr std::uint64_t kAcquisitionStream = 3;
constexpr std::uint64_t kFitStream = 4;

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw InvalidArgument(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw InvalidArgument("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->template get<T>();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("bad value for '") + key + "': " + e.what());
  }
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const json& doc) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(doc.size()));
  for (std::size_t i = 0; i < doc.size(); ++i) v[static_cast<Eigen::Index>(i)] = doc.at(i).get<double>();
  return v;
}

std::vector<Observation> initial_data(const ExperimentConfig& config, const Problem& problem,
                                      Rng& init_rng, Rng& oracle_rng) {
  std::vector<Observation> data;
  for (std::size_t i = 0; i < config.initial_observations; ++i) {
    const Query query = select_query_random(problem.pool, config.acquisition_config, init_rng);
    data.push_back(generate_observation(problem.objective, problem.pool, query, config.oracle, oracle_rng));
  }
  return data;
}

Query choose_query(const ExperimentConfig& config, const Problem& problem, const FitResult& model,
                   const GaussianBelief& belief, Rng& rng) {
  switch (config.acquisition) {
    case AcquisitionKind::kMpes: {
      const auto& ac = config.acquisition_config;
      const MaximizerSet xs =
          build_maximizer_set(problem.pool, belief, ac.maximizer_set_size, ac.mc_samples, rng);
      return select_query_mpes(problem.pool, belief, xs, ac, model.delta, rng).query;
    }
    case AcquisitionKind::kRandom:
      return select_query_random(problem.pool, config.acquisition_config, rng);
    case AcquisitionKind::kEiPair:
      return select_query_ei_pair(problem.pool, belief);
  }
  throw InvalidArgument("unknown acquisition");
}

// Line-oriented writers for one experiment directory. Every line is flushed
// as soon as it is produced.
class ExperimentWriter {
 public:
  ExperimentWriter(const ExperimentConfig& config, const Problem& problem) : config_(config) {
    const auto& dir = config.output_dir;
    std::filesystem::create_directories(dir);
    observations_.open(dir / "observations.jsonl", std::ios::trunc | std::ios::binary);
    fits_.open(dir / "fits.jsonl", std::ios::trunc | std::ios::binary);
    regrets_.open(dir / "regrets.csv", std::ios::trunc | std::ios::binary);
    if (!observations_ || !fits_ || !regrets_) {
      throw InvalidArgument("cannot write experiment files under " + dir.string());
    }
    regrets_ << "run,iteration,regret,best_index,best_regret_so_far\n" << std::flush;
    manifest_ = {{"library", "prefopt"},
                 {"version", PREFOPT_VERSION},
                 {"config", to_json(config)},
                 {"pool",
                  {{"size", problem.pool.size()},
                   {"dim", problem.pool.dim()},
                   {"objective", problem.objective.name()}}},
                 {"runs", json::array()}};
    write_manifest();
  }

  void observation(std::size_t run, std::uint64_t seed, std::size_t iteration, const Observation& obs) {
    json line = observation_to_json(obs);
    line["run"] = run;
    line["seed"] = seed;
    line["iteration"] = iteration;
    observations_ << line.dump() << '\n' << std::flush;
  }

  void fitted(std::size_t run, std::size_t iteration, std::size_t num_observations,
              const FitResult& model, double log_likelihood) {
    const json line = {{"run", run},
                       {"iteration", iteration},
                       {"num_observations", num_observations},
                       {"log_likelihood", log_likelihood},
                       {"fit", fit_to_json(model)}};
    fits_ << line.dump() << '\n' << std::flush;
  }

  void regret(std::size_t run, const RegretRecord& record) {
    regrets_ << run << ',' << record.iteration << ',' << format_double(record.regret) << ','
             << record.best_index << ',' << format_double(record.best_regret_so_far) << '\n'
             << std::flush;
  }

  void finished(const RegretTrace& trace, double wall_seconds) {
    json entry = {{"run", trace.run},
                  {"seed", trace.seed},
                  {"status", trace.ok ? "ok" : "failed"},
                  {"wall_seconds", wall_seconds}};
    if (!trace.ok) entry["error"] = trace.error;
    manifest_["runs"].push_back(entry);
    write_manifest();
  }

 private:
  void write_manifest() {
    std::ofstream out(config_.output_dir / "manifest.json", std::ios::trunc | std::ios::binary);
    out << manifest_.dump(2) << '\n';
  }

  const ExperimentConfig& config_;
  std::ofstream observations_;
  std::ofstream fits_;
  std::ofstream regrets_;
  json manifest_;
};

RegretTrace run_one(const ExperimentConfig& config, const Problem& problem, std::size_t run,
                    ExperimentWriter* writer) {
  RegretTrace trace;
  trace.run = run;
  trace.seed = config.seed + run;
  Rng init_rng = derive_rng(trace.seed, kInitStream);
  Rng oracle_rng = derive_rng(trace.seed, kOracleStream);
  Rng acquisition_rng = derive_rng(trace.seed, kAcquisitionStream);
  Rng fit_rng = derive_rng(trace.seed, kFitStream);
  try {
    std::vector<Observation> data = initial_data(config, problem, init_rng, oracle_rng);
    if (writer != nullptr) {
      for (const auto& obs : data) writer->observation(run, trace.seed, 0, obs);
    }
    double best_so_far = std::numeric_limits<double>::infinity();
    std::optional<FitResult> previous;
    for (std::size_t t = 0; t <= config.iterations; ++t) {
      const auto start = std::chrono::steady_clock::now();
      FitResult model = fit(data, problem.pool, config.fit, fit_rng,
                            config.warm_start && previous ? &*previous : nullptr);
      const GaussianBelief belief = pool_belief(problem.pool, model);
      RegretRecord record;
      record.iteration = t;
      record.best_index = best_guess(belief);
      record.regret = immediate_regret(problem, record.best_index);
      best_so_far = std::min(best_so_far, record.regret);
      record.best_regret_so_far = best_so_far;
      if (writer != nullptr) {
        const CompiledDataset compiled(data);
        writer->fitted(run, t, data.size(), model,
                       compiled.log_likelihood(model.posterior.mean, model.delta));
        writer->regret(run, record);
      }
      if (t < config.iterations) {
        const Query query = choose_query(config, problem, model, belief, acquisition_rng);
        data.push_back(
            generate_observation(problem.objective, problem.pool, query, config.oracle, oracle_rng));
        if (writer != nullptr) writer->observation(run, trace.seed, t + 1, data.back());
      }
      record.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      trace.records.push_back(record);
      if (config.warm_start) previous = std::move(model);
    }
  } catch (const std::exception& e) {
    trace.ok = false;
    trace.error = e.what();
  }
  return trace;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

}  // namespace

std::string to_string(AcquisitionKind kind) {
  switch (kind) {
    case AcquisitionKind::kMpes: return "mpes";
    case AcquisitionKind::kRandom: return "random";
    case AcquisitionKind::kEiPair: return "ei-pair";
  }
  return "unknown";
}

AcquisitionKind acquisition_kind_from_string(const std::string& name) {
  if (name == "mpes") return AcquisitionKind::kMpes;
  if (name == "random") return AcquisitionKind::kRandom;
  if (name == "ei-pair") return AcquisitionKind::kEiPair;
  throw InvalidArgument("unknown acquisition '" + name + "' (expected mpes, random or ei-pair)");
}

void ExperimentConfig::validate() const {
  static const std::set<std::string> kinds = {"forrester", "six_hump_camel", "hartmann3", "tabular"};
  if (!kinds.count(objective.kind)) throw InvalidArgument("unknown objective '" + objective.kind + "'");
  if (objective.kind == "tabular" && objective.path.empty()) {
    throw InvalidArgument("tabular objectives need a CSV path");
  }
  if (!objective.pool_generator.empty() && objective.pool_generator != "grid" &&
      objective.pool_generator != "sobol") {
    throw InvalidArgument("pool generator must be grid or sobol");
  }
  acquisition_config.validate();
  fit.validate();
  oracle.validate();
  if (initial_observations == 0) throw InvalidArgument("initial_observations must be positive");
  if (repetitions == 0) throw InvalidArgument("repetitions must be positive");
  if (acquisition == AcquisitionKind::kEiPair && acquisition_config.query_size != 2) {
    throw InvalidArgument("ei-pair queries are pairs; query_size must be 2");
  }
  if (oracle.k != acquisition_config.k || oracle.query_size != acquisition_config.query_size) {
    throw InvalidArgument("oracle and acquisition disagree on k or query_size");
  }
  const bool ties_possible = oracle.delta_true > 0.0 && !oracle.convert_ties;
  if (ties_possible && !fit.learn_delta && !(fit.fixed_delta > 0.0)) {
    throw InvalidArgument("the oracle can report ties but the model fixes the threshold at 0");
  }
  if (acquisition_config.use_ties && !fit.learn_delta && !(fit.fixed_delta > 0.0)) {
    throw InvalidArgument("use_ties needs a positive or learned tie threshold");
  }
}

AcquisitionConfig acquisition_config_from_json(const json& a) {
  reject_unknown_keys(a,
                      {"query_size", "k", "maximizer_set_size", "mc_samples", "candidate_queries",
                       "use_ties", "seed"},
                      "acquisition_config");
  AcquisitionConfig c;
  read(a, "query_size", c.query_size);
  read(a, "k", c.k);
  read(a, "maximizer_set_size", c.maximizer_set_size);
  read(a, "mc_samples", c.mc_samples);
  read(a, "candidate_queries", c.candidate_queries);
  read(a, "use_ties", c.use_ties);
  read(a, "seed", c.seed);
  return c;
}

FitConfig fit_config_from_json(const json& f) {
  reject_unknown_keys(f,
                      {"mc_samples_per_step", "steps", "learning_rate", "learn_delta", "fixed_delta",
                       "initial_delta", "length_scale_penalty_weight",
                       "initial_length_scale_fraction", "initial_signal_variance", "seed"},
                      "fit");
  FitConfig c;
  read(f, "mc_samples_per_step", c.mc_samples_per_step);
  read(f, "steps", c.steps);
  read(f, "learning_rate", c.learning_rate);
  read(f, "learn_delta", c.learn_delta);
  read(f, "fixed_delta", c.fixed_delta);
  read(f, "initial_delta", c.initial_delta);
  read(f, "length_scale_penalty_weight", c.length_scale_penalty_weight);
  read(f, "initial_length_scale_fraction", c.initial_length_scale_fraction);
  read(f, "initial_signal_variance", c.initial_signal_variance);
  read(f, "seed", c.seed);
  return c;
}

ExperimentConfig experiment_config_from_json(const json& doc) {
  reject_unknown_keys(doc,
                      {"objective", "acquisition", "acquisition_config", "fit", "oracle",
                       "initial_observations", "iterations", "repetitions", "seed", "warm_start",
                       "output_dir"},
                      "experiment config");
  ExperimentConfig c;
  if (doc.contains("objective")) {
    const auto& o = doc["objective"];
    reject_unknown_keys(o, {"kind", "pool_size", "pool", "path"}, "objective");
    read(o, "kind", c.objective.kind);
    read(o, "pool_size", c.objective.pool_size);
    read(o, "pool", c.objective.pool_generator);
    std::string path;
    read(o, "path", path);
    c.objective.path = path;
  }
  if (doc.contains("acquisition")) {
    c.acquisition = acquisition_kind_from_string(doc["acquisition"].get<std::string>());
  }
  if (doc.contains("acquisition_config")) {
    c.acquisition_config = acquisition_config_from_json(doc["acquisition_config"]);
  }
  if (doc.contains("fit")) c.fit = fit_config_from_json(doc["fit"]);
  c.oracle.k = c.acquisition_config.k;
  c.oracle.query_size = c.acquisition_config.query_size;
  if (doc.contains("oracle")) {
    const auto& o = doc["oracle"];
    reject_unknown_keys(o, {"delta_true", "k", "query_size", "convert_ties", "seed"}, "oracle");
    read(o, "delta_true", c.oracle.delta_true);
    read(o, "k", c.oracle.k);
    read(o, "query_size", c.oracle.query_size);
    read(o, "convert_ties", c.oracle.convert_ties);
    read(o, "seed", c.oracle.seed);
  }
  read(doc, "initial_observations", c.initial_observations);
  read(doc, "iterations", c.iterations);
  read(doc, "repetitions", c.repetitions);
  read(doc, "seed", c.seed);
  read(doc, "warm_start", c.warm_start);
  std::string out;
  read(doc, "output_dir", out);
  c.output_dir = out;
  c.validate();
  return c;
}

json to_json(const ExperimentConfig& c) {
  const auto& a = c.acquisition_config;
  const auto& f = c.fit;
  const auto& o = c.oracle;
  return {
      {"objective",
       {{"kind", c.objective.kind},
        {"pool_size", c.objective.pool_size},
        {"pool", c.objective.pool_generator},
        {"path", c.objective.path.string()}}},
      {"acquisition", to_string(c.acquisition)},
      {"acquisition_config",
       {{"query_size", a.query_size},
        {"k", a.k},
        {"maximizer_set_size", a.maximizer_set_size},
        {"mc_samples", a.mc_samples},
        {"candidate_queries", a.candidate_queries},
        {"use_ties", a.use_ties},
        {"seed", a.seed}}},
      {"fit",
       {{"mc_samples_per_step", f.mc_samples_per_step},
        {"steps", f.steps},
        {"learning_rate", f.learning_rate},
        {"learn_delta", f.learn_delta},
        {"fixed_delta", f.fixed_delta},
        {"initial_delta", f.initial_delta},
        {"length_scale_penalty_weight", f.length_scale_penalty_weight},
        {"initial_length_scale_fraction", f.initial_length_scale_fraction},
        {"initial_signal_variance", f.initial_signal_variance},
        {"seed", f.seed}}},
      {"oracle",
       {{"delta_true", o.delta_true},
        {"k", o.k},
        {"query_size", o.query_size},
        {"convert_ties", o.convert_ties},
        {"seed", o.seed}}},
      {"initial_observations", c.initial_observations},
      {"iterations", c.iterations},
      {"repetitions", c.repetitions},
      {"seed", c.seed},
      {"warm_start", c.warm_start},
      {"output_dir", c.output_dir.string()},
  };
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgument("config " + path.string() + " is not valid JSON: " + e.what());
  }
  ExperimentConfig config = experiment_config_from_json(doc);
  if (const char* env = std::getenv("PREFOPT_SEED"); env != nullptr && *env != '\0') {
    std::uint64_t seed = 0;
    const std::string text(env);
    std::size_t used = 0;
    try {
      seed = std::stoull(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != text.size() || text[0] == '-') {
      throw InvalidArgument("PREFOPT_SEED must be a nonnegative integer, got '" + text + "'");
    }
    config.seed = seed;
  }
  return config;
}

Problem make_problem(const ObjectiveSpec& spec) {
  if (spec.kind == "tabular") {
    auto tab = load_tabular(spec.path);
    auto values = tab.objective.values_on(tab.pool);
    return {std::move(tab.pool), std::move(tab.objective), std::move(values)};
  }
  Objective objective = spec.kind == "forrester"        ? Objective::forrester()
                        : spec.kind == "six_hump_camel" ? Objective::six_hump_camel()
                        : spec.kind == "hartmann3"
                            ? Objective::hartmann3()
                            : throw InvalidArgument("unknown objective '" + spec.kind + "'");
  const std::size_t default_size = spec.kind == "forrester" ? 200 : spec.kind == "six_hump_camel" ? 400 : 600;
  const std::size_t size = spec.pool_size == 0 ? default_size : spec.pool_size;
  const std::string generator =
      spec.pool_generator.empty() ? (spec.kind == "forrester" ? "grid" : "sobol") : spec.pool_generator;
  CandidatePool pool = [&] {
    if (generator == "grid") {
      if (objective.dim() != 1) throw InvalidArgument("grid pools are one-dimensional");
      return CandidatePool::grid(objective.low()[0], objective.high()[0], size);
    }
    return CandidatePool::sobol(objective.low(), objective.high(), size);
  }();
  auto values = objective.values_on(pool);
  return {std::move(pool), std::move(objective), std::move(values)};
}

double immediate_regret(const Objective& objective, const CandidatePool& pool, PoolIndex guess) {
  const auto values = objective.values_on(pool);
  if (guess >= values.size()) throw InvalidArgument("best guess outside the pool");
  if (objective.kind() == ObjectiveKind::kTabular) {
    return static_cast<double>(
        std::count_if(values.begin(), values.end(), [&](double v) { return v > values[guess]; }));
  }
  return *std::max_element(values.begin(), values.end()) - values[guess];
}

double immediate_regret(const Problem& problem, PoolIndex guess) {
  const auto& values = problem.values;
  if (guess >= values.size()) throw InvalidArgument("best guess outside the pool");
  if (problem.objective.kind() == ObjectiveKind::kTabular) {
    return static_cast<double>(
        std::count_if(values.begin(), values.end(), [&](double v) { return v > values[guess]; }));
  }
  return *std::max_element(values.begin(), values.end()) - values[guess];
}

RegretTrace run_repetition(const ExperimentConfig& config, const Problem& problem, std::size_t run) {
  config.validate();
  return run_one(config, problem, run, nullptr);
}

std::vector<RegretTrace> run_bo(const ExperimentConfig& config) {
  config.validate();
  const Problem problem = make_problem(config.objective);
  std::optional<ExperimentWriter> writer;
  if (!config.output_dir.empty()) writer.emplace(config, problem);
  std::vector<RegretTrace> traces;
  for (std::size_t r = 0; r < config.repetitions; ++r) {
    const auto start = std::chrono::steady_clock::now();
    traces.push_back(run_one(config, problem, r, writer ? &*writer : nullptr));
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (writer) writer->finished(traces.back(), seconds);
  }
  return traces;
}

json observation_to_json(const Observation& obs) {
  json outcome;
  if (const auto* r = std::get_if<TopKRanking>(&obs.outcome)) {
    outcome = {{"type", "ranking"}, {"winners", r->winners}};
  } else if (const auto* w = std::get_if<TopOneWinner>(&obs.outcome)) {
    outcome = {{"type", "winner"}, {"winner", w->winner}};
  } else {
    outcome = {{"type", "tie"}};
  }
  return {{"query", obs.query.indices}, {"outcome", outcome}};
}

Observation observation_from_json(const json& doc) {
  try {
    Observation obs;
    obs.query.indices = doc.at("query").get<std::vector<PoolIndex>>();
    const auto& outcome = doc.at("outcome");
    const auto type = outcome.at("type").get<std::string>();
    if (type == "ranking") {
      obs.outcome = TopKRanking{outcome.at("winners").get<std::vector<PoolIndex>>()};
    } else if (type == "winner") {
      obs.outcome = TopOneWinner{outcome.at("winner").get<PoolIndex>()};
    } else if (type == "tie") {
      obs.outcome = Tie{};
    } else {
      throw InvalidArgument("unknown outcome type '" + type + "'");
    }
    obs.validate();
    return obs;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed observation: ") + e.what());
  }
}

json fit_to_json(const FitResult& fitted) {
  json chol = json::array();
  for (Eigen::Index i = 0; i < fitted.posterior.chol_factor.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j <= i; ++j) row.push_back(fitted.posterior.chol_factor(i, j));
    chol.push_back(row);
  }
  return {{"inputs", fitted.inputs},
          {"mean", vector_to_json(fitted.posterior.mean)},
          {"chol", chol},
          {"length_scales", vector_to_json(fitted.kernel.length_scales)},
          {"signal_variance", fitted.kernel.signal_variance},
          {"delta", fitted.delta.delta},
          {"initial_elbo", fitted.initial_elbo},
          {"final_elbo", fitted.final_elbo}};
}

FitResult fit_from_json(const json& doc) {
  try {
    FitResult out;
    out.inputs = doc.at("inputs").get<std::vector<PoolIndex>>();
    out.posterior.mean = vector_from_json(doc.at("mean"));
    const auto n = out.posterior.mean.size();
    if (static_cast<std::size_t>(n) != out.inputs.size() || doc.at("chol").size() != out.inputs.size()) {
      throw InvalidArgument("fit record dimensions disagree");
    }
    out.posterior.chol_factor = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& row = doc.at("chol").at(static_cast<std::size_t>(i));
      if (row.size() != static_cast<std::size_t>(i + 1)) throw InvalidArgument("fit record factor is not lower triangular");
      for (Eigen::Index j = 0; j <= i; ++j) out.posterior.chol_factor(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
    }
    out.kernel.length_scales = vector_from_json(doc.at("length_scales"));
    out.kernel.signal_variance = doc.at("signal_variance").get<double>();
    out.delta = {doc.at("delta").get<double>()};
    out.initial_elbo = doc.value("initial_elbo", 0.0);
    out.final_elbo = doc.value("final_elbo", 0.0);
    out.initial_kernel = out.kernel;
    return out;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed fit record: ") + e.what());
  }
}

ReplayReport replay(const std::filesystem::path& dir) {
  std::ifstream manifest_in(dir / "manifest.json");
  if (!manifest_in) throw InvalidArgument("no manifest.json under " + dir.string());
  const json manifest = json::parse(manifest_in);
  ExperimentConfig config = experiment_config_from_json(manifest.at("config"));
  const Problem problem = make_problem(config.objective);

  std::map<std::size_t, std::vector<Observation>> observations;
  {
    std::ifstream in(dir / "observations.jsonl");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json doc = json::parse(line);
      observations[doc.at("run").get<std::size_t>()].push_back(observation_from_json(doc));
    }
  }
  std::map<std::pair<std::size_t, std::size_t>, PoolIndex> best;
  {
    std::ifstream in(dir / "regrets.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto fields = split_csv_line(line);
      if (fields.size() < 4) throw InvalidArgument("malformed regrets.csv line: " + line);
      best[{std::stoul(fields[0]), std::stoul(fields[1])}] = std::stoul(fields[3]);
    }
  }

  ReplayReport report;
  std::ifstream in(dir / "fits.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json doc = json::parse(line);
    const auto run = doc.at("run").get<std::size_t>();
    const auto iteration = doc.at("iteration").get<std::size_t>();
    const auto count = doc.at("num_observations").get<std::size_t>();
    const auto& run_obs = observations[run];
    if (count > run_obs.size()) throw InvalidArgument("fit record refers to missing observations");
    const FitResult fitted = fit_from_json(doc.at("fit"));
    const std::span<const Observation> data(run_obs.data(), count);
    const CompiledDataset compiled(data);
    if (compiled.inputs() != fitted.inputs) {
      report.max_log_likelihood_error = std::numeric_limits<double>::infinity();
      ++report.fits_checked;
      continue;
    }
    const double ll = compiled.log_likelihood(fitted.posterior.mean, fitted.delta);
    report.max_log_likelihood_error =
        std::max(report.max_log_likelihood_error, std::abs(ll - doc.at("log_likelihood").get<double>()));
    const auto it = best.find({run, iteration});
    const PoolIndex guess = best_guess(pool_belief(problem.pool, fitted));
    if (it == best.end() || it->second != guess) ++report.best_guess_mismatches;
    ++report.fits_checked;
  }
  return report;
}

PairScore score_pair(const ExperimentConfig& config, PoolIndex i, PoolIndex j) {
  config.validate();
  const Problem problem = make_problem(config.objective);
  if (i >= problem.pool.size() || j >= problem.pool.size() || i == j) {
    throw InvalidArgument("pair must name two distinct pool indices");
  }
  Rng init_rng = derive_rng(config.seed, kInitStream);
  Rng oracle_rng = derive_rng(config.seed, kOracleStream);
  Rng acquisition_rng = derive_rng(config.seed, kAcquisitionStream);
  Rng fit_rng = derive_rng(config.seed, kFitStream);
  const auto data = initial_data(config, problem, init_rng, oracle_rng);
  const FitResult model = fit(data, problem.pool, config.fit, fit_rng);
  const GaussianBelief belief = pool_belief(problem.pool, model);
  AcquisitionConfig pair_config = config.acquisition_config;
  pair_config.query_size = 2;
  pair_config.k = 1;
  PairScore out;
  out.maximizers = build_maximizer_set(problem.pool, belief, pair_config.maximizer_set_size,
                                       pair_config.mc_samples, acquisition_rng);
  out.score = mpes_score(Query{{i, j}}, out.maximizers, belief, pair_config, model.delta, acquisition_rng);
  return out;
}

}  // namespace prefopt
