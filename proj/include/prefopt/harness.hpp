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

// The Bayesian-optimization loop over simulated oracles, regret accounting,
// experiment configuration and on-disk persistence.
//
// An experiment directory holds:
//   manifest.json       full config, library version, pool and per-run status
//   observations.jsonl  one observation per line
//   fits.jsonl          fitted parameters after every refit
//   regrets.csv         run,iteration,regret,best_index,best_regret_so_far

#ifndef PREFOPT_HARNESS_HPP_
#define PREFOPT_HARNESS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prefopt/acquisition.hpp"
#include "prefopt/gp.hpp"
#include "prefopt/inference.hpp"
#include "prefopt/likelihood.hpp"
#include "prefopt/oracle.hpp"

namespace prefopt {

enum class AcquisitionKind { kMpes, kRandom, kEiPair };

std::string to_string(AcquisitionKind kind);
AcquisitionKind acquisition_kind_from_string(const std::string& name);

struct ObjectiveSpec {
  // forrester | six_hump_camel | hartmann3 | tabular
  std::string kind = "forrester";
  // 0 selects the default size for the objective.
  std::size_t pool_size = 0;
  // grid | sobol; empty selects the default generator for the objective.
  std::string pool_generator;
  // CSV file for tabular objectives.
  std::filesystem::path path;
};

struct ExperimentConfig {
  ObjectiveSpec objective;
  AcquisitionKind acquisition = AcquisitionKind::kMpes;
  AcquisitionConfig acquisition_config;
  FitConfig fit;
  OracleConfig oracle;
  std::size_t initial_observations = 5;
  std::size_t iterations = 25;
  std::size_t repetitions = 10;
  // Repetition r runs with seed + r.
  std::uint64_t seed = 0;
  // Start each refit from the previous iteration's parameters.
  bool warm_start = false;
  std::filesystem::path output_dir;

  void validate() const;
};

// Missing keys keep their defaults; unknown keys are rejected.
AcquisitionConfig acquisition_config_from_json(const nlohmann::json& doc);
FitConfig fit_config_from_json(const nlohmann::json& doc);

// As above. When the oracle
// block omits k or query_size they are taken from the acquisition block.
ExperimentConfig experiment_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ExperimentConfig& config);
// Reads a config file and applies the PREFOPT_SEED override.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct Problem {
  CandidatePool pool;
  Objective objective;
  // f over the pool, aligned by index.
  std::vector<double> values;
};

// Default pools: Forrester 200 grid points, six-hump camel 400 Sobol points,
// Hartmann-3 600 Sobol points, tabular the file's rows.
Problem make_problem(const ObjectiveSpec& spec);

// Synthetic objectives: max over the pool minus f at the guess. Tabular
// objectives: the number of items ranked strictly above the guess.
double immediate_regret(const Objective& objective, const CandidatePool& pool, PoolIndex guess);
double immediate_regret(const Problem& problem, PoolIndex guess);

struct RegretRecord {
  std::size_t iteration = 0;
  PoolIndex best_index = 0;
  double regret = 0.0;
  double best_regret_so_far = 0.0;
  double wall_seconds = 0.0;
};

struct RegretTrace {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  std::vector<RegretRecord> records;
};

// One BO repetition. Writes nothing.
RegretTrace run_repetition(const ExperimentConfig& config, const Problem& problem, std::size_t run);

// All repetitions, persisted incrementally under config.output_dir when it
// is non-empty. A failing repetition is recorded and the others proceed.
std::vector<RegretTrace> run_bo(const ExperimentConfig& config);

// Observation (de)serialization shared with the session service.
nlohmann::json observation_to_json(const Observation& obs);
Observation observation_from_json(const nlohmann::json& doc);
nlohmann::json fit_to_json(const FitResult& fitted);
FitResult fit_from_json(const nlohmann::json& doc);

struct ReplayReport {
  std::size_t fits_checked = 0;
  double max_log_likelihood_error = 0.0;
  std::size_t best_guess_mismatches = 0;
  bool ok() const { return best_guess_mismatches == 0 && max_log_likelihood_error <= 1e-9; }
};

// Recomputes every persisted fit's dataset log-likelihood from the persisted
// observations and parameters, and its best guess from the pool.
ReplayReport replay(const std::filesystem::path& dir);

struct PairScore {
  double score = 0.0;
  MaximizerSet maximizers;
};

// MPES score of the pair (i, j) after the initial observations of
// repetition 0.
PairScore score_pair(const ExperimentConfig& config, PoolIndex i, PoolIndex j);

}  // namespace prefopt

#endif  // PREFOPT_HARNESS_HPP_
