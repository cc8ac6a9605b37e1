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

// Interactive sessions where a person answers the queries, and the HTTP/JSON
// API that exposes them:
//
//   POST /sessions                      create; body holds the pool and config
//   GET  /sessions/{id}/query           propose the next query
//   POST /sessions/{id}/observation     answer the pending query
//   GET  /sessions/{id}/state           posterior summary and history
//
// Errors are returned as {"code": ..., "message": ...} with status 400, 404
// or 409.

#ifndef PREFOPT_SESSION_HPP_
#define PREFOPT_SESSION_HPP_

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "prefopt/acquisition.hpp"
#include "prefopt/gp.hpp"
#include "prefopt/inference.hpp"
#include "prefopt/likelihood.hpp"

namespace httplib {
class Server;
}

namespace prefopt {

// The request is well formed but clashes with the session's current state.
class Conflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SessionConfig {
  AcquisitionConfig acquisition;
  FitConfig fit;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class SessionStatus { kIdle, kAwaitingResponse, kComputing };
std::string to_string(SessionStatus status);

// Generator used for the refit after `num_observations` answers. Replaying
// a session log through fit() with this generator reproduces its model.
Rng session_fit_rng(std::uint64_t seed, std::size_t num_observations);

class Session {
 public:
  // utilities, when present, enable regret reporting.
  Session(std::string id, CandidatePool pool, SessionConfig config,
          std::optional<std::vector<double>> utilities = std::nullopt,
          std::filesystem::path log_path = {});

  const std::string& id() const { return id_; }
  const CandidatePool& pool() const { return pool_; }
  const SessionConfig& config() const { return config_; }

  // Selects and stores a query. Throws Conflict while one is pending.
  Query next_query();

  // Validates an answer to the pending query, appends it and refits.
  // Throws Conflict without a pending query, InvalidArgument for answers
  // that do not fit the query or config.
  void submit(const nlohmann::json& answer);

  SessionStatus status() const;
  std::optional<Query> pending() const;
  std::vector<Observation> observations() const;
  PoolIndex best_guess_index() const;

  nlohmann::json query_json(const Query& query) const;
  nlohmann::json state_json() const;

 private:
  Observation parse_answer(const nlohmann::json& answer, const Query& pending) const;

  const std::string id_;
  const CandidatePool pool_;
  const SessionConfig config_;
  const std::optional<std::vector<double>> utilities_;
  const std::filesystem::path log_path_;

  // Serializes mutations; held across refits.
  std::mutex mutate_;
  // Guards everything below; reads share it.
  mutable std::shared_mutex state_;
  SessionStatus status_ = SessionStatus::kIdle;
  std::optional<Query> pending_;
  std::vector<Observation> log_;
  std::size_t queries_issued_ = 0;
  FitResult model_;
  GaussianBelief belief_;
  std::vector<PoolIndex> best_history_;
};

class SessionManager {
 public:
  // Session logs are written under log_dir when it is non-empty.
  explicit SessionManager(std::filesystem::path log_dir = {});

  // Body: {"pool": {...} | "tabular_csv": "...", "config": {...}}.
  //   pool:   {"points": [[...]], "low": [...], "high": [...], "labels": [...]}
  //           or {"grid": {"low": a, "high": b, "count": n}}
  //           or {"sobol": {"low": [...], "high": [...], "count": n}}
  //   config: {"acquisition_config": {...}, "fit": {...}, "seed": s}
  std::shared_ptr<Session> create(const nlohmann::json& body);
  std::shared_ptr<Session> find(const std::string& id) const;
  std::size_t size() const;

 private:
  std::filesystem::path log_dir_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::atomic<std::uint64_t> counter_{0};
  std::uint64_t salt_;
};

// Installs the REST routes and CORS handling on a server.
void register_routes(httplib::Server& server, SessionManager& manager,
                     const std::string& allowed_origin = "*");

// Blocks serving on host:port until the server stops.
bool serve(SessionManager& manager, const std::string& host, int port,
           const std::string& allowed_origin = "*");

}  // namespace prefopt

#endif  // PREFOPT_SESSION_HPP_
