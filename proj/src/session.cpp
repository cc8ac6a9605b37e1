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

#include "prefopt/session.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <httplib.h>

#include "prefopt/errors.hpp"
#include "prefopt/harness.hpp"
#include "prefopt/oracle.hpp"

namespace prefopt {
namespace {

using nlohmann::json;

constexpr std::uint64_t kQueryStreams = 1ULL << 32;
constexpr std::uint64_t kFitStreams = 2ULL << 32;

json point_json(const CandidatePool& pool, PoolIndex i) {
  json item = {{"index", i}, {"features", json::array()}};
  const Eigen::VectorXd x = pool.point(i);
  for (Eigen::Index j = 0; j < x.size(); ++j) item["features"].push_back(x[j]);
  if (!pool.labels().empty()) item["label"] = pool.labels()[i];
  return item;
}

std::vector<double> doubles(const json& doc, const char* what) {
  if (!doc.is_array()) throw InvalidArgument(std::string(what) + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : doc) {
    if (!v.is_number()) throw InvalidArgument(std::string(what) + " must be an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

CandidatePool pool_from_json(const json& doc) {
  if (!doc.is_object()) throw InvalidArgument("pool must be a JSON object");
  if (doc.contains("grid")) {
    const auto& g = doc["grid"];
    return CandidatePool::grid(g.at("low").get<double>(), g.at("high").get<double>(),
                               g.at("count").get<std::size_t>());
  }
  if (doc.contains("sobol")) {
    const auto& g = doc["sobol"];
    return CandidatePool::sobol(to_vector(doubles(g.at("low"), "sobol.low")),
                                to_vector(doubles(g.at("high"), "sobol.high")),
                                g.at("count").get<std::size_t>());
  }
  if (!doc.contains("points")) throw InvalidArgument("pool needs points, grid or sobol");
  const auto& rows = doc["points"];
  if (!rows.is_array() || rows.empty()) throw InvalidArgument("pool points must be a nonempty array");
  const std::size_t d = rows[0].size();
  Eigen::MatrixXd points(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto row = doubles(rows[i], "pool point");
    if (row.size() != d) throw InvalidArgument("pool points must share one dimension");
    for (std::size_t j = 0; j < d; ++j) {
      points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
  }
  Eigen::VectorXd low = doc.contains("low") ? to_vector(doubles(doc["low"], "low"))
                                            : Eigen::VectorXd(points.colwise().minCoeff().transpose());
  Eigen::VectorXd high = doc.contains("high") ? to_vector(doubles(doc["high"], "high"))
                                              : Eigen::VectorXd(points.colwise().maxCoeff().transpose());
  std::vector<std::string> labels;
  if (doc.contains("labels")) labels = doc["labels"].get<std::vector<std::string>>();
  return CandidatePool(std::move(points), std::move(low), std::move(high), std::move(labels));
}

SessionConfig session_config_from_json(const json& doc) {
  SessionConfig c;
  if (doc.is_null()) return c;
  if (!doc.is_object()) throw InvalidArgument("config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key != "acquisition_config" && key != "fit" && key != "seed") {
      throw InvalidArgument("unknown key '" + key + "' in session config");
    }
  }
  if (doc.contains("acquisition_config")) c.acquisition = acquisition_config_from_json(doc["acquisition_config"]);
  if (doc.contains("fit")) c.fit = fit_config_from_json(doc["fit"]);
  if (doc.contains("seed")) c.seed = doc["seed"].get<std::uint64_t>();
  return c;
}

json error_body(const std::string& code, const std::string& message) {
  return {{"code", code}, {"message", message}};
}

}  // namespace

void SessionConfig::validate() const {
  acquisition.validate();
  fit.validate();
  if (acquisition.use_ties && !fit.learn_delta && !(fit.fixed_delta > 0.0)) {
    throw InvalidArgument("use_ties needs a positive or learned tie threshold");
  }
}

std::string to_string(SessionStatus status) {
  switch (status) {
    case SessionStatus::kIdle: return "idle";
    case SessionStatus::kAwaitingResponse: return "awaiting_response";
    case SessionStatus::kComputing: return "computing";
  }
  return "unknown";
}

Rng session_fit_rng(std::uint64_t seed, std::size_t num_observations) {
  return derive_rng(seed, kFitStreams + num_observations);
}

Session::Session(std::string id, CandidatePool pool, SessionConfig config,
                 std::optional<std::vector<double>> utilities, std::filesystem::path log_path)
    : id_(std::move(id)),
      pool_(std::move(pool)),
      config_(std::move(config)),
      utilities_(std::move(utilities)),
      log_path_(std::move(log_path)) {
  config_.validate();
  if (config_.acquisition.query_size > pool_.size()) {
    throw InvalidArgument("query_size exceeds the pool size");
  }
  if (utilities_ && utilities_->size() != pool_.size()) {
    throw InvalidArgument("utilities must align with the pool");
  }
  model_ = prior_model(pool_, config_.fit);
  belief_ = pool_belief(pool_, model_);
  if (!log_path_.empty()) {
    std::ofstream out(log_path_, std::ios::trunc | std::ios::binary);
    if (!out) throw InvalidArgument("cannot write session log " + log_path_.string());
  }
}

Query Session::next_query() {
  std::lock_guard<std::mutex> mutation(mutate_);
  {
    std::unique_lock<std::shared_mutex> lock(state_);
    if (pending_) throw Conflict("a query is already pending");
    status_ = SessionStatus::kComputing;
  }
  Query query;
  try {
    Rng rng = derive_rng(config_.seed, kQueryStreams + queries_issued_);
    const auto& ac = config_.acquisition;
    const MaximizerSet xs = build_maximizer_set(pool_, belief_, ac.maximizer_set_size, ac.mc_samples, rng);
    query = select_query_mpes(pool_, belief_, xs, ac, model_.delta, rng).query;
  } catch (...) {
    std::unique_lock<std::shared_mutex> lock(state_);
    status_ = SessionStatus::kIdle;
    throw;
  }
  std::unique_lock<std::shared_mutex> lock(state_);
  pending_ = query;
  ++queries_issued_;
  status_ = SessionStatus::kAwaitingResponse;
  return query;
}

Observation Session::parse_answer(const json& answer, const Query& pending) const {
  if (!answer.is_object()) throw InvalidArgument("answer must be a JSON object");
  for (const auto& [key, value] : answer.items()) {
    if (key != "query" && key != "outcome") throw InvalidArgument("unknown key '" + key + "' in answer");
  }
  if (answer.contains("query")) {
    auto given = answer["query"].get<std::vector<PoolIndex>>();
    auto expected = pending.indices;
    std::sort(given.begin(), given.end());
    std::sort(expected.begin(), expected.end());
    if (given != expected) throw InvalidArgument("answer does not match the pending query");
  }
  if (!answer.contains("outcome") || !answer["outcome"].is_object()) {
    throw InvalidArgument("answer needs an outcome object");
  }
  const auto& outcome = answer["outcome"];
  const auto type = outcome.value("type", std::string());
  const auto& ac = config_.acquisition;
  Observation obs;
  obs.query = pending;
  auto require_member = [&](PoolIndex i) {
    if (!pending.contains(i)) {
      throw InvalidArgument("index " + std::to_string(i) + " is not part of the pending query");
    }
  };
  if (type == "tie") {
    if (!ac.use_ties) throw InvalidArgument("ties are not allowed in this session");
    obs.outcome = Tie{};
  } else if (type == "winner" || type == "ranking") {
    std::vector<PoolIndex> winners;
    if (type == "winner") {
      winners.push_back(outcome.at("winner").get<PoolIndex>());
    } else {
      winners = outcome.at("winners").get<std::vector<PoolIndex>>();
    }
    if (winners.size() != ac.k) {
      throw InvalidArgument("expected exactly " + std::to_string(ac.k) + " ranked items");
    }
    for (PoolIndex w : winners) require_member(w);
    if (std::set<PoolIndex>(winners.begin(), winners.end()).size() != winners.size()) {
      throw InvalidArgument("ranked items must be distinct");
    }
    if (ac.use_ties) {
      obs.outcome = TopOneWinner{winners[0]};
    } else {
      obs.outcome = TopKRanking{winners};
    }
  } else {
    throw InvalidArgument("outcome type must be ranking, winner or tie");
  }
  obs.validate();
  return obs;
}

void Session::submit(const json& answer) {
  std::lock_guard<std::mutex> mutation(mutate_);
  Observation obs;
  std::vector<Observation> data;
  {
    std::unique_lock<std::shared_mutex> lock(state_);
    if (!pending_) throw Conflict("there is no pending query to answer");
    obs = parse_answer(answer, *pending_);
    data = log_;
    status_ = SessionStatus::kComputing;
  }
  data.push_back(obs);
  FitResult model;
  GaussianBelief belief;
  try {
    Rng rng = session_fit_rng(config_.seed, data.size());
    model = fit(data, pool_, config_.fit, rng);
    belief = pool_belief(pool_, model);
  } catch (...) {
    std::unique_lock<std::shared_mutex> lock(state_);
    status_ = SessionStatus::kAwaitingResponse;
    throw;
  }
  if (!log_path_.empty()) {
    json line = observation_to_json(obs);
    line["run"] = 0;
    line["seed"] = config_.seed;
    line["iteration"] = data.size();
    std::ofstream out(log_path_, std::ios::app | std::ios::binary);
    out << line.dump() << '\n';
  }
  std::unique_lock<std::shared_mutex> lock(state_);
  log_ = std::move(data);
  pending_.reset();
  model_ = std::move(model);
  belief_ = std::move(belief);
  best_history_.push_back(prefopt::best_guess(belief_));
  status_ = SessionStatus::kIdle;
}

SessionStatus Session::status() const {
  std::shared_lock<std::shared_mutex> lock(state_);
  return status_;
}

std::optional<Query> Session::pending() const {
  std::shared_lock<std::shared_mutex> lock(state_);
  return pending_;
}

std::vector<Observation> Session::observations() const {
  std::shared_lock<std::shared_mutex> lock(state_);
  return log_;
}

PoolIndex Session::best_guess_index() const {
  std::shared_lock<std::shared_mutex> lock(state_);
  return prefopt::best_guess(belief_);
}

json Session::query_json(const Query& query) const {
  json items = json::array();
  for (PoolIndex i : query.indices) items.push_back(point_json(pool_, i));
  return {{"session", id_},
          {"query", query.indices},
          {"items", items},
          {"k", config_.acquisition.k},
          {"tie_allowed", config_.acquisition.use_ties}};
}

json Session::state_json() const {
  std::shared_lock<std::shared_mutex> lock(state_);
  json history = json::array();
  for (const auto& obs : log_) history.push_back(observation_to_json(obs));
  const PoolIndex best = prefopt::best_guess(belief_);
  json out = {{"id", id_},
              {"status", to_string(status_)},
              {"pool_size", pool_.size()},
              {"query_size", config_.acquisition.query_size},
              {"k", config_.acquisition.k},
              {"tie_allowed", config_.acquisition.use_ties},
              {"pending", pending_ ? query_json(*pending_) : json(nullptr)},
              {"observations", history},
              {"best_guess", point_json(pool_, best)},
              {"best_guess_history", best_history_},
              {"posterior",
               {{"mean", std::vector<double>(belief_.mean.data(), belief_.mean.data() + belief_.mean.size())},
                {"variance", [&] {
                   const Eigen::VectorXd v = belief_.variances();
                   return std::vector<double>(v.data(), v.data() + v.size());
                 }()}}},
              {"delta", model_.delta.delta}};
  if (utilities_) {
    const auto& u = *utilities_;
    auto rank_regret = [&](PoolIndex i) {
      return std::count_if(u.begin(), u.end(), [&](double v) { return v > u[i]; });
    };
    json regrets = json::array();
    for (PoolIndex i : best_history_) regrets.push_back(rank_regret(i));
    out["regret"] = rank_regret(best);
    out["regret_history"] = regrets;
  }
  return out;
}

SessionManager::SessionManager(std::filesystem::path log_dir) : log_dir_(std::move(log_dir)) {
  std::random_device device;
  salt_ = (static_cast<std::uint64_t>(device()) << 32) ^ device();
  if (!log_dir_.empty()) std::filesystem::create_directories(log_dir_);
}

std::shared_ptr<Session> SessionManager::create(const json& body) {
  if (!body.is_object()) throw InvalidArgument("request body must be a JSON object");
  for (const auto& [key, value] : body.items()) {
    if (key != "pool" && key != "tabular_csv" && key != "config") {
      throw InvalidArgument("unknown key '" + key + "' in session request");
    }
  }
  if (body.contains("pool") == body.contains("tabular_csv")) {
    throw InvalidArgument("provide exactly one of pool or tabular_csv");
  }
  const SessionConfig config = session_config_from_json(body.value("config", json()));
  std::optional<CandidatePool> pool;
  std::optional<std::vector<double>> utilities;
  if (body.contains("pool")) {
    pool.emplace(pool_from_json(body["pool"]));
  } else {
    if (!body["tabular_csv"].is_string()) throw InvalidArgument("tabular_csv must be a string");
    try {
      auto tab = parse_tabular(body["tabular_csv"].get<std::string>());
      utilities = tab.objective.utilities();
      pool.emplace(std::move(tab.pool));
    } catch (const ParseError& e) {
      throw InvalidArgument(std::string("tabular upload: ") + e.what());
    }
  }
  std::ostringstream id;
  id << 's' << std::hex << (salt_ ^ (counter_.fetch_add(1) * 0x9E3779B97F4A7C15ULL));
  std::filesystem::path log_path;
  if (!log_dir_.empty()) {
    log_path = log_dir_ / (id.str() + ".jsonl");
    std::ofstream meta(log_dir_ / (id.str() + ".session.json"), std::ios::trunc | std::ios::binary);
    meta << json{{"id", id.str()}, {"request", body}}.dump(2) << '\n';
  }
  auto session = std::make_shared<Session>(id.str(), std::move(*pool), config, std::move(utilities), log_path);
  std::lock_guard<std::mutex> lock(mutex_);
  sessions_.emplace(session->id(), session);
  return session;
}

std::shared_ptr<Session> SessionManager::find(const std::string& id) const {
  std::lock_guard<std::mutex> lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFound("no session '" + id + "'");
  return it->second;
}

std::size_t SessionManager::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return sessions_.size();
}

void register_routes(httplib::Server& server, SessionManager& manager, const std::string& allowed_origin) {
  server.set_default_headers({{"Access-Control-Allow-Origin", allowed_origin},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});

  auto reply = [](httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  auto guarded = [reply](httplib::Response& res, const auto& handler) {
    try {
      handler();
    } catch (const NotFound& e) {
      reply(res, 404, error_body("not_found", e.what()));
    } catch (const Conflict& e) {
      reply(res, 409, error_body("conflict", e.what()));
    } catch (const InvalidArgument& e) {
      reply(res, 400, error_body("invalid_argument", e.what()));
    } catch (const Unsupported& e) {
      reply(res, 400, error_body("unsupported", e.what()));
    } catch (const ParseError& e) {
      reply(res, 400, error_body("parse_error", e.what()));
    } catch (const json::exception& e) {
      reply(res, 400, error_body("invalid_json", e.what()));
    } catch (const NumericalFailure& e) {
      reply(res, 500, error_body("numerical_failure", e.what()));
    } catch (const std::exception& e) {
      reply(res, 500, error_body("internal", e.what()));
    }
  };

  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Post("/sessions", [&manager, reply, guarded](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto session = manager.create(json::parse(req.body));
      reply(res, 201,
            {{"id", session->id()},
             {"status", to_string(session->status())},
             {"pool_size", session->pool().size()}});
    });
  });

  server.Get(R"(/sessions/([^/]+)/query)", [&manager, reply, guarded](const httplib::Request& req,
                                                                       httplib::Response& res) {
    guarded(res, [&] {
      const auto session = manager.find(req.matches[1]);
      reply(res, 200, session->query_json(session->next_query()));
    });
  });

  server.Post(R"(/sessions/([^/]+)/observation)", [&manager, reply, guarded](const httplib::Request& req,
                                                                              httplib::Response& res) {
    guarded(res, [&] {
      const auto session = manager.find(req.matches[1]);
      session->submit(json::parse(req.body));
      const json state = session->state_json();
      reply(res, 200,
            {{"accepted", true},
             {"best_guess", state["best_guess"]},
             {"num_observations", state["observations"].size()}});
    });
  });

  server.Get(R"(/sessions/([^/]+)/state)", [&manager, reply, guarded](const httplib::Request& req,
                                                                       httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, manager.find(req.matches[1])->state_json()); });
  });

  server.set_error_handler([reply](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      const bool missing = res.status == 404;
      reply(res, res.status,
            error_body(missing ? "not_found" : "http_error",
                       missing ? "no such route" : "request failed with status " + std::to_string(res.status)));
    }
  });
}

bool serve(SessionManager& manager, const std::string& host, int port, const std::string& allowed_origin) {
  httplib::Server server;
  register_routes(server, manager, allowed_origin);
  return server.listen(host, port);
}

}  // namespace prefopt
