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

// prefopt command-line entry point.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "prefopt/errors.hpp"
#include "prefopt/harness.hpp"
#include "prefopt/session.hpp"

namespace {

int run_command(const std::string& config_path) {
  const auto config = prefopt::load_experiment_config(config_path);
  const auto traces = prefopt::run_bo(config);
  int failed = 0;
  for (const auto& t : traces) {
    if (!t.ok) {
      ++failed;
      std::cerr << "run " << t.run << " (seed " << t.seed << ") failed: " << t.error << '\n';
      continue;
    }
    const auto& last = t.records.back();
    std::printf("run %zu seed %llu final regret %.6g best so far %.6g\n", t.run,
                static_cast<unsigned long long>(t.seed), last.regret, last.best_regret_so_far);
  }
  return failed == 0 ? 0 : 1;
}

int replay_command(const std::string& dir) {
  const auto report = prefopt::replay(dir);
  std::printf("fits checked %zu, max log-likelihood error %.3g, best-guess mismatches %zu\n",
              report.fits_checked, report.max_log_likelihood_error, report.best_guess_mismatches);
  return report.ok() ? 0 : 1;
}

int score_command(const std::string& config_path, const std::vector<std::size_t>& pair) {
  const auto config = prefopt::load_experiment_config(config_path);
  const auto result = prefopt::score_pair(config, pair.at(0), pair.at(1));
  nlohmann::json out = {{"pair", pair},
                        {"score", result.score},
                        {"maximizers", result.maximizers.indices},
                        {"probabilities", result.maximizers.probabilities}};
  std::cout << out.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preferential Bayesian optimization with multinomial and top-k feedback"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run a BO experiment");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

  std::string dir;
  auto* rep = app.add_subcommand("replay", "Check an experiment directory for integrity");
  rep->add_option("--dir", dir, "Experiment output directory")->required()->check(CLI::ExistingDirectory);

  std::vector<std::size_t> pair;
  auto* score = app.add_subcommand("score", "MPES score of one pair after the initial observations");
  score->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  score->add_option("--pair", pair, "Two pool indices")->required()->expected(2);

  int port = 8080;
  std::string host = "127.0.0.1";
  std::string origin = "*";
  std::string log_dir;
  auto* serve = app.add_subcommand("serve", "Start the session HTTP service");
  serve->add_option("--port", port, "Port")->check(CLI::Range(1, 65535));
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--origin", origin, "Allowed CORS origin");
  serve->add_option("--log-dir", log_dir, "Directory for session logs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_command(config_path);
    if (*rep) return replay_command(dir);
    if (*score) return score_command(config_path, pair);
    if (*serve) {
      prefopt::SessionManager manager(log_dir);
      std::cerr << "listening on " << host << ':' << port << '\n';
      return prefopt::serve(manager, host, port, origin) ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
