// Copyright 2026 The qsector Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

using qsector::cli::CliConfig;

void add_common(CLI::App* sub, CliConfig& c) {
  sub->add_option("--instrument", c.instrument, "Instrument JSON file")->required();
  sub->add_option("--out", c.out, "Output directory");
  sub->add_option("--seed", c.seed, "Root seed");
  sub->add_option("--steps", c.steps, "Steps per trajectory")->check(CLI::NonNegativeNumber);
  sub->add_option("--trajectories", c.trajectories, "Number of trajectories")->check(CLI::NonNegativeNumber);
  sub->add_option("--record-stride", c.record_stride, "Record every k steps (0: none)")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--initial-state", c.initial_state, "Initial density matrix JSON (default Id/d)");
  sub->add_option("--filter-state", c.filter_state, "Positive definite filter state JSON");
  sub->add_option("--threads", c.threads, "Worker threads (0: hardware)")->check(CLI::NonNegativeNumber);
  sub->add_option("--tol-channel", c.tol_channel)->check(CLI::PositiveNumber);
  sub->add_option("--tol-supp", c.tol_supp)->check(CLI::PositiveNumber);
  sub->add_option("--tol-null", c.tol_null)->check(CLI::PositiveNumber);
  sub->add_option("--tol-fix", c.tol_fix)->check(CLI::PositiveNumber);
  sub->add_option("--tol-gap", c.tol_gap)->check(CLI::PositiveNumber);
  sub->add_option("--tol-law", c.tol_law)->check(CLI::PositiveNumber);
  sub->add_option("--tol-cond", c.tol_cond)->check(CLI::PositiveNumber);
  sub->add_option("--tol-class", c.tol_class)->check(CLI::PositiveNumber);
  sub->add_option("--p-floor", c.p_floor)->check(CLI::PositiveNumber);
  sub->add_option("--l-eq", c.l_eq, "Law comparison length (0: d_i^2 + d_j^2)")->check(CLI::NonNegativeNumber);
  sub->add_option("--word-budget", c.word_budget)->check(CLI::PositiveNumber);
  sub->add_option("--n-max", c.n_max, "Largest identifiability horizon tried")->check(CLI::PositiveNumber);
  sub->add_option("--kappa-restarts", c.kappa_restarts)->check(CLI::NonNegativeNumber);
  sub->add_option("--threshold", c.threshold, "Selection threshold on Q");
  sub->add_option("--rate-steps", c.rate_steps)->check(CLI::PositiveNumber);
  sub->add_option("--rate-trajectories", c.rate_trajectories)->check(CLI::PositiveNumber);
  sub->add_option("--lln-steps", c.lln_steps)->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Invariant structure, sector selection and trajectory analysis for quantum instruments"};
  app.require_subcommand(1);
  CliConfig config;
  const char* names[] = {"validate", "decompose", "simulate", "analyze", "pipeline"};
  const char* help[] = {"Check the channel condition", "Compute enclosures, effects and sectors",
                        "Run a seeded trajectory ensemble", "Analyze recorded trajectories",
                        "validate, decompose, simulate and analyze in sequence"};
  for (int k = 0; k < 5; ++k) add_common(app.add_subcommand(names[k], help[k]), config);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  config.command = app.get_subcommands().front()->get_name();
  try {
    using namespace qsector::cli;
    if (config.command == "validate") return cmd_validate(config, std::cout);
    if (config.command == "decompose") return cmd_decompose(config, std::cout);
    if (config.command == "simulate") return cmd_simulate(config, std::cout);
    if (config.command == "analyze") return cmd_analyze(config, std::cout);
    return cmd_pipeline(config, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return qsector::cli::exit_code_for(e);
  }
}
