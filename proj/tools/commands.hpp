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

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

namespace qsector::cli {

inline constexpr const char* kToolVersion = "0.1.0";

struct CliConfig {
  std::string command;
  std::string instrument;
  std::string out;
  std::string initial_state;  // empty: Id / dim
  std::string filter_state;   // empty: no filter
  std::uint64_t seed = 42;
  long steps = 200;
  long trajectories = 1000;
  long record_stride = 10;
  int threads = 0;

  double tol_channel = 1e-9;
  double tol_supp = 1e-9;
  double tol_null = 1e-8;
  double tol_fix = 1e-8;
  double tol_gap = 1e-6;
  double tol_law = 1e-8;
  double tol_cond = 1e-12;
  double tol_class = 0.05;
  double p_floor = 1e-14;
  int l_eq = 0;
  std::size_t word_budget = std::size_t{1} << 18;

  int n_max = 8;
  int kappa_restarts = 8;
  double threshold = 0.99;
  long rate_steps = 2000;
  long rate_trajectories = 100;
  long lln_steps = 5000;
};

/// Each returns the process exit code; library errors propagate to main.
int cmd_validate(const CliConfig& c, std::ostream& log);
int cmd_decompose(const CliConfig& c, std::ostream& log);
int cmd_simulate(const CliConfig& c, std::ostream& log);
int cmd_analyze(const CliConfig& c, std::ostream& log);
int cmd_pipeline(const CliConfig& c, std::ostream& log);

/// Maps an exception to 1 (input), 2 (validation or structure), 3 (numerical).
int exit_code_for(const std::exception& e);

}  // namespace qsector::cli
