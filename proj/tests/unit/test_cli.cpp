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

#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "test_support.hpp"

namespace fs = std::filesystem;
using qsector::testing::corpus_path;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(QSECTOR_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qsector_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("exit codes") {
  const fs::path dir = scratch("codes");
  CHECK(run_cli("validate --instrument " + corpus_path("qnd2")) == 0);
  CHECK(run_cli("validate") == 1);
  CHECK(run_cli("validate --instrument /nonexistent.json") == 1);

  const fs::path bad = dir / "bad.json";
  std::ofstream(bad) << "{\"dim\": 1, \"outcomes\": [\"a\"], \"kraus\": {\"a\": [[[[0.5, 0]]]]}}";
  CHECK(run_cli("validate --instrument " + bad.string()) == 2);

  const fs::path shape = dir / "shape.json";
  std::ofstream(shape) << "{\"dim\": 2, \"outcomes\": [\"a\"], \"kraus\": {\"a\": [[[[1, 0]]]]}}";
  CHECK(run_cli("validate --instrument " + shape.string()) == 1);

  const fs::path junk = dir / "junk.json";
  std::ofstream(junk) << "{not json";
  CHECK(run_cli("decompose --instrument " + junk.string()) == 1);
}

TEST_CASE("decompose writes structure and sectors") {
  const fs::path dir = scratch("decompose");
  REQUIRE(run_cli("decompose --instrument " + corpus_path("qnd2") + " --out " + dir.string()) == 0);
  CHECK(fs::exists(dir / "structure.json"));
  const std::string sectors = slurp(dir / "sectors.json");
  CHECK(sectors.find("kappa") != std::string::npos);
}

TEST_CASE("empty ensemble gives a header-only records file") {
  const fs::path dir = scratch("empty");
  REQUIRE(run_cli("simulate --instrument " + corpus_path("qnd2") + " --trajectories 0 --out " +
                  dir.string()) == 0);
  const std::string csv = slurp(dir / "records.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1);
  CHECK(csv.rfind("traj,step,outcome,", 0) == 0);
}
