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
#include <optional>
#include <string>
#include <vector>

#include "qsector/instrument.hpp"
#include "qsector/sectors.hpp"

namespace qsector {

/// splitmix64 output finalizer.
std::uint64_t splitmix64_finalize(std::uint64_t z);

/// Per-trajectory seed: finalizer of root ^ (t * 0x9E3779B97F4A7C15).
std::uint64_t mix64(std::uint64_t root_seed, std::uint64_t t);

/// SplitMix64 stream. uniform() returns (z >> 11) * 2^-53 in [0, 1).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  double uniform();

 private:
  std::uint64_t state_;
};

/// FNV-1a over outcome indices, 8 little-endian bytes per outcome.
inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
std::uint64_t fnv1a_step(std::uint64_t hash, OutcomeIndex a);

/// ln of a mixture sum_k w_k P^(k)(a_1..a_n) where each component is the
/// outcome law of a deformed instrument started from a local state.
/// Components are propagated normalized; their log masses accumulate.
class LogLawTracker {
 public:
  LogLawTracker() = default;
  void add_component(const DeformedInstrument* law, const CMatrix& local_state, double weight);

  void update(OutcomeIndex a);
  double value() const;  // -inf once every component has assigned zero mass
  std::size_t size() const { return laws_.size(); }

 private:
  std::vector<const DeformedInstrument*> laws_;
  std::vector<CMatrix> states_;
  std::vector<double> log_mass_;
};

/// P_{rho,alpha} as a tracker: components i in alpha with weights
/// tr(rho E_i) / tr(rho E_alpha).
LogLawTracker conditional_tracker(const SectorDecomposition& decomp, const CMatrix& rho,
                                  std::size_t alpha);

/// P_alpha as a tracker on the representative deformed instrument.
LogLawTracker sector_tracker(const SectorDecomposition& decomp, std::size_t alpha);

/// Q(alpha) = tr(E_alpha rho), clamped to [0, 1].
std::vector<double> q_vector(const SectorDecomposition& decomp, const CMatrix& rho);

/// Sum over ordered pairs alpha != beta of sqrt(q_alpha q_beta).
double lyapunov_w(const std::vector<double>& q);

struct TrajectoryState {
  long step = 0;
  long outcome = -1;  // last outcome index, -1 before the first step
  CMatrix rho;
  std::optional<CMatrix> rho_hat;
  std::uint64_t hash = kFnvOffset;
  std::vector<double> q;
  std::vector<double> q_hat;
  double w = 0.0;
  double w_hat = 0.0;
  double loglik_true = 0.0;
  std::vector<double> loglik_ch;   // ln P_{rho_ch, alpha}
  std::vector<double> loglik_sec;  // ln P_alpha
  std::vector<LogLawTracker> trackers_ch;
  std::vector<LogLawTracker> trackers_sec;
};

struct StepOptions {
  double p_floor = 1e-14;
  double tol_supp = kDefaultTolSupp;
};

TrajectoryState initial_trajectory_state(const SectorDecomposition& decomp, const CMatrix& rho0,
                                         const std::optional<CMatrix>& filter_state);

/// One measurement round: samples an outcome by inverse CDF over the declared
/// order, updates rho, the filter, Q, W and every log-likelihood. Throws
/// NumericalError when the total admissible mass is below dim * p_floor.
void step(const Instrument& instr, const SectorDecomposition& decomp, TrajectoryState& state,
          SplitMix64& rng, const StepOptions& opts = {});

/// Outcome sequence of length n sampled from instr starting at rho.
std::vector<OutcomeIndex> sample_outcomes(const Instrument& instr, const CMatrix& rho, long n,
                                          SplitMix64& rng, const StepOptions& opts = {});

struct RunConfig {
  long steps = 200;
  long trajectories = 1000;
  std::uint64_t root_seed = 0;
  CMatrix initial_state;
  std::optional<CMatrix> filter_state;
  long record_stride = 10;  // 0 disables row records
  StepOptions step;
  int threads = 0;  // 0 selects hardware concurrency
  bool keep_outcomes = false;
  bool keep_q_path = false;
};

struct RecordRow {
  long traj = 0;
  long step = 0;
  long outcome = -1;
  std::vector<double> q;
  std::vector<double> q_hat;  // empty without filter
  double w = 0.0;
  double w_hat = 0.0;
  double loglik_true = 0.0;
  std::vector<double> loglik_ch;
  std::vector<double> loglik_sec;
};

/// Moments over trajectories alive at each step n = 0..steps. W is kept as a
/// running mean and centered second moment, so identical samples give an
/// exactly zero spread.
struct StepMoments {
  std::vector<long> count;
  std::vector<double> w_mean, w_m2;
  std::vector<double> w_hat_mean, w_hat_m2;
  std::vector<std::vector<double>> q_sum;  // [n][alpha]

  void resize(long steps, std::size_t sectors);
  void add(long n, double w, double w_hat, const std::vector<double>& q);
  void merge(const StepMoments& other);
  double mean_w(long n) const;
  double se_w(long n) const;
  double mean_w_hat(long n) const;
  double se_w_hat(long n) const;
};

struct TrajectorySummary {
  long traj = 0;
  bool failed = false;
  std::string failure;
  long steps_done = 0;
  std::uint64_t hash = kFnvOffset;
  std::vector<double> q_final;
  std::vector<double> q_hat_final;
  std::vector<OutcomeIndex> outcomes;  // when keep_outcomes
  std::vector<std::vector<double>> q_path;  // [n][alpha], when keep_q_path
};

struct EnsembleRecords {
  std::size_t num_sectors = 0;
  bool has_filter = false;
  long steps = 0;
  std::vector<RecordRow> rows;  // ordered by (traj, step)
  std::vector<TrajectorySummary> trajectories;
  StepMoments moments;
  long failures = 0;
};

/// Independent trajectories, stream t seeded with mix64(root_seed, t).
/// Statistics are reduced in fixed blocks of trajectories, so results do not
/// depend on the number of threads.
EnsembleRecords run_ensemble(const Instrument& instr, const SectorDecomposition& decomp,
                             const RunConfig& config);

}  // namespace qsector
