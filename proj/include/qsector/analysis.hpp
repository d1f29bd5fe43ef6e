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
#include <vector>

#include "qsector/instrument.hpp"
#include "qsector/sectors.hpp"
#include "qsector/trajectory.hpp"

namespace qsector {

struct FrequencyEntry {
  Word word;
  long count = 0;
  long n_effective = 0;  // n - |word| + 1
  double frequency = 0.0;
};

struct FrequencyTable {
  long n = 0;
  std::vector<FrequencyEntry> entries;

  const FrequencyEntry* find(const Word& word) const;
};

/// Sliding-window occurrence counts. Throws InputError when a word is empty
/// or longer than the sequence.
FrequencyTable empirical_frequencies(const std::vector<OutcomeIndex>& sequence,
                                     const std::vector<Word>& words);

/// Single letters plus every witness word separating two distinct sectors.
std::vector<Word> classification_words(const Instrument& instr, const SectorDecomposition& decomp);

/// Sector whose law is within tol_class of the table on every word, or empty.
/// Throws AmbiguityError when two sectors qualify.
std::optional<std::size_t> classify_trajectory(const FrequencyTable& table,
                                               const SectorDecomposition& decomp,
                                               double tol_class);

struct RateFit {
  double slope = 0.0;
  double std_error = 0.0;
  long burn_in = 0;
  long first = 0;  // fitted range [first, last]
  long last = 0;
  bool hit_zero = false;  // Q reached numerical zero; fit uses the prefix
  long zero_step = -1;
};

/// Least-squares slope of ln Q_n against n over n in [burn_in, end]. The
/// default burn-in is 10% of the usable series. If Q drops below the smallest
/// normal double the fit stops before that step; with fewer than two points
/// left the slope is -inf.
RateFit as_rate(const std::vector<double>& q_series, std::optional<long> burn_in = std::nullopt);

/// Same fit on a series sampled at increasing steps (for strided records).
/// burn_in is a step index; the default is 10% of the last usable step.
RateFit as_rate(const std::vector<long>& steps, const std::vector<double>& q_series,
                std::optional<long> burn_in = std::nullopt);

struct EntropyRateOptions {
  long steps = 2000;
  long trajectories = 100;
  std::uint64_t seed = 0x5e47ULL;
  StepOptions step;
};

struct EntropyRate {
  double mean = 0.0;  // +inf when some trajectory had zero reference mass
  double std_error = 0.0;
  long trajectories = 0;
  long infinite = 0;             // trajectories with P_{rho_ch,alpha} = 0
  long truncation_step = -1;     // earliest step with zero reference mass
};

/// -(1/n)(ln P_{rho_ch,alpha} - ln P_gamma) averaged over trajectories of
/// P_gamma, sampled from the deformed instrument of a representative of
/// gamma started at its invariant state.
EntropyRate entropy_rate(const Instrument& instr, const SectorDecomposition& decomp,
                         std::size_t gamma, std::size_t alpha,
                         const EntropyRateOptions& opts = {});

struct WDecayPoint {
  long n = 0;
  double mean = 0.0;
  double se = 0.0;
  double bound = 0.0;  // constant * w0 * gamma^n + 3 se
  bool ok = true;
};

struct WDecayReport {
  double w0 = 0.0;
  double kappa = 0.0;
  int horizon = 1;
  double gamma = 0.0;  // kappa^(1/N)
  double constant = 1.0;
  std::vector<WDecayPoint> points;
  long violations = 0;
  bool all_ok = true;
  double fitted_slope = 0.0;  // of ln mean W against n
  long fit_points = 0;
  bool truncated = false;     // mean W fell below the smallest normal double
};

/// Checks mean W_n <= constant * w0 * gamma^n + 3 SE_n at every step. The
/// filter variant reads the W-hat moments and uses the constant from
/// filter_bound_constant.
WDecayReport mean_w_decay(const StepMoments& moments, double w0, double kappa_value, int horizon,
                          double constant = 1.0, bool filter = false);

/// || rho_hat^{-1/2} rho rho_hat^{-1/2} ||_inf.
double filter_bound_constant(const CMatrix& rho, const CMatrix& rho_hat);

struct BornSector {
  double expected = 0.0;  // tr(E_alpha rho0)
  long selected = 0;
  double fraction = 0.0;
  double band = 0.0;  // 3 sqrt(p (1 - p) / M)
  bool within = true;
};

struct BornReport {
  double threshold = 0.99;
  long trajectories = 0;  // completed trajectories
  std::vector<BornSector> sectors;
  long unresolved = 0;
  double unresolved_fraction = 0.0;
  std::optional<double> filter_agreement;  // fraction with argmax Q-hat = argmax Q
  bool passed = true;
};

BornReport born_rule_check(const EnsembleRecords& records, const SectorDecomposition& decomp,
                           const CMatrix& rho0, double threshold = 0.99);

}  // namespace qsector
