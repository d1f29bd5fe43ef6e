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
#include "qsector/invariant_structure.hpp"

namespace qsector {

struct SectorOptions {
  double tol_supp = kDefaultTolSupp;
  double tol_channel = 1e-8;  // deformed instruments inherit the fixed-point error of E_i
  double tol_null = 1e-8;
  double tol_law = 1e-8;
  double tol_cond = 1e-12;
  int l_eq = 0;  // 0 selects d_i^2 + d_j^2
  std::size_t word_budget = std::size_t{1} << 18;
};

/// Instrument Phi^(i)_a(X) = E_i^{-1/2} Phi_a(E_i^{1/2} X E_i^{1/2}) E_i^{-1/2}
/// compressed to supp E_i. Kraus operators V^dagger E_i^{1/2} K E_i^{-1/2} V
/// where V is the eigenbasis of E_i above tol_supp.
struct DeformedInstrument {
  std::size_t index = 0;
  Instrument instrument;
  CMatrix basis;            // dim x d_i
  CMatrix sqrt_effect;      // E_i^{1/2}, full dimension
  CMatrix inv_sqrt_effect;  // pseudo-inverse square root
  CMatrix invariant_state;  // V^dagger rho_i V, trace 1

  int local_dim() const { return instrument.dim(); }

  /// V^dagger E^{1/2} rho E^{1/2} V / tr(E rho). Throws NumericalError when
  /// tr(E rho) <= tol_cond.
  CMatrix deform_state(const CMatrix& rho, double tol_cond = 1e-12) const;
};

DeformedInstrument deformed_instrument(const Instrument& instr,
                                       const InvariantStructure& structure, std::size_t i,
                                       const SectorOptions& opts = {});

/// P_{rho,i}(a) = tr(rho Phi_a(E_i)) / tr(rho E_i).
double conditional_law(const Instrument& instr, const InvariantStructure& structure,
                       const CMatrix& rho, std::size_t i, const Word& word,
                       double tol_cond = 1e-12);

/// Same quantity through the deformed instrument: tr(rho^(i) Phi^(i)_a(Id)).
double conditional_law_deformed(const DeformedInstrument& deformed, const CMatrix& rho,
                                const Word& word, double tol_cond = 1e-12);

/// P_{rho_i}(a) evaluated on the deformed instrument from its invariant state.
double extreme_law(const DeformedInstrument& deformed, const Word& word);

struct LawComparison {
  bool equal = true;
  int horizon = 0;
  Word witness;           // first violating word when !equal
  double gap = 0.0;       // |P_i(witness) - P_j(witness)|, or max gap seen when equal
  double p_first = 0.0;   // P_i(witness)
  double p_second = 0.0;  // P_j(witness)
};

/// Compares P_{rho_i} and P_{rho_j} on all words up to length l_eq,
/// breadth-first, stopping at the first violation. Throws InputError when
/// sum_L |A|^L exceeds the word budget.
LawComparison compare_laws(const DeformedInstrument& di, const DeformedInstrument& dj,
                           int l_eq, double tol_law, std::size_t word_budget);

bool laws_equal(const Instrument& instr, const InvariantStructure& structure, std::size_t i,
                std::size_t j, const SectorOptions& opts = {});

struct PairComparison {
  std::size_t i = 0;
  std::size_t j = 0;
  LawComparison result;
};

struct SectorDecomposition {
  InvariantStructure structure;
  std::vector<std::vector<std::size_t>> partition;
  std::vector<Effect> sector_effects;
  std::vector<DeformedInstrument> deformed;  // indexed by extreme pair
  std::vector<PairComparison> comparisons;
  SectorOptions options;

  std::size_t num_sectors() const { return partition.size(); }
  std::size_t sector_of(std::size_t i) const;
  std::size_t representative(std::size_t alpha) const { return partition.at(alpha).front(); }
};

SectorDecomposition build_sectors(const Instrument& instr, InvariantStructure structure,
                                  const SectorOptions& opts = {});

/// P_alpha(a) = P_{rho_i}(a) for the representative i of alpha.
double sector_law(const SectorDecomposition& decomp, std::size_t alpha, const Word& word);

/// P_{rho,alpha}: tr(rho E_i)-weighted mixture of P_{rho,i}, i in alpha.
double sector_conditional_law(const Instrument& instr, const SectorDecomposition& decomp,
                              const CMatrix& rho, std::size_t alpha, const Word& word);

/// All words of a given length in lexicographic order of outcome indices.
std::vector<Word> all_words(std::size_t num_outcomes, int length);

/// Phi_a(X) for every a in A^length, in the order of all_words().
std::vector<CMatrix> heisenberg_ladder(const Instrument& instr, const CMatrix& x, int length);

struct HorizonOptions {
  int n_max = 8;
  int samples = 16;  // Haar-random pure states per sector
  std::uint64_t seed = 0x40a1ULL;
  double tol_law = 1e-8;
  std::size_t word_budget = std::size_t{1} << 16;
};

struct HorizonResult {
  std::optional<int> horizon;    // empty: inconclusive within n_max
  std::vector<double> min_gaps;  // per tested length
  int ensemble_size = 0;
};

/// Smallest n such that every pair of sectors is separated by more than
/// tol_law at length n over the search ensemble. Throws InputError for fewer
/// than two sectors.
HorizonResult identifiability_horizon(const Instrument& instr,
                                      const SectorDecomposition& decomp,
                                      const HorizonOptions& opts = {});

struct KappaOptions {
  int restarts = 8;
  std::uint64_t seed = 0x6b61ULL;
  int max_sweeps = 200;
  double initial_step = 0.25;
  double min_step = 1e-6;
  double tol_gap = 1e-9;
  double tol_cond = 1e-12;
  std::size_t word_budget = std::size_t{1} << 14;
};

struct KappaResult {
  double value = 0.0;
  CMatrix argmax;
  std::size_t alpha = 0;
  std::size_t beta = 0;
  int starts = 0;
  long evaluations = 0;
  bool below_one = true;  // value < 1 - tol_gap
};

/// Multi-start lower bound on
/// sup_{alpha != beta} sup_rho sum_{a in A^N} sqrt(P_{rho,alpha}(a) P_{rho,beta}(a)).
KappaResult kappa(const Instrument& instr, const SectorDecomposition& decomp, int horizon,
                  const KappaOptions& opts = {});

/// The Bhattacharyya sum for one state and pair; returns a negative value
/// when either conditioning mass is below tol_cond.
double bhattacharyya(const Instrument& instr, const SectorDecomposition& decomp,
                     const CMatrix& rho, std::size_t alpha, std::size_t beta, int length,
                     double tol_cond = 1e-12);

}  // namespace qsector
