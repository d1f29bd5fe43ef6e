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

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "qsector/matrix.hpp"

namespace qsector {

inline constexpr double kDefaultTolChannel = 1e-9;

using OutcomeIndex = std::size_t;

/// Finite outcome sequence, stored as indices into Instrument::outcomes().
using Word = std::vector<OutcomeIndex>;

Word concat(const Word& a, const Word& b);

enum class Picture { heisenberg, schrodinger };

/// Outcome-indexed Kraus families {K_{a,k}}.
///
/// Heisenberg convention: Phi_a(X) = sum_k K_{a,k}^dagger X K_{a,k}, so that
/// P_rho(a_1..a_n) = tr(rho Phi_{a_1} o ... o Phi_{a_n}(Id)). The Schrodinger
/// dual is Phi_a^*(rho) = sum_k K_{a,k} rho K_{a,k}^dagger.
///
/// The constructor checks structure only (dimensions, labels, finiteness) and
/// throws StructureError listing every problem. The channel condition is
/// checked by validate().
class Instrument {
 public:
  Instrument(int dim, std::vector<std::string> outcomes,
             std::vector<std::vector<CMatrix>> kraus);

  int dim() const { return dim_; }
  std::size_t num_outcomes() const { return outcomes_.size(); }
  const std::vector<std::string>& outcomes() const { return outcomes_; }
  const std::string& label(OutcomeIndex a) const;
  const std::vector<CMatrix>& kraus(OutcomeIndex a) const;
  const std::vector<std::vector<CMatrix>>& kraus() const { return kraus_; }

  /// Throws UnknownOutcomeError.
  OutcomeIndex outcome_index(std::string_view label) const;
  Word parse_word(const std::vector<std::string>& labels) const;

 private:
  void check_outcome(OutcomeIndex a) const;

  int dim_;
  std::vector<std::string> outcomes_;
  std::vector<std::vector<CMatrix>> kraus_;
};

/// Density matrix: PSD within tolerance and unit trace within 1e-10.
class State {
 public:
  /// Validates; throws InputError when the matrix is not a state.
  explicit State(const CMatrix& rho, double tol = kDefaultTolSupp);

  static State chaotic(int dim);
  static State pure(const CVector& psi);

  const CMatrix& matrix() const { return rho_.matrix(); }
  const HermitianMatrix& hermitian() const { return rho_; }
  Eigen::Index dim() const { return rho_.dim(); }

 private:
  HermitianMatrix rho_;
};

/// 0 <= E <= Id within tolerance.
class Effect {
 public:
  explicit Effect(const CMatrix& e, double tol = 1e-8);

  static Effect identity(int dim);

  const CMatrix& matrix() const { return e_.matrix(); }
  const HermitianMatrix& hermitian() const { return e_; }
  Eigen::Index dim() const { return e_.dim(); }

 private:
  HermitianMatrix e_;
};

struct OutcomeWeight {
  std::string label;
  double min_eigenvalue = 0.0;  // of Phi_a(Id)
  double max_eigenvalue = 0.0;
  double excess = 0.0;          // max(0, max_eigenvalue - 1)
};

struct ValidationReport {
  double tolerance = kDefaultTolChannel;
  double deficit = 0.0;  // || sum_a Phi_a(Id) - Id ||_inf (operator norm)
  std::vector<OutcomeWeight> per_outcome;
  bool passed = false;
};

ValidationReport validate(const Instrument& instr,
                          double tol_channel = kDefaultTolChannel);

/// Throws ValidationError carrying the deficit when validate() fails.
void require_valid(const Instrument& instr, double tol_channel = kDefaultTolChannel);

CMatrix apply_heisenberg(const Instrument& instr, OutcomeIndex a, const CMatrix& x);
CMatrix apply_schrodinger(const Instrument& instr, OutcomeIndex a, const CMatrix& rho);
CMatrix apply_channel(const Instrument& instr, Picture picture, const CMatrix& x);

/// Phi_{a_1} o ... o Phi_{a_n}(x), evaluated right to left.
CMatrix heisenberg_word(const Instrument& instr, const Word& word, const CMatrix& x);

/// Phi^*_{a_n} o ... o Phi^*_{a_1}(rho), unnormalized.
CMatrix schrodinger_word(const Instrument& instr, const Word& word, const CMatrix& rho);

/// dim^2 x dim^2 matrix of the full channel in the column-stacking basis.
CMatrix superoperator_matrix(const Instrument& instr, Picture picture);
CMatrix superoperator_matrix(const Instrument& instr, OutcomeIndex a, Picture picture);

/// tr(rho Phi_{a_1} o ... o Phi_{a_p}(E)).
double word_probability(const Instrument& instr, const State& rho, const Word& word);
double word_probability(const Instrument& instr, const State& rho, const Word& word,
                        const Effect& effect);
double word_probability(const Instrument& instr, const CMatrix& rho, const Word& word,
                        const CMatrix& effect);

/// Compression onto the range of an isometry V (columns orthonormal):
/// K -> V^dagger K V. Meaningful when range(V) is invariant.
Instrument restrict_instrument(const Instrument& instr, const CMatrix& isometry);

}  // namespace qsector
