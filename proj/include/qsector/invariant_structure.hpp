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
#include <vector>

#include "qsector/instrument.hpp"
#include "qsector/matrix.hpp"

namespace qsector {

struct StructureOptions {
  double tol_supp = kDefaultTolSupp;
  double tol_null = 1e-8;   // singular-value cutoff for fixed spaces
  double tol_fix = 1e-8;    // residual allowed on fixed-point identities
  double tol_gap = 1e-6;    // spectral separation below which Cesaro averaging is used
  std::uint64_t split_seed = 0x5eed5eedULL;
  int max_split_retries = 32;
  bool force_averaging = false;  // skip the spectral route in cesaro_apply
};

/// Hermitian basis of {X : Phi(X) = X} (heisenberg) or {rho : Phi^*(rho) = rho}
/// (schrodinger), orthonormal for the real Hilbert-Schmidt inner product.
/// Its complex span is the fixed space.
std::vector<HermitianMatrix> fixed_space(const Instrument& instr, Picture picture,
                                         double tol_null = 1e-8);

struct CesaroResult {
  CMatrix value;
  bool used_averaging = false;
  int doublings = 0;          // averaging window is 2^doublings when used_averaging
  double spectral_gap = 0.0;  // distance from 1 to the nearest other eigenvalue
  double residual = 0.0;      // ||Phi(value) - value||_max
};

/// Eigenvalue-1 spectral projection of X (the Cesaro mean limit).
///
/// Spectral route: P = R (L^dagger R)^{-1} L^dagger with R, L bases of the
/// right and left null spaces of S - Id. When the unit eigenvalue is poorly
/// separated (gap < tol_gap) or L^dagger R is ill-conditioned, falls back to
/// Cesaro averaging over 2^k steps by repeated doubling of the superoperator.
CesaroResult cesaro_apply(const Instrument& instr, Picture picture, const CMatrix& x,
                          const StructureOptions& opts = {});

/// Support projector of T_inf(Id/dim).
HermitianMatrix recurrent_projector(const Instrument& instr,
                                    const StructureOptions& opts = {});

struct Enclosure {
  HermitianMatrix projector;
  CMatrix basis;  // dim x rank isometry
};

struct EnclosureResult {
  std::vector<Enclosure> enclosures;
  int retries = 0;  // extra random draws spent on eigenvalue collisions
};

/// Minimal enclosures by recursive splitting along eigenspaces of random
/// Hermitian fixed points of the restricted instrument. Sorted by rank, then
/// by projector entries (descending, row-major).
EnclosureResult minimal_enclosures(const Instrument& instr,
                                   const StructureOptions& opts = {});

std::vector<State> extreme_invariant_states(const Instrument& instr,
                                            const std::vector<Enclosure>& enclosures,
                                            const StructureOptions& opts = {});

std::vector<Effect> absorption_effects(const Instrument& instr,
                                       const std::vector<Enclosure>& enclosures,
                                       const StructureOptions& opts = {});

struct StructureDiagnostics {
  double state_fixed_residual = 0.0;   // max_i ||Phi^*(rho_i) - rho_i||
  double effect_fixed_residual = 0.0;  // max_i ||Phi(E_i) - E_i||
  double effect_sum_residual = 0.0;    // ||sum E_i - Id||
  double support_residual = 0.0;       // ||sum P_i - recurrent projector||
  double off_block_residual = 0.0;     // max_i ||P_i E_i (Id - P_i)||
  double lambda_spread = 0.0;          // max_i eigenvalue spread of P_i E_i P_i on range P_i
  double min_foreign_overlap = 0.0;    // min_{i != j} ||P_i (Id - supp E_j)||: supp rho_i not in supp E_j
  double max_inclusion_residual = 0.0; // max_i ||(Id - supp E_i) P_i||: supp rho_i in supp E_i
};

struct InvariantStructure {
  HermitianMatrix recurrent_projector;
  std::vector<Enclosure> enclosures;
  std::vector<State> states;
  std::vector<Effect> effects;
  std::vector<double> lambdas;
  StructureDiagnostics diagnostics;
  int split_retries = 0;

  std::size_t r() const { return states.size(); }
};

StructureDiagnostics check_structure(const Instrument& instr,
                                     const std::vector<Enclosure>& enclosures,
                                     const std::vector<State>& states,
                                     const std::vector<Effect>& effects,
                                     const HermitianMatrix& recurrent,
                                     double tol_supp);

/// Runs the full pipeline and throws StructureError when any structural
/// invariant fails at tol_fix.
InvariantStructure compute_invariant_structure(const Instrument& instr,
                                               const StructureOptions& opts = {});

}  // namespace qsector
