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

#include <complex>

#include <Eigen/Dense>

namespace qsector {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

/// Default spectral cutoff for supports, powers and clipping.
inline constexpr double kDefaultTolSupp = 1e-9;

/// Square complex matrix with M == M^dagger holding exactly.
///
/// Construction always symmetrizes, so the invariant cannot be broken by
/// rounding in the producer.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;
  explicit HermitianMatrix(const CMatrix& m);

  static HermitianMatrix identity(Eigen::Index dim);
  static HermitianMatrix zero(Eigen::Index dim);

  const CMatrix& matrix() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }
  double trace() const { return m_.trace().real(); }

 private:
  CMatrix m_;
};

struct EigenDecomposition {
  RVector values;   // descending
  CMatrix vectors;  // orthonormal columns, phase-fixed
};

/// (M + M^dagger) / 2. Throws DimensionError for non-square input.
HermitianMatrix hermitize(const CMatrix& m);

/// Eigenvalues sorted descending. Each eigenvector has its first
/// non-negligible component made real and positive.
EigenDecomposition eig_hermitian(const HermitianMatrix& h);

/// Orthonormal basis (as columns) of the span of eigenvectors with
/// eigenvalue > tol_supp. Throws NotPsdError on eigenvalues < -tol_supp.
CMatrix support_basis(const HermitianMatrix& h, double tol_supp = kDefaultTolSupp);

HermitianMatrix support_projector(const HermitianMatrix& h,
                                  double tol_supp = kDefaultTolSupp);

/// V diag(f(lambda)) V^dagger with f(l) = l^p above tol_supp and 0 otherwise,
/// i.e. the Moore-Penrose convention for negative p.
HermitianMatrix psd_power(const HermitianMatrix& h, double p,
                          double tol_supp = kDefaultTolSupp);

/// Negative eigenvalues in [-tol_supp, 0) set to zero, then trace set to 1.
/// Matrices that are already PSD are returned unchanged up to the trace
/// normalization, so tiny positive eigenvalues survive.
HermitianMatrix clip_and_normalize(const HermitianMatrix& h,
                                   double tol_supp = kDefaultTolSupp);

double trace_norm(const CMatrix& m);
double operator_norm(const CMatrix& m);
double max_abs(const CMatrix& m);
bool all_finite(const CMatrix& m);

/// Hilbert-Schmidt inner product tr(A^dagger B).
Complex hs_inner(const CMatrix& a, const CMatrix& b);

/// Column stacking: vec(AXB) = (B^T kron A) vec(X).
CVector vec(const CMatrix& x);
CMatrix unvec(const CVector& v, Eigen::Index dim);
CMatrix kron(const CMatrix& a, const CMatrix& b);

}  // namespace qsector
