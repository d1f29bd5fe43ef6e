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

#include "qsector/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qsector/errors.hpp"

namespace qsector {

namespace {

void require_square(const CMatrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    std::ostringstream os;
    os << what << ": expected a non-empty square matrix, got " << m.rows() << "x"
       << m.cols();
    throw DimensionError(os.str());
  }
}

// Smallest eigenvalue allowed before the matrix counts as not PSD.
void require_psd(const EigenDecomposition& eig, double tol_supp, const char* what) {
  const double lowest = eig.values(eig.values.size() - 1);
  if (lowest < -tol_supp) {
    std::ostringstream os;
    os << what << ": eigenvalue " << lowest << " below -" << tol_supp;
    throw NotPsdError(os.str());
  }
}

}  // namespace

HermitianMatrix::HermitianMatrix(const CMatrix& m) {
  require_square(m, "HermitianMatrix");
  m_ = (m + m.adjoint()) * 0.5;
}

HermitianMatrix HermitianMatrix::identity(Eigen::Index dim) {
  return HermitianMatrix(CMatrix::Identity(dim, dim));
}

HermitianMatrix HermitianMatrix::zero(Eigen::Index dim) {
  return HermitianMatrix(CMatrix::Zero(dim, dim));
}

HermitianMatrix hermitize(const CMatrix& m) { return HermitianMatrix(m); }

EigenDecomposition eig_hermitian(const HermitianMatrix& h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(h.matrix());
  if (solver.info() != Eigen::Success) {
    throw NumericalError("eig_hermitian: eigensolver did not converge");
  }
  const Eigen::Index n = h.dim();
  EigenDecomposition out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  // Eigen returns ascending order.
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = solver.eigenvalues()(n - 1 - k);
    CVector v = solver.eigenvectors().col(n - 1 - k);
    const double scale = v.cwiseAbs().maxCoeff();
    for (Eigen::Index j = 0; j < n; ++j) {
      const double mag = std::abs(v(j));
      if (mag > 1e-10 * scale) {
        v *= std::conj(v(j)) / mag;
        v(j) = Complex(mag, 0.0);
        break;
      }
    }
    out.vectors.col(k) = v;
  }
  return out;
}

CMatrix support_basis(const HermitianMatrix& h, double tol_supp) {
  const EigenDecomposition eig = eig_hermitian(h);
  require_psd(eig, tol_supp, "support_basis");
  Eigen::Index rank = 0;
  while (rank < eig.values.size() && eig.values(rank) > tol_supp) ++rank;
  return eig.vectors.leftCols(rank);
}

HermitianMatrix support_projector(const HermitianMatrix& h, double tol_supp) {
  const CMatrix basis = support_basis(h, tol_supp);
  return HermitianMatrix(basis * basis.adjoint());
}

HermitianMatrix psd_power(const HermitianMatrix& h, double p, double tol_supp) {
  const EigenDecomposition eig = eig_hermitian(h);
  require_psd(eig, tol_supp, "psd_power");
  RVector f(eig.values.size());
  for (Eigen::Index k = 0; k < f.size(); ++k) {
    f(k) = eig.values(k) > tol_supp ? std::pow(eig.values(k), p) : 0.0;
  }
  return HermitianMatrix(eig.vectors * f.cast<Complex>().asDiagonal() *
                         eig.vectors.adjoint());
}

HermitianMatrix clip_and_normalize(const HermitianMatrix& h, double tol_supp) {
  CMatrix m = h.matrix();
  const EigenDecomposition eig = eig_hermitian(h);
  require_psd(eig, tol_supp, "clip_and_normalize");
  if (eig.values(eig.values.size() - 1) < 0.0) {
    const RVector clipped = eig.values.cwiseMax(0.0);
    m = eig.vectors * clipped.cast<Complex>().asDiagonal() * eig.vectors.adjoint();
  }
  const double tr = m.trace().real();
  if (!(tr > 0.0)) throw NumericalError("clip_and_normalize: non-positive trace");
  return HermitianMatrix(m / tr);
}

double trace_norm(const CMatrix& m) {
  require_square(m, "trace_norm");
  Eigen::JacobiSVD<CMatrix> svd(m);
  return svd.singularValues().sum();
}

double operator_norm(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMatrix> svd(m);
  return svd.singularValues()(0);
}

double max_abs(const CMatrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

bool all_finite(const CMatrix& m) { return m.allFinite(); }

Complex hs_inner(const CMatrix& a, const CMatrix& b) {
  return (a.adjoint() * b).trace();
}

CVector vec(const CMatrix& x) {
  return Eigen::Map<const CVector>(x.data(), x.size());
}

CMatrix unvec(const CVector& v, Eigen::Index dim) {
  return Eigen::Map<const CMatrix>(v.data(), dim, dim);
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

}  // namespace qsector
