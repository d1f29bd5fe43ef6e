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

#include "qsector/invariant_structure.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "qsector/errors.hpp"

namespace qsector {

namespace {

// Orthonormal basis of {v : A v = 0} from the right singular vectors with
// singular value <= tol.
CMatrix null_space(const CMatrix& a, double tol) {
  Eigen::BDCSVD<CMatrix> svd(a, Eigen::ComputeFullV);
  const RVector& s = svd.singularValues();
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > tol) ++rank;
  return svd.matrixV().rightCols(a.cols() - rank);
}

// Real coordinates (re, im of every entry) of a square complex matrix.
Eigen::VectorXd real_coords(const CMatrix& m) {
  Eigen::VectorXd out(2 * m.size());
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    out(2 * k) = m.data()[k].real();
    out(2 * k + 1) = m.data()[k].imag();
  }
  return out;
}

CMatrix from_real_coords(const Eigen::VectorXd& v, Eigen::Index dim) {
  CMatrix m(dim, dim);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = Complex(v(2 * k), v(2 * k + 1));
  return m;
}

// Hermitian real-orthonormal basis spanning the same complex space as the
// given adjoint-closed null space.
std::vector<HermitianMatrix> hermitian_basis(const CMatrix& null_vectors, Eigen::Index dim) {
  const Eigen::Index k = null_vectors.cols();
  std::vector<HermitianMatrix> out;
  if (k == 0) return out;
  Eigen::MatrixXd cand(2 * dim * dim, 2 * k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const CMatrix x = unvec(null_vectors.col(j), dim);
    cand.col(2 * j) = real_coords((x + x.adjoint()) * 0.5);
    cand.col(2 * j + 1) = real_coords((x - x.adjoint()) * Complex(0.0, -0.5));
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(cand, Eigen::ComputeThinU);
  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::VectorXd u = svd.matrixU().col(j);
    for (Eigen::Index t = 0; t < u.size(); ++t) {
      if (std::abs(u(t)) > 1e-8) {
        if (u(t) < 0) u = -u;
        break;
      }
    }
    out.emplace_back(from_real_coords(u, dim));
  }
  return out;
}

CMatrix identity_like(Eigen::Index n) { return CMatrix::Identity(n, n); }

// Lexicographic order used to make enclosure lists reproducible.
bool enclosure_less(const Enclosure& a, const Enclosure& b) {
  if (a.basis.cols() != b.basis.cols()) return a.basis.cols() < b.basis.cols();
  const CMatrix& pa = a.projector.matrix();
  const CMatrix& pb = b.projector.matrix();
  auto quant = [](double v) { return std::llround(v * 1e8); };
  for (Eigen::Index i = 0; i < pa.rows(); ++i) {
    for (Eigen::Index j = 0; j < pa.cols(); ++j) {
      const auto ra = quant(pa(i, j).real()), rb = quant(pb(i, j).real());
      if (ra != rb) return ra > rb;
      const auto ia = quant(pa(i, j).imag()), ib = quant(pb(i, j).imag());
      if (ia != ib) return ia > ib;
    }
  }
  return false;
}

}  // namespace

std::vector<HermitianMatrix> fixed_space(const Instrument& instr, Picture picture,
                                         double tol_null) {
  const CMatrix s = superoperator_matrix(instr, picture);
  const CMatrix n = null_space(s - identity_like(s.rows()), tol_null);
  return hermitian_basis(n, instr.dim());
}

CesaroResult cesaro_apply(const Instrument& instr, Picture picture, const CMatrix& x,
                          const StructureOptions& opts) {
  if (x.rows() != instr.dim() || x.cols() != instr.dim()) {
    throw DimensionError("cesaro_apply: operand has wrong dimension");
  }
  const CMatrix s = superoperator_matrix(instr, picture);
  const Eigen::Index n = s.rows();
  const CMatrix a = s - identity_like(n);
  const CVector vx = vec(x);
  CesaroResult out;

  Eigen::ComplexEigenSolver<CMatrix> es(s, false);
  Eigen::Index near_one = 0;
  double gap = 2.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double dist = std::abs(es.eigenvalues()(k) - 1.0);
    if (dist <= opts.tol_gap) {
      ++near_one;
    } else {
      gap = std::min(gap, dist);
    }
  }
  out.spectral_gap = gap;

  bool spectral_ok = !opts.force_averaging && es.info() == Eigen::Success;
  if (spectral_ok) {
    const CMatrix right = null_space(a, opts.tol_null);
    const CMatrix left = null_space(a.adjoint(), opts.tol_null);
    spectral_ok = right.cols() == left.cols() && right.cols() == near_one && right.cols() > 0;
    if (spectral_ok) {
      const CMatrix g = left.adjoint() * right;
      Eigen::JacobiSVD<CMatrix> gsvd(g);
      spectral_ok = gsvd.singularValues().minCoeff() > 1e-6;
      if (spectral_ok) {
        const CVector coeff = g.partialPivLu().solve(left.adjoint() * vx);
        out.value = unvec(right * coeff, instr.dim());
      }
    }
  }

  if (!spectral_ok) {
    // T_{2m} = (T_m + S^m T_m) / 2 with T_1 = Id: Cesaro mean over 2^k steps.
    CMatrix power = s;
    CVector mean = vx;
    out.used_averaging = true;
    for (int k = 1; k <= 60; ++k) {
      mean = 0.5 * (mean + power * mean);
      power = power * power;
      out.doublings = k;
      if (k >= 20 && (s * mean - mean).cwiseAbs().maxCoeff() <= 1e-11) break;
    }
    out.value = unvec(mean, instr.dim());
  }
  out.residual = max_abs(apply_channel(instr, picture, out.value) - out.value);
  return out;
}

HermitianMatrix recurrent_projector(const Instrument& instr, const StructureOptions& opts) {
  const int d = instr.dim();
  const CMatrix chaotic = CMatrix::Identity(d, d) / static_cast<double>(d);
  const CesaroResult inv = cesaro_apply(instr, Picture::schrodinger, chaotic, opts);
  return support_projector(hermitize(inv.value), opts.tol_supp);
}

EnclosureResult minimal_enclosures(const Instrument& instr, const StructureOptions& opts) {
  EnclosureResult result;
  const HermitianMatrix recurrent = recurrent_projector(instr, opts);
  std::vector<CMatrix> pending{support_basis(recurrent, 0.5)};
  std::mt19937_64 rng(opts.split_seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  while (!pending.empty()) {
    CMatrix v = std::move(pending.back());
    pending.pop_back();
    if (v.cols() == 1) {
      result.enclosures.push_back({HermitianMatrix(v * v.adjoint()), v});
      continue;
    }
    const Instrument sub = restrict_instrument(instr, v);
    const std::vector<HermitianMatrix> basis = fixed_space(sub, Picture::heisenberg, opts.tol_null);
    if (basis.size() <= 1) {
      result.enclosures.push_back({HermitianMatrix(v * v.adjoint()), v});
      continue;
    }
    bool split = false;
    for (int attempt = 0; attempt < opts.max_split_retries && !split; ++attempt) {
      CMatrix draw = CMatrix::Zero(v.cols(), v.cols());
      for (const auto& b : basis) draw += normal(rng) * b.matrix();
      const EigenDecomposition eig = eig_hermitian(hermitize(draw));
      const double spread = eig.values(0) - eig.values(eig.values.size() - 1);
      const double same = 1e-6 * std::max(1.0, spread);
      const double apart = 1e-3 * spread;
      std::vector<Eigen::Index> cuts;
      bool collision = spread <= same;
      for (Eigen::Index k = 1; k < eig.values.size() && !collision; ++k) {
        const double gap = eig.values(k - 1) - eig.values(k);
        if (gap >= apart) {
          cuts.push_back(k);
        } else if (gap > same) {
          collision = true;
        }
      }
      if (collision || cuts.empty()) {
        ++result.retries;
        continue;
      }
      cuts.push_back(eig.values.size());
      Eigen::Index start = 0;
      for (Eigen::Index cut : cuts) {
        pending.push_back(v * eig.vectors.middleCols(start, cut - start));
        start = cut;
      }
      split = true;
    }
    if (!split) {
      std::ostringstream os;
      os << "minimal_enclosures: could not split a " << v.cols()
         << "-dimensional invariant subspace after " << opts.max_split_retries << " draws";
      throw StructureError(os.str());
    }
  }
  std::sort(result.enclosures.begin(), result.enclosures.end(), enclosure_less);
  return result;
}

std::vector<State> extreme_invariant_states(const Instrument& instr,
                                            const std::vector<Enclosure>& enclosures,
                                            const StructureOptions& opts) {
  std::vector<State> states;
  for (std::size_t i = 0; i < enclosures.size(); ++i) {
    const CMatrix& v = enclosures[i].basis;
    const Instrument sub = restrict_instrument(instr, v);
    const auto fixed = fixed_space(sub, Picture::schrodinger, opts.tol_null);
    if (fixed.size() != 1) {
      std::ostringstream os;
      os << "enclosure " << i << " is not minimal: invariant-state space has dimension "
         << fixed.size();
      throw StructureError(os.str());
    }
    const double tr = fixed[0].trace();
    if (std::abs(tr) < 1e-12) throw StructureError("invariant state has zero trace");
    const HermitianMatrix local = clip_and_normalize(HermitianMatrix(fixed[0].matrix() / tr),
                                                     opts.tol_supp);
    states.emplace_back(v * local.matrix() * v.adjoint());
  }
  return states;
}

std::vector<Effect> absorption_effects(const Instrument& instr,
                                       const std::vector<Enclosure>& enclosures,
                                       const StructureOptions& opts) {
  std::vector<Effect> effects;
  const int d = instr.dim();
  CMatrix total = CMatrix::Zero(d, d);
  for (const auto& enc : enclosures) {
    const CesaroResult c = cesaro_apply(instr, Picture::heisenberg, enc.projector.matrix(), opts);
    effects.emplace_back(hermitize(c.value).matrix());
    total += effects.back().matrix();
  }
  const double dev = max_abs(total - CMatrix::Identity(d, d));
  if (dev > opts.tol_fix) {
    std::ostringstream os;
    os << "absorption effects sum to Id only within " << dev;
    throw StructureError(os.str());
  }
  return effects;
}

StructureDiagnostics check_structure(const Instrument& instr,
                                     const std::vector<Enclosure>& enclosures,
                                     const std::vector<State>& states,
                                     const std::vector<Effect>& effects,
                                     const HermitianMatrix& recurrent, double tol_supp) {
  StructureDiagnostics diag;
  const int d = instr.dim();
  const CMatrix id = CMatrix::Identity(d, d);
  CMatrix effect_sum = CMatrix::Zero(d, d);
  CMatrix projector_sum = CMatrix::Zero(d, d);
  std::vector<CMatrix> effect_supports;
  for (const auto& e : effects) {
    effect_supports.push_back(support_projector(e.hermitian(), tol_supp).matrix());
  }
  diag.min_foreign_overlap = enclosures.size() > 1 ? 1.0 : 0.0;
  for (std::size_t i = 0; i < enclosures.size(); ++i) {
    const CMatrix& p = enclosures[i].projector.matrix();
    const CMatrix& rho = states[i].matrix();
    const CMatrix& e = effects[i].matrix();
    effect_sum += e;
    projector_sum += p;
    diag.state_fixed_residual = std::max(
        diag.state_fixed_residual, max_abs(apply_channel(instr, Picture::schrodinger, rho) - rho));
    diag.effect_fixed_residual = std::max(
        diag.effect_fixed_residual, max_abs(apply_channel(instr, Picture::heisenberg, e) - e));
    diag.off_block_residual = std::max(diag.off_block_residual, max_abs(p * e * (id - p)));
    const CMatrix& v = enclosures[i].basis;
    const EigenDecomposition block = eig_hermitian(hermitize(v.adjoint() * e * v));
    diag.lambda_spread = std::max(diag.lambda_spread,
                                  block.values(0) - block.values(block.values.size() - 1));
    diag.max_inclusion_residual = std::max(diag.max_inclusion_residual,
                                           operator_norm((id - effect_supports[i]) * p));
    for (std::size_t j = 0; j < enclosures.size(); ++j) {
      if (j == i) continue;
      diag.min_foreign_overlap =
          std::min(diag.min_foreign_overlap, operator_norm((id - effect_supports[j]) * p));
    }
  }
  diag.effect_sum_residual = max_abs(effect_sum - id);
  diag.support_residual = max_abs(projector_sum - recurrent.matrix());
  return diag;
}

InvariantStructure compute_invariant_structure(const Instrument& instr,
                                               const StructureOptions& opts) {
  InvariantStructure s;
  s.recurrent_projector = recurrent_projector(instr, opts);
  EnclosureResult enc = minimal_enclosures(instr, opts);
  s.enclosures = std::move(enc.enclosures);
  s.split_retries = enc.retries;
  s.states = extreme_invariant_states(instr, s.enclosures, opts);
  s.effects = absorption_effects(instr, s.enclosures, opts);
  for (std::size_t i = 0; i < s.enclosures.size(); ++i) {
    const CMatrix& v = s.enclosures[i].basis;
    const CMatrix block = v.adjoint() * s.effects[i].matrix() * v;
    s.lambdas.push_back(block.trace().real() / static_cast<double>(v.cols()));
  }
  s.diagnostics = check_structure(instr, s.enclosures, s.states, s.effects,
                                  s.recurrent_projector, opts.tol_supp);
  const StructureDiagnostics& dg = s.diagnostics;
  std::vector<std::string> failures;
  auto require = [&](bool ok, const char* what, double value) {
    if (!ok) {
      std::ostringstream os;
      os << what << " = " << value;
      failures.push_back(os.str());
    }
  };
  require(dg.state_fixed_residual <= opts.tol_fix, "state fixed-point residual", dg.state_fixed_residual);
  require(dg.effect_fixed_residual <= opts.tol_fix, "effect fixed-point residual", dg.effect_fixed_residual);
  require(dg.effect_sum_residual <= opts.tol_fix, "effect sum residual", dg.effect_sum_residual);
  require(dg.support_residual <= opts.tol_fix, "enclosure sum residual", dg.support_residual);
  require(dg.off_block_residual <= opts.tol_fix, "off-block residual", dg.off_block_residual);
  require(dg.lambda_spread <= opts.tol_fix, "lambda spread", dg.lambda_spread);
  require(dg.max_inclusion_residual <= 1e-6, "support inclusion residual", dg.max_inclusion_residual);
  require(s.r() <= 1 || dg.min_foreign_overlap > 1e-6, "foreign support overlap", dg.min_foreign_overlap);
  if (!failures.empty()) {
    std::string msg = "invariant structure check failed:";
    for (const auto& f : failures) msg += "\n  - " + f;
    throw StructureError(msg);
  }
  return s;
}

}  // namespace qsector
