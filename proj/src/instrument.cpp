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

#include "qsector/instrument.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "qsector/errors.hpp"

namespace qsector {

Word concat(const Word& a, const Word& b) {
  Word out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

Instrument::Instrument(int dim, std::vector<std::string> outcomes,
                       std::vector<std::vector<CMatrix>> kraus)
    : dim_(dim), outcomes_(std::move(outcomes)), kraus_(std::move(kraus)) {
  std::vector<std::string> problems;
  if (dim_ <= 0) problems.push_back("dim must be positive");
  if (outcomes_.empty()) problems.push_back("outcome list is empty");
  std::set<std::string> seen;
  for (const auto& label : outcomes_) {
    if (!seen.insert(label).second) problems.push_back("duplicate outcome '" + label + "'");
  }
  if (kraus_.size() != outcomes_.size()) {
    std::ostringstream os;
    os << outcomes_.size() << " outcomes but " << kraus_.size() << " Kraus families";
    problems.push_back(os.str());
  }
  for (std::size_t a = 0; a < kraus_.size(); ++a) {
    const std::string name = a < outcomes_.size() ? outcomes_[a] : std::to_string(a);
    if (kraus_[a].empty()) problems.push_back("outcome '" + name + "' has no Kraus operators");
    for (std::size_t k = 0; k < kraus_[a].size(); ++k) {
      const CMatrix& m = kraus_[a][k];
      if (m.rows() != dim_ || m.cols() != dim_) {
        std::ostringstream os;
        os << "Kraus operator " << k << " of outcome '" << name << "' is " << m.rows()
           << "x" << m.cols() << ", expected " << dim_ << "x" << dim_;
        problems.push_back(os.str());
      } else if (!m.allFinite()) {
        std::ostringstream os;
        os << "Kraus operator " << k << " of outcome '" << name << "' has non-finite entries";
        problems.push_back(os.str());
      }
    }
  }
  if (!problems.empty()) {
    std::string msg = "malformed instrument:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw StructureError(msg);
  }
}

void Instrument::check_outcome(OutcomeIndex a) const {
  if (a >= outcomes_.size()) {
    throw UnknownOutcomeError("unknown outcome index " + std::to_string(a));
  }
}

const std::string& Instrument::label(OutcomeIndex a) const {
  check_outcome(a);
  return outcomes_[a];
}

const std::vector<CMatrix>& Instrument::kraus(OutcomeIndex a) const {
  check_outcome(a);
  return kraus_[a];
}

OutcomeIndex Instrument::outcome_index(std::string_view label) const {
  const auto it = std::find(outcomes_.begin(), outcomes_.end(), label);
  if (it == outcomes_.end()) {
    throw UnknownOutcomeError("unknown outcome label '" + std::string(label) + "'");
  }
  return static_cast<OutcomeIndex>(it - outcomes_.begin());
}

Word Instrument::parse_word(const std::vector<std::string>& labels) const {
  Word w;
  w.reserve(labels.size());
  for (const auto& l : labels) w.push_back(outcome_index(l));
  return w;
}

State::State(const CMatrix& rho, double tol) : rho_(hermitize(rho)) {
  if (!rho.allFinite()) throw InputError("state has non-finite entries");
  if (max_abs(rho - rho.adjoint()) > tol) throw InputError("state is not Hermitian");
  if (std::abs(rho_.trace() - 1.0) > 1e-10) {
    std::ostringstream os;
    os.precision(17);
    os << "state trace is " << rho_.trace() << ", expected 1";
    throw InputError(os.str());
  }
  const EigenDecomposition eig = eig_hermitian(rho_);
  if (eig.values(eig.values.size() - 1) < -tol) throw InputError("state is not PSD");
}

State State::chaotic(int dim) {
  return State(CMatrix::Identity(dim, dim) / static_cast<double>(dim));
}

State State::pure(const CVector& psi) {
  const CVector n = psi / psi.norm();
  return State(n * n.adjoint());
}

Effect::Effect(const CMatrix& e, double tol) : e_(hermitize(e)) {
  if (!e.allFinite()) throw InputError("effect has non-finite entries");
  const EigenDecomposition eig = eig_hermitian(e_);
  if (eig.values(eig.values.size() - 1) < -tol || eig.values(0) > 1.0 + tol) {
    throw InputError("effect is not between 0 and Id");
  }
}

Effect Effect::identity(int dim) { return Effect(CMatrix::Identity(dim, dim)); }

ValidationReport validate(const Instrument& instr, double tol_channel) {
  ValidationReport report;
  report.tolerance = tol_channel;
  const int d = instr.dim();
  CMatrix total = CMatrix::Zero(d, d);
  for (OutcomeIndex a = 0; a < instr.num_outcomes(); ++a) {
    CMatrix part = CMatrix::Zero(d, d);
    for (const auto& k : instr.kraus(a)) part += k.adjoint() * k;
    total += part;
    const EigenDecomposition eig = eig_hermitian(hermitize(part));
    OutcomeWeight w;
    w.label = instr.label(a);
    w.max_eigenvalue = eig.values(0);
    w.min_eigenvalue = eig.values(d - 1);
    w.excess = std::max(0.0, w.max_eigenvalue - 1.0);
    report.per_outcome.push_back(w);
  }
  report.deficit = operator_norm(total - CMatrix::Identity(d, d));
  report.passed = report.deficit <= tol_channel;
  return report;
}

void require_valid(const Instrument& instr, double tol_channel) {
  const ValidationReport r = validate(instr, tol_channel);
  if (!r.passed) {
    std::ostringstream os;
    os.precision(6);
    os << "instrument is not a channel: ||sum K^dagger K - Id|| = " << r.deficit
       << " exceeds " << tol_channel;
    throw ValidationError(os.str());
  }
}

CMatrix apply_heisenberg(const Instrument& instr, OutcomeIndex a, const CMatrix& x) {
  CMatrix out = CMatrix::Zero(instr.dim(), instr.dim());
  for (const auto& k : instr.kraus(a)) out.noalias() += k.adjoint() * x * k;
  return out;
}

CMatrix apply_schrodinger(const Instrument& instr, OutcomeIndex a, const CMatrix& rho) {
  CMatrix out = CMatrix::Zero(instr.dim(), instr.dim());
  for (const auto& k : instr.kraus(a)) out.noalias() += k * rho * k.adjoint();
  return out;
}

CMatrix apply_channel(const Instrument& instr, Picture picture, const CMatrix& x) {
  CMatrix out = CMatrix::Zero(instr.dim(), instr.dim());
  for (OutcomeIndex a = 0; a < instr.num_outcomes(); ++a) {
    out += picture == Picture::heisenberg ? apply_heisenberg(instr, a, x)
                                          : apply_schrodinger(instr, a, x);
  }
  return out;
}

CMatrix heisenberg_word(const Instrument& instr, const Word& word, const CMatrix& x) {
  CMatrix out = x;
  for (auto it = word.rbegin(); it != word.rend(); ++it) out = apply_heisenberg(instr, *it, out);
  return out;
}

CMatrix schrodinger_word(const Instrument& instr, const Word& word, const CMatrix& rho) {
  CMatrix out = rho;
  for (OutcomeIndex a : word) out = apply_schrodinger(instr, a, out);
  return out;
}

CMatrix superoperator_matrix(const Instrument& instr, OutcomeIndex a, Picture picture) {
  const int d = instr.dim();
  CMatrix s = CMatrix::Zero(d * d, d * d);
  for (const auto& k : instr.kraus(a)) {
    // K^dagger X K -> (K^T kron K^dagger);  K X K^dagger -> (conj(K) kron K).
    if (picture == Picture::heisenberg) {
      s += kron(k.transpose(), k.adjoint());
    } else {
      s += kron(k.conjugate(), k);
    }
  }
  return s;
}

CMatrix superoperator_matrix(const Instrument& instr, Picture picture) {
  const int d = instr.dim();
  CMatrix s = CMatrix::Zero(d * d, d * d);
  for (OutcomeIndex a = 0; a < instr.num_outcomes(); ++a) {
    s += superoperator_matrix(instr, a, picture);
  }
  return s;
}

double word_probability(const Instrument& instr, const CMatrix& rho, const Word& word,
                        const CMatrix& effect) {
  return (rho * heisenberg_word(instr, word, effect)).trace().real();
}

double word_probability(const Instrument& instr, const State& rho, const Word& word,
                        const Effect& effect) {
  if (rho.dim() != instr.dim() || effect.dim() != instr.dim()) {
    throw DimensionError("word_probability: dimension mismatch");
  }
  return word_probability(instr, rho.matrix(), word, effect.matrix());
}

double word_probability(const Instrument& instr, const State& rho, const Word& word) {
  return word_probability(instr, rho, word, Effect::identity(instr.dim()));
}

Instrument restrict_instrument(const Instrument& instr, const CMatrix& isometry) {
  if (isometry.rows() != instr.dim()) {
    throw DimensionError("restrict_instrument: isometry has wrong row count");
  }
  std::vector<std::vector<CMatrix>> kraus;
  for (OutcomeIndex a = 0; a < instr.num_outcomes(); ++a) {
    std::vector<CMatrix> family;
    for (const auto& k : instr.kraus(a)) family.push_back(isometry.adjoint() * k * isometry);
    kraus.push_back(std::move(family));
  }
  return Instrument(static_cast<int>(isometry.cols()), instr.outcomes(), std::move(kraus));
}

}  // namespace qsector
