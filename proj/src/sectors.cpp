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

#include "qsector/sectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "qsector/errors.hpp"

namespace qsector {

namespace {

double real_trace_product(const CMatrix& a, const CMatrix& b) {
  // tr(AB) for Hermitian A, B without forming the product.
  return (a.transpose().cwiseProduct(b)).sum().real();
}

std::size_t count_words(std::size_t num_outcomes, int max_length, std::size_t cap) {
  std::size_t total = 0;
  std::size_t level = 1;
  for (int l = 1; l <= max_length; ++l) {
    if (level > cap / std::max<std::size_t>(num_outcomes, 1)) return cap + 1;
    level *= num_outcomes;
    total += level;
    if (total > cap) return cap + 1;
  }
  return total;
}

Word decode_word(std::size_t index, std::size_t num_outcomes, int length) {
  Word w(static_cast<std::size_t>(length));
  for (int k = length - 1; k >= 0; --k) {
    w[static_cast<std::size_t>(k)] = index % num_outcomes;
    index /= num_outcomes;
  }
  return w;
}

CVector haar_vector(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  CVector v(n);
  for (Eigen::Index k = 0; k < n; ++k) v(k) = Complex(normal(rng), normal(rng));
  return v / v.norm();
}

}  // namespace

CMatrix DeformedInstrument::deform_state(const CMatrix& rho, double tol_cond) const {
  const CMatrix squeezed = sqrt_effect * rho * sqrt_effect;
  const double mass = squeezed.trace().real();
  if (!(mass > tol_cond)) {
    std::ostringstream os;
    os << "conditioning on effect " << index << " is undefined: tr(rho E) = " << mass;
    throw NumericalError(os.str());
  }
  return basis.adjoint() * squeezed * basis / mass;
}

DeformedInstrument deformed_instrument(const Instrument& instr,
                                       const InvariantStructure& structure, std::size_t i,
                                       const SectorOptions& opts) {
  if (i >= structure.r()) throw InputError("deformed_instrument: index out of range");
  const HermitianMatrix& e = structure.effects[i].hermitian();
  const CMatrix sqrt_e = psd_power(e, 0.5, opts.tol_supp).matrix();
  const CMatrix inv_sqrt_e = psd_power(e, -0.5, opts.tol_supp).matrix();
  const CMatrix v = support_basis(e, opts.tol_supp);

  std::vector<std::vector<CMatrix>> kraus;
  for (OutcomeIndex a = 0; a < instr.num_outcomes(); ++a) {
    std::vector<CMatrix> family;
    for (const auto& k : instr.kraus(a)) family.push_back(v.adjoint() * sqrt_e * k * inv_sqrt_e * v);
    kraus.push_back(std::move(family));
  }
  Instrument local(static_cast<int>(v.cols()), instr.outcomes(), std::move(kraus));
  const ValidationReport report = validate(local, opts.tol_channel);
  if (!report.passed) {
    std::ostringstream os;
    os << "deformed instrument " << i << " is not a channel (deficit " << report.deficit << ")";
    throw StructureError(os.str());
  }
  const auto fixed = fixed_space(local, Picture::schrodinger, opts.tol_null);
  if (fixed.size() != 1) {
    std::ostringstream os;
    os << "deformed instrument " << i << " has " << fixed.size()
       << " independent invariant states, expected 1";
    throw StructureError(os.str());
  }
  CMatrix local_state = v.adjoint() * structure.states[i].matrix() * v;
  local_state /= local_state.trace().real();
  return DeformedInstrument{i, std::move(local), v, sqrt_e, inv_sqrt_e,
                            hermitize(local_state).matrix()};
}

double conditional_law(const Instrument& instr, const InvariantStructure& structure,
                       const CMatrix& rho, std::size_t i, const Word& word, double tol_cond) {
  const CMatrix& e = structure.effects.at(i).matrix();
  const double mass = real_trace_product(rho, e);
  if (!(mass > tol_cond)) {
    std::ostringstream os;
    os << "conditional law " << i << " undefined: tr(rho E_i) = " << mass;
    throw NumericalError(os.str());
  }
  return real_trace_product(rho, heisenberg_word(instr, word, e)) / mass;
}

double conditional_law_deformed(const DeformedInstrument& deformed, const CMatrix& rho,
                                const Word& word, double tol_cond) {
  const CMatrix local = deformed.deform_state(rho, tol_cond);
  return schrodinger_word(deformed.instrument, word, local).trace().real();
}

double extreme_law(const DeformedInstrument& deformed, const Word& word) {
  return schrodinger_word(deformed.instrument, word, deformed.invariant_state).trace().real();
}

LawComparison compare_laws(const DeformedInstrument& di, const DeformedInstrument& dj,
                           int l_eq, double tol_law, std::size_t word_budget) {
  const std::size_t m = di.instrument.num_outcomes();
  if (count_words(m, l_eq, word_budget) > word_budget) {
    std::ostringstream os;
    os << "law comparison up to length " << l_eq << " over " << m
       << " outcomes exceeds the word budget " << word_budget << "; lower --l-eq explicitly";
    throw InputError(os.str());
  }
  LawComparison out;
  out.horizon = l_eq;
  struct Node {
    std::size_t index;
    CMatrix first;
    CMatrix second;
  };
  std::vector<Node> level{{0, di.invariant_state, dj.invariant_state}};
  for (int length = 1; length <= l_eq && !level.empty(); ++length) {
    std::vector<Node> next;
    next.reserve(level.size() * m);
    for (const Node& node : level) {
      for (OutcomeIndex a = 0; a < m; ++a) {
        CMatrix s1 = apply_schrodinger(di.instrument, a, node.first);
        CMatrix s2 = apply_schrodinger(dj.instrument, a, node.second);
        const double p1 = s1.trace().real();
        const double p2 = s2.trace().real();
        const double gap = std::abs(p1 - p2);
        const std::size_t index = node.index * m + a;
        if (gap > tol_law) {
          out.equal = false;
          out.witness = decode_word(index, m, length);
          out.gap = gap;
          out.p_first = p1;
          out.p_second = p2;
          return out;
        }
        out.gap = std::max(out.gap, gap);
        // Extensions of a word cannot differ by more than its larger mass.
        if (std::max(p1, p2) > tol_law) next.push_back({index, std::move(s1), std::move(s2)});
      }
    }
    level = std::move(next);
  }
  return out;
}

bool laws_equal(const Instrument& instr, const InvariantStructure& structure, std::size_t i,
                std::size_t j, const SectorOptions& opts) {
  if (i == j) return true;
  const DeformedInstrument di = deformed_instrument(instr, structure, i, opts);
  const DeformedInstrument dj = deformed_instrument(instr, structure, j, opts);
  const int l_eq = opts.l_eq > 0 ? opts.l_eq
                                 : di.local_dim() * di.local_dim() + dj.local_dim() * dj.local_dim();
  return compare_laws(di, dj, l_eq, opts.tol_law, opts.word_budget).equal;
}

std::size_t SectorDecomposition::sector_of(std::size_t i) const {
  for (std::size_t alpha = 0; alpha < partition.size(); ++alpha) {
    if (std::find(partition[alpha].begin(), partition[alpha].end(), i) != partition[alpha].end()) {
      return alpha;
    }
  }
  throw InputError("sector_of: index " + std::to_string(i) + " not in partition");
}

SectorDecomposition build_sectors(const Instrument& instr, InvariantStructure structure,
                                  const SectorOptions& opts) {
  SectorDecomposition d;
  d.options = opts;
  const std::size_t r = structure.r();
  for (std::size_t i = 0; i < r; ++i) d.deformed.push_back(deformed_instrument(instr, structure, i, opts));

  std::vector<std::size_t> parent(r);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<std::vector<char>> equal(r, std::vector<char>(r, 1));
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = i + 1; j < r; ++j) {
      const int di = d.deformed[i].local_dim();
      const int dj = d.deformed[j].local_dim();
      const int l_eq = opts.l_eq > 0 ? opts.l_eq : di * di + dj * dj;
      PairComparison pc{i, j, compare_laws(d.deformed[i], d.deformed[j], l_eq, opts.tol_law,
                                           opts.word_budget)};
      equal[i][j] = equal[j][i] = pc.result.equal ? 1 : 0;
      if (pc.result.equal) {
        const std::size_t a = find(i), b = find(j);
        parent[std::max(a, b)] = std::min(a, b);
      }
      d.comparisons.push_back(std::move(pc));
    }
  }

  // Transitive closure must agree with the pairwise tests.
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = i + 1; j < r; ++j) {
      if (find(i) != find(j) || equal[i][j]) continue;
      const auto it = std::find_if(d.comparisons.begin(), d.comparisons.end(),
                                   [&](const PairComparison& pc) { return pc.i == i && pc.j == j; });
      std::size_t k = i;
      for (std::size_t c = 0; c < r; ++c) {
        if (c != i && c != j && equal[i][c] && equal[c][j]) k = c;
      }
      std::ostringstream os;
      os.precision(17);
      os << "intransitive law equivalence: " << i << " ~ " << k << " ~ " << j << " but "
         << i << " !~ " << j << "; witness probabilities P_" << i << " = " << it->result.p_first
         << ", P_" << k << " = " << extreme_law(d.deformed[k], it->result.witness) << ", P_" << j
         << " = " << it->result.p_second;
      throw StructureError(os.str());
    }
  }

  std::vector<long> class_of_root(r, -1);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t root = find(i);
    if (class_of_root[root] < 0) {
      class_of_root[root] = static_cast<long>(d.partition.size());
      d.partition.emplace_back();
    }
    d.partition[static_cast<std::size_t>(class_of_root[root])].push_back(i);
  }
  const int dim = instr.dim();
  for (const auto& alpha : d.partition) {
    CMatrix e = CMatrix::Zero(dim, dim);
    for (std::size_t i : alpha) e += structure.effects[i].matrix();
    d.sector_effects.emplace_back(e);
  }
  d.structure = std::move(structure);
  return d;
}

double sector_law(const SectorDecomposition& decomp, std::size_t alpha, const Word& word) {
  return extreme_law(decomp.deformed.at(decomp.representative(alpha)), word);
}

double sector_conditional_law(const Instrument& instr, const SectorDecomposition& decomp,
                              const CMatrix& rho, std::size_t alpha, const Word& word) {
  const double tol_cond = decomp.options.tol_cond;
  const double mass = real_trace_product(rho, decomp.sector_effects.at(alpha).matrix());
  if (!(mass > tol_cond)) {
    std::ostringstream os;
    os << "sector conditional law " << alpha << " undefined: tr(rho E_alpha) = " << mass;
    throw NumericalError(os.str());
  }
  double acc = 0.0;
  for (std::size_t i : decomp.partition[alpha]) {
    const double w = real_trace_product(rho, decomp.structure.effects[i].matrix());
    if (w > tol_cond) acc += w * conditional_law(instr, decomp.structure, rho, i, word, tol_cond);
  }
  return acc / mass;
}

std::vector<Word> all_words(std::size_t num_outcomes, int length) {
  std::size_t total = 1;
  for (int k = 0; k < length; ++k) total *= num_outcomes;
  std::vector<Word> out;
  out.reserve(total);
  for (std::size_t idx = 0; idx < total; ++idx) out.push_back(decode_word(idx, num_outcomes, length));
  return out;
}

std::vector<CMatrix> heisenberg_ladder(const Instrument& instr, const CMatrix& x, int length) {
  std::vector<CMatrix> level{x};
  const std::size_t m = instr.num_outcomes();
  std::size_t block = 1;
  for (int l = 1; l <= length; ++l) {
    // Prepending a: index(a w) = a * |A|^(l-1) + index(w).
    std::vector<CMatrix> next(level.size() * m);
    for (OutcomeIndex a = 0; a < m; ++a) {
      for (std::size_t w = 0; w < level.size(); ++w) next[a * block + w] = apply_heisenberg(instr, a, level[w]);
    }
    block *= m;
    level = std::move(next);
  }
  return level;
}

HorizonResult identifiability_horizon(const Instrument& instr,
                                      const SectorDecomposition& decomp,
                                      const HorizonOptions& opts) {
  const std::size_t ns = decomp.num_sectors();
  if (ns < 2) throw InputError("identifiability_horizon requires at least two sectors");
  std::mt19937_64 rng(opts.seed);

  // Search ensemble per sector: extreme states, Haar-random pure states and
  // the maximally mixed state on supp E_alpha.
  std::vector<std::vector<CMatrix>> ensemble(ns);
  for (std::size_t alpha = 0; alpha < ns; ++alpha) {
    for (std::size_t i : decomp.partition[alpha]) ensemble[alpha].push_back(decomp.structure.states[i].matrix());
    const CMatrix v = support_basis(decomp.sector_effects[alpha].hermitian(), decomp.options.tol_supp);
    for (int s = 0; s < opts.samples; ++s) {
      const CVector psi = v * haar_vector(v.cols(), rng);
      ensemble[alpha].push_back(psi * psi.adjoint());
    }
    ensemble[alpha].push_back(v * v.adjoint() / static_cast<double>(v.cols()));
  }

  HorizonResult out;
  for (const auto& e : ensemble) out.ensemble_size += static_cast<int>(e.size());
  const std::size_t m = instr.num_outcomes();
  for (int n = 1; n <= opts.n_max; ++n) {
    std::size_t words = 1;
    bool over = false;
    for (int k = 0; k < n && !over; ++k) {
      words *= m;
      over = words > opts.word_budget;
    }
    if (over) break;
    // laws[alpha][state] = vector of P_{rho,alpha}(a) over a in A^n
    std::vector<std::vector<Eigen::VectorXd>> laws(ns);
    for (std::size_t alpha = 0; alpha < ns; ++alpha) {
      const CMatrix& e = decomp.sector_effects[alpha].matrix();
      const std::vector<CMatrix> ladder = heisenberg_ladder(instr, e, n);
      for (const CMatrix& rho : ensemble[alpha]) {
        const double mass = real_trace_product(rho, e);
        Eigen::VectorXd p(static_cast<Eigen::Index>(ladder.size()));
        for (std::size_t w = 0; w < ladder.size(); ++w) {
          p(static_cast<Eigen::Index>(w)) = real_trace_product(rho, ladder[w]) / mass;
        }
        laws[alpha].push_back(std::move(p));
      }
    }
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t alpha = 0; alpha < ns; ++alpha) {
      for (std::size_t beta = alpha + 1; beta < ns; ++beta) {
        for (const auto& pa : laws[alpha]) {
          for (const auto& pb : laws[beta]) {
            min_gap = std::min(min_gap, (pa - pb).cwiseAbs().maxCoeff());
          }
        }
      }
    }
    out.min_gaps.push_back(min_gap);
    if (min_gap > opts.tol_law) {
      out.horizon = n;
      break;
    }
  }
  return out;
}

namespace {

struct KappaObjective {
  std::vector<CMatrix> ladder_a;
  std::vector<CMatrix> ladder_b;
  CMatrix effect_a;
  CMatrix effect_b;
  double tol_cond;
  long evaluations = 0;

  double operator()(const CMatrix& rho) {
    ++evaluations;
    const double ma = real_trace_product(rho, effect_a);
    const double mb = real_trace_product(rho, effect_b);
    if (!(ma > tol_cond) || !(mb > tol_cond)) return -1.0;
    double acc = 0.0;
    for (std::size_t w = 0; w < ladder_a.size(); ++w) {
      const double pa = std::max(0.0, real_trace_product(rho, ladder_a[w]));
      const double pb = std::max(0.0, real_trace_product(rho, ladder_b[w]));
      acc += std::sqrt(pa * pb);
    }
    return acc / std::sqrt(ma * mb);
  }
};

CMatrix state_from_params(const Eigen::VectorXd& x, Eigen::Index dim) {
  CMatrix a(dim, dim);
  for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = Complex(x(2 * k), x(2 * k + 1));
  CMatrix rho = a * a.adjoint();
  return hermitize(rho / rho.trace().real()).matrix();
}

Eigen::VectorXd params_from_state(const CMatrix& rho) {
  const CMatrix a = psd_power(hermitize(rho), 0.5, 0.0).matrix();
  Eigen::VectorXd x(2 * a.size());
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    x(2 * k) = a.data()[k].real();
    x(2 * k + 1) = a.data()[k].imag();
  }
  return x / x.norm();
}

}  // namespace

double bhattacharyya(const Instrument& instr, const SectorDecomposition& decomp,
                     const CMatrix& rho, std::size_t alpha, std::size_t beta, int length,
                     double tol_cond) {
  const CMatrix& ea = decomp.sector_effects.at(alpha).matrix();
  const CMatrix& eb = decomp.sector_effects.at(beta).matrix();
  KappaObjective f{heisenberg_ladder(instr, ea, length), heisenberg_ladder(instr, eb, length), ea,
                   eb, tol_cond};
  return f(rho);
}

KappaResult kappa(const Instrument& instr, const SectorDecomposition& decomp, int horizon,
                  const KappaOptions& opts) {
  const std::size_t ns = decomp.num_sectors();
  if (ns < 2) throw InputError("kappa requires at least two sectors");
  if (horizon < 1) throw InputError("kappa requires N >= 1");
  std::size_t words = 1;
  for (int k = 0; k < horizon; ++k) {
    words *= instr.num_outcomes();
    if (words > opts.word_budget) {
      throw InputError("kappa: |A|^N exceeds the word budget; N = " + std::to_string(horizon));
    }
  }
  const Eigen::Index dim = instr.dim();
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  KappaResult best;
  best.value = -1.0;
  for (std::size_t alpha = 0; alpha < ns; ++alpha) {
    for (std::size_t beta = alpha + 1; beta < ns; ++beta) {
      const CMatrix& ea = decomp.sector_effects[alpha].matrix();
      const CMatrix& eb = decomp.sector_effects[beta].matrix();
      KappaObjective f{heisenberg_ladder(instr, ea, horizon), heisenberg_ladder(instr, eb, horizon),
                       ea, eb, opts.tol_cond};

      std::vector<CMatrix> starts;
      for (std::size_t i : decomp.partition[alpha]) {
        for (std::size_t j : decomp.partition[beta]) {
          starts.push_back(0.5 * (decomp.structure.states[i].matrix() + decomp.structure.states[j].matrix()));
        }
      }
      const CMatrix va = support_basis(decomp.sector_effects[alpha].hermitian(), decomp.options.tol_supp);
      const CMatrix vb = support_basis(decomp.sector_effects[beta].hermitian(), decomp.options.tol_supp);
      starts.push_back(0.5 * (va * va.adjoint() / static_cast<double>(va.cols()) +
                              vb * vb.adjoint() / static_cast<double>(vb.cols())));
      starts.push_back(CMatrix::Identity(dim, dim) / static_cast<double>(dim));
      for (int s = 0; s < opts.restarts; ++s) {
        Eigen::VectorXd x(2 * dim * dim);
        for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = normal(rng);
        starts.push_back(state_from_params(x, dim));
      }

      for (const CMatrix& start : starts) {
        ++best.starts;
        Eigen::VectorXd x = params_from_state(start);
        double fx = f(state_from_params(x, dim));
        double step = opts.initial_step;
        for (int sweep = 0; sweep < opts.max_sweeps && step > opts.min_step; ++sweep) {
          bool improved = false;
          for (Eigen::Index c = 0; c < x.size(); ++c) {
            for (double sign : {1.0, -1.0}) {
              Eigen::VectorXd trial = x;
              trial(c) += sign * step;
              const double norm = trial.norm();
              if (norm < 1e-12) continue;
              trial /= norm;
              const double ft = f(state_from_params(trial, dim));
              if (ft > fx + 1e-15) {
                x = std::move(trial);
                fx = ft;
                improved = true;
                break;
              }
            }
          }
          if (!improved) step *= 0.5;
        }
        if (fx > best.value) {
          best.value = fx;
          best.argmax = state_from_params(x, dim);
          best.alpha = alpha;
          best.beta = beta;
        }
      }
      best.evaluations += f.evaluations;
    }
  }
  best.value = std::max(best.value, 0.0);
  best.below_one = best.value < 1.0 - opts.tol_gap;
  return best;
}

}  // namespace qsector
