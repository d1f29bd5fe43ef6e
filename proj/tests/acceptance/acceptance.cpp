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

// One PASS/FAIL line per acceptance criterion. Oracles are computed here from
// closed forms or brute force, never from the quantity under test.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qsector/analysis.hpp"
#include "qsector/errors.hpp"
#include "qsector/invariant_structure.hpp"
#include "qsector/sectors.hpp"
#include "qsector/trajectory.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace qsector;
using qsector::testing::corpus;
using qsector::testing::corpus_names;
using qsector::testing::diag2;

namespace {

// Collects the worst residual and the first failure message of a criterion.
struct Check {
  bool ok = true;
  double worst = 0.0;
  std::string first;

  void residual(double r, double tol, const std::string& what) {
    worst = std::max(worst, r);
    if (!(r <= tol)) fail(what + " residual " + std::to_string(r));
  }
  void require(bool cond, const std::string& what) {
    if (!cond) fail(what);
  }
  void fail(const std::string& what) {
    if (ok) first = what;
    ok = false;
  }
};

int failures = 0;

void report(int id, const Check& c, const std::string& detail, double seconds) {
  if (!c.ok) ++failures;
  std::printf("criterion %d: %s  %s  (%.1fs)%s%s\n", id, c.ok ? "PASS" : "FAIL", detail.c_str(),
              seconds, c.ok ? "" : "  first failure: ", c.first.c_str());
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

SectorDecomposition sectors_of(const Instrument& instr) {
  return build_sectors(instr, compute_invariant_structure(instr));
}

double real_trace(const CMatrix& m) { return m.trace().real(); }

std::vector<Word> words_up_to(std::size_t outcomes, int length) {
  std::vector<Word> out{Word{}};
  for (int l = 1; l <= length; ++l) {
    for (auto& w : all_words(outcomes, l)) out.push_back(std::move(w));
  }
  return out;
}

// tr(rho Phi_w(Id)) evaluated in the Schrodinger picture, independent of
// word_probability's Heisenberg evaluation.
double prob_schrodinger(const Instrument& instr, const CMatrix& rho, const Word& w) {
  CMatrix cur = rho;
  for (OutcomeIndex a : w) {
    CMatrix next = CMatrix::Zero(cur.rows(), cur.cols());
    for (const auto& k : instr.kraus(a)) next += k * cur * k.adjoint();
    cur = next;
  }
  return real_trace(cur);
}

// ---------------------------------------------------------------------------

void criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  Check c;
  std::mt19937_64 rng(2026);
  std::vector<Instrument> cases;
  for (const auto& n : corpus_names()) cases.push_back(corpus(n));
  std::uniform_int_distribution<int> dim(2, 4), outs(2, 4);
  for (int k = 0; k < 50; ++k) {
    const int d = dim(rng);
    cases.push_back(testing::random_instrument(d, outs(rng), rng));
  }
  for (const auto& instr : cases) {
    const int d = instr.dim();
    c.require(validate(instr).passed, "valid instrument rejected");
    // Inflating one Kraus operator by 10% breaks the channel condition.
    auto kraus = instr.kraus();
    kraus[0][0] *= 1.1;
    const Instrument scaled(d, instr.outcomes(), kraus);
    const double expected = operator_norm(apply_channel(scaled, Picture::heisenberg,
                                                        CMatrix::Identity(d, d)) -
                                          CMatrix::Identity(d, d));
    const ValidationReport bad = validate(scaled);
    c.require(!bad.passed, "scaled instrument accepted");
    c.residual(std::abs(bad.deficit - expected), 1e-12, "deficit");

    for (int trial = 0; trial < 3; ++trial) {
      const CMatrix rho = testing::random_state(d, rng);
      const CMatrix x = testing::random_hermitian(d, rng);
      for (OutcomeIndex a = 0; a < instr.num_outcomes(); ++a) {
        const Complex lhs = (apply_heisenberg(instr, a, x) * rho).trace();
        const Complex rhs = (x * apply_schrodinger(instr, a, rho)).trace();
        c.residual(std::abs(lhs - rhs), 1e-10, "duality");
      }
      const CMatrix shifted = apply_channel(instr, Picture::schrodinger, rho);
      const CMatrix id = CMatrix::Identity(d, d);
      for (const Word& w : words_up_to(instr.num_outcomes(), 3)) {
        const double p = word_probability(instr, rho, w, id);
        c.residual(std::abs(p - prob_schrodinger(instr, rho, w)), 1e-10, "picture agreement");
        c.require(p >= -1e-12, "negative word probability");
        if (w.size() == 3) continue;
        double right = 0.0, left = 0.0;
        for (OutcomeIndex b = 0; b < instr.num_outcomes(); ++b) {
          right += word_probability(instr, rho, concat(w, Word{b}), id);
          left += word_probability(instr, rho, concat(Word{b}, w), id);
        }
        c.residual(std::abs(right - p), 1e-10, "additivity");
        c.residual(std::abs(left - prob_schrodinger(instr, shifted, w)), 1e-10, "shift identity");
      }
      c.residual(std::abs(word_probability(instr, rho, Word{}, id) - 1.0), 1e-10, "empty word");
    }
  }
  report(1, c, std::to_string(cases.size()) + " instruments, max residual " + fmt("%.2e", c.worst),
         seconds_since(t0));
}

// ---------------------------------------------------------------------------

CMatrix brute_cesaro(const Instrument& instr, const CMatrix& x, long m) {
  auto average = [&](long n) {
    CMatrix acc = CMatrix::Zero(x.rows(), x.cols());
    CMatrix cur = x;
    for (long k = 0; k < n; ++k) {
      acc += cur;
      cur = apply_channel(instr, Picture::schrodinger, cur);
    }
    return CMatrix(acc / static_cast<double>(n));
  };
  return 2.0 * average(2 * m) - average(m);
}

void criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  Check c;
  double worst_brute = 0.0;
  std::mt19937_64 rng(77);
  for (const auto& name : corpus_names()) {
    const Instrument instr = corpus(name);
    const int d = instr.dim();
    const CMatrix id = CMatrix::Identity(d, d);
    const SectorDecomposition dec = sectors_of(instr);
    const InvariantStructure& s = dec.structure;
    const std::size_t r = s.r();

    CMatrix sum = CMatrix::Zero(d, d);
    CMatrix p_sum = CMatrix::Zero(d, d);
    for (std::size_t i = 0; i < r; ++i) {
      const CMatrix& rho = s.states[i].matrix();
      const CMatrix& e = s.effects[i].matrix();
      const CMatrix& p = s.enclosures[i].projector.matrix();
      sum += e;
      p_sum += p;
      c.residual(max_abs(apply_channel(instr, Picture::schrodinger, rho) - rho), 1e-8,
                 name + " state fixed point");
      c.residual(max_abs(apply_channel(instr, Picture::heisenberg, e) - e), 1e-8,
                 name + " effect fixed point");
      const CMatrix supp_e = support_projector(hermitize(e)).matrix();
      c.residual(max_abs((id - supp_e) * rho), 1e-8, name + " supp rho_i in supp E_i");
      c.residual(max_abs(support_projector(hermitize(rho)).matrix() - p), 1e-8,
                 name + " supp rho_i is the enclosure");
      const double lambda = s.lambdas[i];
      c.require(lambda > 0.0 && lambda <= 1.0 + 1e-8, name + " lambda out of range");
      c.residual(max_abs(p * e * p - lambda * p), 1e-8, name + " lambda proportionality");
      for (std::size_t j = 0; j < r; ++j) {
        if (j == i) continue;
        const CMatrix supp_ej = support_projector(hermitize(s.effects[j].matrix())).matrix();
        c.require(max_abs((id - supp_ej) * p) > 1e-6, name + " supp rho_i inside supp E_j");
      }
    }
    c.residual(max_abs(sum - id), 1e-8, name + " sum of effects");
    c.residual(max_abs(p_sum - s.recurrent_projector.matrix()), 1e-8, name + " recurrent support");

    // Exhaustiveness: the brute-force Cesaro limit of any state decomposes
    // into the extreme states on the diagonal blocks. Off-diagonal blocks
    // may be non-zero only between enclosures of one sector, where the
    // enclosure choice is not unique.
    for (int trial = 0; trial < 5; ++trial) {
      const CMatrix sigma = testing::random_state(d, rng);
      const CMatrix limit = brute_cesaro(instr, sigma, 4096);
      const CMatrix& pr = s.recurrent_projector.matrix();
      double dev = max_abs(limit - pr * limit * pr);
      for (std::size_t i = 0; i < r; ++i) {
        const CMatrix& pi = s.enclosures[i].projector.matrix();
        const double w = real_trace(s.effects[i].matrix() * sigma);
        dev = std::max(dev, max_abs(pi * limit * pi - w * s.states[i].matrix()));
        for (std::size_t j = 0; j < r; ++j) {
          if (j == i || dec.sector_of(i) == dec.sector_of(j)) continue;
          dev = std::max(dev, max_abs(pi * limit * s.enclosures[j].projector.matrix()));
        }
      }
      worst_brute = std::max(worst_brute, dev);
      c.residual(dev, 1e-6, name + " brute-force exhaustiveness");
    }
  }
  report(2, c,
         "structure residual " + fmt("%.2e", c.worst) + ", brute-force Cesaro " +
             fmt("%.2e", worst_brute),
         seconds_since(t0));
}

// ---------------------------------------------------------------------------

void criterion3() {
  const auto t0 = std::chrono::steady_clock::now();
  Check c;
  std::mt19937_64 rng(303);
  long words = 0;
  for (const auto& name : corpus_names()) {
    const Instrument instr = corpus(name);
    const SectorDecomposition dec = sectors_of(instr);
    const auto all = words_up_to(instr.num_outcomes(), 4);
    for (std::size_t i = 0; i < dec.structure.r(); ++i) {
      const DeformedInstrument di = deformed_instrument(instr, dec.structure, i);
      const int di_dim = di.local_dim();
      const ValidationReport v = validate(di.instrument, 1e-8);
      c.require(v.passed, name + " deformed instrument is not a channel");
      c.residual(v.deficit, 1e-8, name + " deformed deficit");
      c.require(fixed_space(di.instrument, Picture::schrodinger).size() == 1,
                name + " deformed fixed space is not one-dimensional");
      const CMatrix fixed = apply_channel(di.instrument, Picture::schrodinger, di.invariant_state);
      c.residual(max_abs(fixed - di.invariant_state), 1e-8, name + " deformed invariant state");
      c.require(di_dim >= 1, name + " empty deformation");

      const CMatrix& e = dec.structure.effects[i].matrix();
      for (int trial = 0; trial < 3; ++trial) {
        const CMatrix rho = testing::random_state(instr.dim(), rng);
        const double mass = real_trace(rho * e);
        if (mass < 1e-6) continue;
        for (const Word& w : all) {
          // Direct: tr(rho Phi_w(E_i)) / tr(rho E_i).
          const double direct = word_probability(instr, rho, w, e) / mass;
          c.residual(std::abs(direct - conditional_law_deformed(di, rho, w)), 1e-10,
                     name + " deformed-law identity");
          ++words;
        }
      }
      for (const Word& w : all) {
        c.residual(std::abs(extreme_law(di, w) - word_probability(instr, dec.structure.states[i].matrix(), w,
                                                                  CMatrix::Identity(instr.dim(), instr.dim()))),
                   1e-10, name + " extreme law");
      }
    }
  }
  report(3, c, std::to_string(words) + " word checks, max residual " + fmt("%.2e", c.worst),
         seconds_since(t0));
}

// ---------------------------------------------------------------------------

void criterion4() {
  const auto t0 = std::chrono::steady_clock::now();
  Check c;
  std::mt19937_64 rng(404);
  for (const auto& name : corpus_names()) {
    const Instrument instr = corpus(name);
    const SectorDecomposition dec = sectors_of(instr);
    const std::size_t ns = dec.num_sectors();
    for (int trial = 0; trial < 100; ++trial) {
      const CMatrix rho = testing::random_state(instr.dim(), rng);
      std::vector<double> q0(ns);
      for (std::size_t a = 0; a < ns; ++a) q0[a] = real_trace(dec.sector_effects[a].matrix() * rho);
      double w0 = 0.0;
      for (std::size_t a = 0; a < ns; ++a)
        for (std::size_t b = 0; b < ns; ++b)
          if (a != b) w0 += std::sqrt(q0[a] * q0[b]);
      std::vector<double> q1(ns, 0.0);
      double w1 = 0.0;
      for (OutcomeIndex o = 0; o < instr.num_outcomes(); ++o) {
        CMatrix post = CMatrix::Zero(instr.dim(), instr.dim());
        for (const auto& k : instr.kraus(o)) post += k * rho * k.adjoint();
        const double p = real_trace(post);
        if (p <= 0.0) continue;
        const auto q = q_vector(dec, post / p);
        for (std::size_t a = 0; a < ns; ++a) q1[a] += p * q[a];
        w1 += p * lyapunov_w(q);
      }
      for (std::size_t a = 0; a < ns; ++a) c.residual(std::abs(q1[a] - q0[a]), 1e-10, name + " martingale");
      c.residual(std::max(0.0, w1 - w0), 1e-10, name + " W contraction");
      c.residual(std::abs(lyapunov_w(q_vector(dec, rho)) - w0), 1e-10, name + " W value");
    }
  }
  report(4, c, "5 instruments x 100 states, max residual " + fmt("%.2e", c.worst), seconds_since(t0));
}

// ---------------------------------------------------------------------------

// Shared qnd2 run: rho0 = diag(0.4, 0.6), filter Id/2, 10^4 x 200.
struct Qnd2Run {
  Instrument instr = corpus("qnd2");
  SectorDecomposition dec = sectors_of(instr);
  EnsembleRecords records;
  double seconds = 0.0;
};

Qnd2Run& qnd2_run() {
  static Qnd2Run run = [] {
    Qnd2Run r;
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig rc;
    rc.steps = 200;
    rc.trajectories = 10000;
    rc.root_seed = 20260;
    rc.initial_state = diag2(0.4, 0.6);
    rc.filter_state = diag2(0.5, 0.5);
    rc.record_stride = 0;
    rc.keep_q_path = true;
    r.records = run_ensemble(r.instr, r.dec, rc);
    r.seconds = seconds_since(t0);
    return r;
  }();
  return run;
}

void criterion5() {
  const auto t0 = std::chrono::steady_clock::now();
  Check c;
  Qnd2Run& run = qnd2_run();
  c.require(run.records.failures == 0, "failed trajectories");
  // Sector 0 is the enclosure |0>, which carries tr(E rho0) = 0.4.
  const double expected[2] = {0.4, 0.6};
  long selected[2] = {0, 0};
  long unresolved = 0;
  for (const auto& t : run.records.trajectories) {
    if (t.q_final[0] >= 0.99) ++selected[0];
    else if (t.q_final[1] >= 0.99) ++selected[1];
    else ++unresolved;
  }
  const double m = static_cast<double>(run.records.trajectories.size());
  for (int a = 0; a < 2; ++a) {
    c.residual(std::abs(selected[a] / m - expected[a]), 0.015, "selection frequency");
  }
  c.require(unresolved / m < 0.01, "unresolved fraction");

  const BornReport born = born_rule_check(run.records, run.dec, diag2(0.4, 0.6), 0.99);
  c.require(born.passed, "born_rule_check disagrees");
  c.require(born.sectors[0].selected == selected[0] && born.sectors[1].selected == selected[1],
            "born_rule_check counts");
  report(5, c,
         "frequencies " + fmt("%.4f", selected[0] / m) + " / " + fmt("%.4f", selected[1] / m) +
             ", unresolved " + fmt("%.4f", unresolved / m),
         seconds_since(t0) + run.seconds);
}

double kl_bernoulli(double p, double q) {
  return p * std::log(p / q) + (1 - p) * std::log((1 - p) / (1 - q));
}

void criterion6() {
  const auto t0 = std::chrono::steady_clock::now();
  Check c;
  Qnd2Run& run = qnd2_run();
  const double s = kl_bernoulli(0.8, 0.3);
  double slope_sum = 0.0;
  long count = 0;
  for (const auto& t : run.records.trajectories) {
    if (t.failed || t.q_final[0] < 0.99) continue;
    std::vector<double> series;
    for (const auto& q : t.q_path) series.push_back(q[1]);
    const RateFit f = as_rate(series);
    if (f.hit_zero) continue;
    slope_sum += f.slope;
    ++count;
  }
  c.require(count > 0, "no trajectories selected sector 0");
  const double slope = count > 0 ? slope_sum / count : 0.0;
  c.residual(std::abs(slope - (-s)), 0.05, "fitted slope");

  EntropyRateOptions eo;
  const EntropyRate cross = entropy_rate(run.instr, run.dec, 0, 1, eo);
  const EntropyRate self = entropy_rate(run.instr, run.dec, 0, 0, eo);
  c.residual(std::abs(cross.mean - s), 0.05, "entropy rate");
  c.residual(std::abs(self.mean), 0.01, "self entropy rate");
  report(6, c,
         "slope " + fmt("%.4f", slope) + " over " + std::to_string(count) + " trajectories, oracle " +
             fmt("%.5f", -s) + "; s(0|1) " + fmt("%.4f", cross.mean) + ", s(0|0) " +
             fmt("%.4f", self.mean),
         seconds_since(t0));
}

// ---------------------------------------------------------------------------

// Exact standard deviation of W_n for qnd2 from diag(1/2, 1/2): outcomes are
// i.i.d. given the sector, so W_n depends only on the number k of zeros.
double qnd2_w_sd(long n) {
  double m2 = 0.0, m1 = 0.0;
  for (long k = 0; k <= n; ++k) {
    const double lc = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    const double l1 = k * std::log(0.8) + (n - k) * std::log(0.2);
    const double l2 = k * std::log(0.3) + (n - k) * std::log(0.7);
    const double lp = std::log(0.5) + std::max(l1, l2) + std::log1p(std::exp(-std::abs(l1 - l2)));
    // W = sqrt(L1 L2) / P for the sequence, weight C(n,k) P.
    const double lw = 0.5 * (l1 + l2) - lp;
    m1 += std::exp(lc + 0.5 * (l1 + l2));
    m2 += std::exp(lc + lp + 2 * lw);
  }
  return std::sqrt(std::max(0.0, m2 - m1 * m1));
}

struct DecayCase {
  std::string name;
  CMatrix rho0;
};

void criterion7() {
  const auto t0 = std::chrono::steady_clock::now();
  const Instrument q = corpus("qnd2");
  const SectorDecomposition qd = sectors_of(q);
  const double k1 = std::sqrt(0.24) + std::sqrt(0.14);

  // 7a: the mean follows W_0 k1^n exactly; W_0 = 1 from diag(1/2, 1/2).
  Check a;
  RunConfig rc;
  rc.steps = 200;
  rc.trajectories = 10000;
  rc.root_seed = 7007;
  rc.initial_state = diag2(0.5, 0.5);
  rc.record_stride = 0;
  const EnsembleRecords r = run_ensemble(q, qd, rc);
  long outside = 0, outside_exact = 0, first_outside = -1;
  for (long n = 0; n <= rc.steps; ++n) {
    const double exact = std::pow(k1, static_cast<double>(n));
    const double dev = std::abs(r.moments.mean_w(n) - exact);
    if (dev > 3 * r.moments.se_w(n) + 1e-15) {
      if (first_outside < 0) first_outside = n;
      ++outside;
    }
    if (dev > 3 * qnd2_w_sd(n) / std::sqrt(10000.0) + 1e-15) ++outside_exact;
  }
  if (outside > 0) a.fail("step " + std::to_string(first_outside) + " outside 3 sample SE");
  std::printf("criterion 7a: %s  qnd2 mean W_n vs %.5f^n, %ld of %ld steps outside 3 sample SE\n",
              a.ok ? "PASS" : "FAIL", k1, outside, rc.steps + 1);
  std::printf("  diagnostic: %ld of %ld steps outside 3 exact sigma of the sample mean\n",
              outside_exact, rc.steps + 1);

  // 7b: W_0 kappa^(n/N) + 3 SE for every corpus instrument with two or more sectors.
  Check b;
  std::string detail;
  for (const auto& name : corpus_names()) {
    const Instrument instr = corpus(name);
    const SectorDecomposition dec = sectors_of(instr);
    if (dec.num_sectors() < 2) continue;
    const HorizonResult h = identifiability_horizon(instr, dec);
    b.require(h.horizon.has_value(), name + " horizon inconclusive");
    const int horizon = h.horizon.value_or(1);
    const KappaResult kap = kappa(instr, dec, horizon);
    const int d = instr.dim();
    RunConfig cfg;
    cfg.steps = 200;
    cfg.trajectories = name == "qnd2" ? 10000 : 2000;
    cfg.root_seed = 7100;
    cfg.initial_state = CMatrix::Identity(d, d) / d;
    cfg.record_stride = 0;
    const EnsembleRecords rec = name == "qnd2" ? r : run_ensemble(instr, dec, cfg);
    const double w0 = lyapunov_w(q_vector(dec, cfg.initial_state));
    long viol = 0;
    for (long n = 0; n <= cfg.steps; ++n) {
      const double bound = w0 * std::pow(kap.value, static_cast<double>(n) / horizon) +
                           3 * rec.moments.se_w(n);
      if (rec.moments.mean_w(n) > bound * (1 + 1e-12) + 1e-300) ++viol;
    }
    const WDecayReport rep = mean_w_decay(rec.moments, w0, kap.value, horizon);
    b.require(rep.all_ok == (viol == 0), name + " mean_w_decay disagrees");
    if (viol > 0) b.fail(name + ": " + std::to_string(viol) + " steps above the bound");
    detail += name + " kappa " + fmt("%.5f", kap.value) + " N " + std::to_string(horizon) + "; ";
  }
  std::printf("criterion 7b: %s  %s\n", b.ok ? "PASS" : "FAIL", detail.c_str());

  // 7c: filter from Id/2 while the truth is diag(0.4, 0.6): C = 1.2.
  Check c;
  Qnd2Run& run = qnd2_run();
  const double constant = filter_bound_constant(diag2(0.4, 0.6), diag2(0.5, 0.5));
  c.residual(std::abs(constant - 1.2), 1e-12, "filter constant");
  long viol = 0;
  for (long n = 0; n <= run.records.steps; ++n) {
    const double bound = constant * 1.0 * std::pow(k1, static_cast<double>(n)) +
                         3 * run.records.moments.se_w_hat(n);
    if (run.records.moments.mean_w_hat(n) > bound * (1 + 1e-12) + 1e-300) ++viol;
  }
  if (viol > 0) c.fail(std::to_string(viol) + " steps above the filter bound");
  std::printf("criterion 7c: %s  filter bound with C = %.6f, %ld violations\n",
              c.ok ? "PASS" : "FAIL", constant, viol);

  Check all;
  if (!a.ok) all.fail("7a: " + a.first);
  if (!b.ok) all.fail("7b: " + b.first);
  if (!c.ok) all.fail("7c: " + c.first);
  report(7, all, "parts 7a 7b 7c above", seconds_since(t0));
}

// ---------------------------------------------------------------------------

void criterion8() {
  const auto t0 = std::chrono::steady_clock::now();
  Check c;
  Qnd2Run& run = qnd2_run();
  long agree = 0, total = 0;
  for (const auto& t : run.records.trajectories) {
    if (t.failed) continue;
    ++total;
    const auto argmax = [](const std::vector<double>& v) {
      return std::max_element(v.begin(), v.end()) - v.begin();
    };
    if (argmax(t.q_final) == argmax(t.q_hat_final)) ++agree;
  }
  const double frac = total > 0 ? static_cast<double>(agree) / total : 0.0;
  c.require(total == 10000, "trajectory count");
  c.require(frac >= 0.99, "agreement " + fmt("%.4f", frac));
  report(8, c, "argmax agreement " + fmt("%.4f", frac), seconds_since(t0));
}

// ---------------------------------------------------------------------------

void criterion9() {
  const auto t0 = std::chrono::steady_clock::now();
  Check c;
  const long n = 5000;
  long checks = 0;
  double worst_z = 0.0;
  std::uint64_t stream = 0;
  for (const auto& name : corpus_names()) {
    const Instrument instr = corpus(name);
    const SectorDecomposition dec = sectors_of(instr);
    for (std::size_t alpha = 0; alpha < dec.num_sectors(); ++alpha) {
      const CMatrix& rho = dec.structure.states[dec.representative(alpha)].matrix();
      SplitMix64 rng(mix64(9000, stream++));
      const auto seq = sample_outcomes(instr, rho, n, rng);
      std::vector<long> counts(instr.num_outcomes(), 0);
      for (OutcomeIndex o : seq) ++counts[o];
      for (OutcomeIndex o = 0; o < instr.num_outcomes(); ++o) {
        // Oracle: tr(rho_i Phi_o(Id)), by direct Kraus evaluation.
        double p = 0.0;
        for (const auto& k : instr.kraus(o)) p += real_trace(rho * k.adjoint() * k);
        const double f = static_cast<double>(counts[o]) / n;
        const double band = 3 * std::sqrt(p * (1 - p) / n);
        if (band > 0) worst_z = std::max(worst_z, 3 * std::abs(f - p) / band);
        c.residual(std::abs(f - p), band + 1e-12, name + " sector " + std::to_string(alpha));
        ++checks;
      }
    }
  }
  report(9, c, std::to_string(checks) + " letter frequencies, worst |z| " + fmt("%.2f", worst_z),
         seconds_since(t0));
}

// ---------------------------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    files[fs::relative(e.path(), dir).string()] = s.str();
  }
  return files;
}

void criterion10() {
  const auto t0 = std::chrono::steady_clock::now();
  Check c;
  const fs::path base = fs::temp_directory_path() / "qsector_acceptance_repro";
  fs::remove_all(base);
  const std::string states = std::string(QSECTOR_SOURCE_DIR) + "/corpus/states/";
  std::vector<std::map<std::string, std::string>> runs;
  for (const char* tag : {"a", "b"}) {
    const fs::path out = base / tag;
    const std::string cmd = std::string(QSECTOR_CLI) + " pipeline --instrument " +
                            testing::corpus_path("qnd2") + " --initial-state " + states +
                            "qnd2_born.json --filter-state " + states +
                            "half2.json --seed 1234 --steps 200 --trajectories 1000 --out " +
                            out.string() + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    c.require(WIFEXITED(status) && WEXITSTATUS(status) == 0, "pipeline exit status");
    runs.push_back(snapshot(out));
  }
  c.require(!runs[0].empty(), "no outputs");
  c.require(runs[0].size() == runs[1].size(), "different file sets");
  for (const auto& [file, bytes] : runs[0]) {
    const auto it = runs[1].find(file);
    c.require(it != runs[1].end() && it->second == bytes, file + " differs");
  }
  fs::remove_all(base);
  report(10, c, std::to_string(runs[0].size()) + " files compared byte for byte", seconds_since(t0));
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                    criterion5, criterion6, criterion7, criterion8,
                                                    criterion9, criterion10};
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    try {
      criteria[k]();
    } catch (const std::exception& e) {
      ++failures;
      std::printf("criterion %zu: FAIL  exception: %s\n", k + 1, e.what());
    }
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
