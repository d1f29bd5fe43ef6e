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

#include <doctest.h>

#include <cmath>
#include <random>

#include "qsector/errors.hpp"
#include "qsector/invariant_structure.hpp"
#include "test_support.hpp"

using namespace qsector;
using qsector::testing::corpus;
using qsector::testing::diag2;

namespace {

CMatrix diag4(double a, double b, double c, double d) {
  CMatrix m = CMatrix::Zero(4, 4);
  m(0, 0) = a;
  m(1, 1) = b;
  m(2, 2) = c;
  m(3, 3) = d;
  return m;
}

// Plain Cesaro sums with one Richardson step: A_M = P x + B/M + O(r^M).
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

Instrument direct_sum(const Instrument& a, const Instrument& b) {
  const int da = a.dim(), db = b.dim();
  std::vector<std::vector<CMatrix>> kraus;
  for (OutcomeIndex o = 0; o < a.num_outcomes(); ++o) {
    std::vector<CMatrix> fam;
    for (const auto& k : a.kraus(o)) {
      CMatrix m = CMatrix::Zero(da + db, da + db);
      m.topLeftCorner(da, da) = k;
      fam.push_back(m);
    }
    for (const auto& k : b.kraus(o)) {
      CMatrix m = CMatrix::Zero(da + db, da + db);
      m.bottomRightCorner(db, db) = k;
      fam.push_back(m);
    }
    kraus.push_back(std::move(fam));
  }
  return Instrument(da + db, a.outcomes(), std::move(kraus));
}

}  // namespace

TEST_CASE("fixed space dimensions") {
  CHECK(fixed_space(corpus("qnd2"), Picture::heisenberg).size() == 2);
  CHECK(fixed_space(corpus("adl"), Picture::heisenberg).size() == 1);
  CHECK(fixed_space(corpus("flat2"), Picture::heisenberg).size() == 4);
  CHECK(fixed_space(corpus("composite4"), Picture::schrodinger).size() == 2);
  const Instrument id(2, {"x"}, {{CMatrix::Identity(2, 2)}});
  CHECK(fixed_space(id, Picture::schrodinger).size() == 4);
  for (const auto& h : fixed_space(corpus("qnd2"), Picture::heisenberg)) {
    CHECK(std::abs(h.matrix()(0, 1)) < 1e-12);
    CHECK(h.matrix().norm() == doctest::Approx(1.0));
  }
}

TEST_CASE("cesaro projector examples") {
  StructureOptions spectral;
  StructureOptions averaged;
  averaged.force_averaging = true;
  for (const StructureOptions& o : {spectral, averaged}) {
    const CesaroResult adl = cesaro_apply(corpus("adl"), Picture::heisenberg, diag2(1, 0), o);
    CHECK(max_abs(adl.value - CMatrix::Identity(2, 2)) < 1e-9);
    CHECK(adl.used_averaging == o.force_averaging);
    const CesaroResult q = cesaro_apply(corpus("qnd2"), Picture::schrodinger, diag2(0.5, 0.5), o);
    CHECK(max_abs(q.value - diag2(0.5, 0.5)) < (o.force_averaging ? 1e-9 : 1e-12));
    const CesaroResult id = cesaro_apply(corpus("composite4"), Picture::heisenberg,
                                         CMatrix::Identity(4, 4), o);
    CHECK(max_abs(id.value - CMatrix::Identity(4, 4)) < 1e-9);
    CHECK(id.residual < 1e-9);
  }
}

TEST_CASE("recurrent projectors") {
  CHECK(max_abs(recurrent_projector(corpus("qnd2")).matrix() - CMatrix::Identity(2, 2)) < 1e-12);
  CHECK(max_abs(recurrent_projector(corpus("adl")).matrix() - diag2(1, 0)) < 1e-9);
  CHECK(max_abs(recurrent_projector(corpus("composite4")).matrix() - diag4(1, 1, 1, 0)) < 1e-9);
}

TEST_CASE("qnd2 and orth2 structure") {
  for (const char* name : {"qnd2", "orth2"}) {
    const InvariantStructure s = compute_invariant_structure(corpus(name));
    REQUIRE(s.r() == 2);
    CHECK(max_abs(s.enclosures[0].projector.matrix() - diag2(1, 0)) < 1e-12);
    CHECK(max_abs(s.enclosures[1].projector.matrix() - diag2(0, 1)) < 1e-12);
    CHECK(max_abs(s.states[0].matrix() - diag2(1, 0)) < 1e-12);
    CHECK(max_abs(s.effects[1].matrix() - diag2(0, 1)) < 1e-12);
    CHECK(s.lambdas[0] == doctest::Approx(1.0));
  }
}

TEST_CASE("adl structure") {
  const InvariantStructure s = compute_invariant_structure(corpus("adl"));
  REQUIRE(s.r() == 1);
  CHECK(max_abs(s.states[0].matrix() - diag2(1, 0)) < 1e-9);
  CHECK(max_abs(s.effects[0].matrix() - CMatrix::Identity(2, 2)) < 1e-9);
}

TEST_CASE("flat2 enclosures form an orthonormal pair") {
  const InvariantStructure s = compute_invariant_structure(corpus("flat2"));
  REQUIRE(s.r() == 2);
  const CMatrix& p0 = s.enclosures[0].projector.matrix();
  const CMatrix& p1 = s.enclosures[1].projector.matrix();
  CHECK(max_abs(p0 * p0 - p0) < 1e-12);
  CHECK(max_abs(p0 * p1) < 1e-12);
  CHECK(max_abs(p0 + p1 - CMatrix::Identity(2, 2)) < 1e-12);
  CHECK(max_abs(s.states[0].matrix() - p0) < 1e-9);
  CHECK(max_abs(s.effects[1].matrix() - p1) < 1e-9);
}

TEST_CASE("composite4 absorption probabilities from the transient state") {
  const InvariantStructure s = compute_invariant_structure(corpus("composite4"));
  REQUIRE(s.r() == 2);
  // Rank-1 enclosure |2> first; the transient |3> is absorbed there with
  // probability 0.2 / (0.4 + 0.2).
  CHECK(max_abs(s.enclosures[0].projector.matrix() - diag4(0, 0, 1, 0)) < 1e-9);
  CHECK(max_abs(s.effects[0].matrix() - diag4(0, 0, 1, 1.0 / 3.0)) < 1e-9);
  CHECK(max_abs(s.effects[1].matrix() - diag4(1, 1, 0, 2.0 / 3.0)) < 1e-9);
  CHECK(max_abs(s.states[1].matrix() - diag4(0.5, 0.5, 0, 0)) < 1e-9);
}

TEST_CASE("structure invariants and brute-force exhaustiveness on random direct sums") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 6; ++trial) {
    const Instrument a = testing::random_instrument(1 + trial % 2, 2, rng);
    const Instrument b = testing::random_instrument(2, 2, rng);
    const Instrument instr = direct_sum(a, b);
    const InvariantStructure s = compute_invariant_structure(instr);
    CHECK(s.r() == 2);
    CHECK(s.diagnostics.effect_sum_residual < 1e-8);
    CHECK(s.diagnostics.state_fixed_residual < 1e-8);
    CHECK(s.diagnostics.lambda_spread < 1e-9);
    for (int k = 0; k < 3; ++k) {
      const CMatrix sigma = testing::random_state(instr.dim(), rng);
      const CMatrix limit = brute_cesaro(instr, sigma, 2048);
      CMatrix span = CMatrix::Zero(instr.dim(), instr.dim());
      for (std::size_t i = 0; i < s.r(); ++i) {
        span += (s.effects[i].matrix() * sigma).trace().real() * s.states[i].matrix();
      }
      CHECK(max_abs(limit - span) < 1e-6);
    }
  }
}

TEST_CASE("enclosures are invariant") {
  std::mt19937_64 rng(5);
  for (const auto& name : testing::corpus_names()) {
    const Instrument instr = corpus(name);
    const InvariantStructure s = compute_invariant_structure(instr);
    for (const auto& e : s.enclosures) {
      const CMatrix& p = e.projector.matrix();
      const CMatrix out = CMatrix::Identity(instr.dim(), instr.dim()) - p;
      for (int k = 0; k < 20; ++k) {
        const CMatrix local = testing::random_state(static_cast<int>(e.basis.cols()), rng);
        const CMatrix sigma = e.basis * local * e.basis.adjoint();
        const CMatrix image = apply_channel(instr, Picture::schrodinger, sigma);
        CHECK(max_abs(out * image * out) < 1e-9);
      }
    }
  }
}

TEST_CASE("split seed does not change the structure of unique decompositions") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
    StructureOptions o;
    o.split_seed = seed;
    const InvariantStructure s = compute_invariant_structure(corpus("composite4"), o);
    CHECK(s.r() == 2);
    CHECK(max_abs(s.effects[0].matrix() - diag4(0, 0, 1, 1.0 / 3.0)) < 1e-9);
  }
}

TEST_CASE("generic random instruments have one extreme pair") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const Instrument instr = testing::random_instrument(2 + trial % 3, 2, rng);
    const InvariantStructure s = compute_invariant_structure(instr);
    CHECK(s.r() == 1);
    CHECK(max_abs(s.effects[0].matrix() - CMatrix::Identity(instr.dim(), instr.dim())) < 1e-8);
  }
}
