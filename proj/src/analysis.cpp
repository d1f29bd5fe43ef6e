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

#include "qsector/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qsector/errors.hpp"

namespace qsector {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct LineFit {
  double slope = 0.0;
  double std_error = 0.0;
};

// Ordinary least squares of y against x; residual standard error of the slope.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const auto m = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
  }
  LineFit fit;
  fit.slope = sxy / sxx;
  if (x.size() > 2) {
    double ssr = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double r = y[k] - my - fit.slope * (x[k] - mx);
      ssr += r * r;
    }
    fit.std_error = std::sqrt(ssr / (m - 2.0) / sxx);
  }
  return fit;
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

const FrequencyEntry* FrequencyTable::find(const Word& word) const {
  for (const auto& e : entries) {
    if (e.word == word) return &e;
  }
  return nullptr;
}

FrequencyTable empirical_frequencies(const std::vector<OutcomeIndex>& sequence,
                                     const std::vector<Word>& words) {
  FrequencyTable table;
  table.n = static_cast<long>(sequence.size());
  for (const Word& w : words) {
    if (w.empty() || w.size() > sequence.size()) {
      throw InputError("empirical_frequencies: word length must be in [1, sequence length]");
    }
    FrequencyEntry e;
    e.word = w;
    e.n_effective = table.n - static_cast<long>(w.size()) + 1;
    for (std::size_t start = 0; start + w.size() <= sequence.size(); ++start) {
      if (std::equal(w.begin(), w.end(), sequence.begin() + static_cast<long>(start))) ++e.count;
    }
    e.frequency = static_cast<double>(e.count) / static_cast<double>(e.n_effective);
    table.entries.push_back(std::move(e));
  }
  return table;
}

std::vector<Word> classification_words(const Instrument& instr, const SectorDecomposition& decomp) {
  std::vector<Word> words;
  for (OutcomeIndex a = 0; a < instr.num_outcomes(); ++a) words.push_back(Word{a});
  for (const auto& pc : decomp.comparisons) {
    if (pc.result.equal || decomp.sector_of(pc.i) == decomp.sector_of(pc.j)) continue;
    if (std::find(words.begin(), words.end(), pc.result.witness) == words.end()) {
      words.push_back(pc.result.witness);
    }
  }
  return words;
}

std::optional<std::size_t> classify_trajectory(const FrequencyTable& table,
                                               const SectorDecomposition& decomp,
                                               double tol_class) {
  if (decomp.num_sectors() == 1) return std::size_t{0};
  std::vector<std::size_t> candidates;
  std::vector<double> deviation(decomp.num_sectors(), 0.0);
  for (std::size_t alpha = 0; alpha < decomp.num_sectors(); ++alpha) {
    for (const auto& e : table.entries) {
      deviation[alpha] = std::max(deviation[alpha], std::abs(e.frequency - sector_law(decomp, alpha, e.word)));
    }
    if (deviation[alpha] < tol_class) candidates.push_back(alpha);
  }
  if (candidates.empty()) return std::nullopt;
  if (candidates.size() > 1) {
    std::ostringstream os;
    os << "ambiguous classification: sectors " << candidates[0] << " (deviation "
       << deviation[candidates[0]] << ") and " << candidates[1] << " (deviation "
       << deviation[candidates[1]] << ") are both within " << tol_class;
    throw AmbiguityError(os.str());
  }
  return candidates.front();
}

RateFit as_rate(const std::vector<double>& q_series, std::optional<long> burn_in) {
  std::vector<long> steps(q_series.size());
  for (std::size_t n = 0; n < steps.size(); ++n) steps[n] = static_cast<long>(n);
  return as_rate(steps, q_series, burn_in);
}

RateFit as_rate(const std::vector<long>& steps, const std::vector<double>& q_series,
                std::optional<long> burn_in) {
  if (steps.size() != q_series.size()) throw InputError("as_rate: steps and series differ in length");
  RateFit fit;
  std::size_t usable = q_series.size();
  for (std::size_t k = 0; k < q_series.size(); ++k) {
    if (!(q_series[k] >= std::numeric_limits<double>::min())) {
      fit.hit_zero = true;
      fit.zero_step = steps[k];
      usable = k;
      break;
    }
  }
  const long last_step = usable > 0 ? steps[usable - 1] : -1;
  fit.burn_in = burn_in ? *burn_in : std::max(0L, last_step) / 10;
  if (fit.burn_in < 0) throw InputError("as_rate: negative burn-in");
  std::vector<double> x, y;
  for (std::size_t k = 0; k < usable; ++k) {
    if (steps[k] < fit.burn_in) continue;
    x.push_back(static_cast<double>(steps[k]));
    y.push_back(std::log(q_series[k]));
  }
  fit.first = x.empty() ? fit.burn_in : static_cast<long>(x.front());
  fit.last = x.empty() ? last_step : static_cast<long>(x.back());
  if (x.size() < 2) {
    if (!fit.hit_zero) throw InputError("as_rate: fewer than two points after burn-in");
    fit.slope = -kInf;
    fit.std_error = 0.0;
    return fit;
  }
  const LineFit line = fit_line(x, y);
  fit.slope = line.slope;
  fit.std_error = line.std_error;
  return fit;
}

EntropyRate entropy_rate(const Instrument& instr, const SectorDecomposition& decomp,
                         std::size_t gamma, std::size_t alpha, const EntropyRateOptions& opts) {
  if (gamma >= decomp.num_sectors() || alpha >= decomp.num_sectors()) {
    throw InputError("entropy_rate: sector index out of range");
  }
  if (opts.steps < 1 || opts.trajectories < 1) {
    throw InputError("entropy_rate: steps and trajectories must be positive");
  }
  const DeformedInstrument& source = decomp.deformed[decomp.representative(gamma)];
  const Eigen::Index dim = instr.dim();
  const CMatrix chaotic = CMatrix::Identity(dim, dim) / static_cast<double>(dim);

  EntropyRate out;
  out.trajectories = opts.trajectories;
  double sum = 0.0, sq = 0.0;
  for (long t = 0; t < opts.trajectories; ++t) {
    SplitMix64 rng(mix64(opts.seed, static_cast<std::uint64_t>(t)));
    const auto outcomes =
        sample_outcomes(source.instrument, source.invariant_state, opts.steps, rng, opts.step);
    LogLawTracker reference = conditional_tracker(decomp, chaotic, alpha);
    LogLawTracker truth = sector_tracker(decomp, gamma);
    bool infinite = false;
    for (long k = 0; k < opts.steps; ++k) {
      reference.update(outcomes[static_cast<std::size_t>(k)]);
      truth.update(outcomes[static_cast<std::size_t>(k)]);
      if (reference.value() == -kInf) {
        infinite = true;
        if (out.truncation_step < 0 || k + 1 < out.truncation_step) out.truncation_step = k + 1;
        break;
      }
    }
    if (infinite) {
      ++out.infinite;
      continue;
    }
    const double s = -(reference.value() - truth.value()) / static_cast<double>(opts.steps);
    sum += s;
    sq += s * s;
  }
  if (out.infinite > 0) {
    out.mean = kInf;
    out.std_error = 0.0;
    return out;
  }
  const auto m = static_cast<double>(opts.trajectories);
  out.mean = sum / m;
  out.std_error = m > 1 ? std::sqrt(std::max(0.0, (sq - m * out.mean * out.mean) / (m - 1.0)) / m) : 0.0;
  return out;
}

WDecayReport mean_w_decay(const StepMoments& moments, double w0, double kappa_value, int horizon,
                          double constant, bool filter) {
  if (horizon < 1) throw InputError("mean_w_decay: N must be positive");
  WDecayReport report;
  report.w0 = w0;
  report.kappa = kappa_value;
  report.horizon = horizon;
  report.gamma = std::pow(kappa_value, 1.0 / horizon);
  report.constant = constant;
  std::vector<double> x, y;
  for (std::size_t n = 0; n < moments.count.size(); ++n) {
    if (moments.count[n] == 0) continue;
    const long step = static_cast<long>(n);
    WDecayPoint p;
    p.n = step;
    p.mean = filter ? moments.mean_w_hat(step) : moments.mean_w(step);
    p.se = filter ? moments.se_w_hat(step) : moments.se_w(step);
    if (!std::isfinite(p.se)) p.se = 0.0;
    const double curve = constant * w0 * std::pow(report.gamma, static_cast<double>(step));
    p.bound = curve + 3.0 * p.se;
    // Relative slack covers summation rounding when every trajectory agrees.
    p.ok = p.mean <= p.bound * (1.0 + 1e-12) + 1e-300;
    if (!p.ok) ++report.violations;
    if (!report.truncated) {
      if (p.mean >= std::numeric_limits<double>::min()) {
        x.push_back(static_cast<double>(step));
        y.push_back(std::log(p.mean));
      } else {
        report.truncated = true;
      }
    }
    report.points.push_back(p);
  }
  report.all_ok = report.violations == 0;
  report.fit_points = static_cast<long>(x.size());
  report.fitted_slope = x.size() >= 2 ? fit_line(x, y).slope : 0.0;
  return report;
}

double filter_bound_constant(const CMatrix& rho, const CMatrix& rho_hat) {
  const CMatrix inv_sqrt = psd_power(hermitize(rho_hat), -0.5).matrix();
  return operator_norm(inv_sqrt * rho * inv_sqrt);
}

BornReport born_rule_check(const EnsembleRecords& records, const SectorDecomposition& decomp,
                           const CMatrix& rho0, double threshold) {
  BornReport report;
  report.threshold = threshold;
  const std::vector<double> expected = q_vector(decomp, rho0);
  report.sectors.resize(decomp.num_sectors());
  long agree = 0;
  for (const auto& t : records.trajectories) {
    if (t.failed) continue;
    ++report.trajectories;
    bool resolved = false;
    for (std::size_t alpha = 0; alpha < t.q_final.size(); ++alpha) {
      if (t.q_final[alpha] > threshold) {
        ++report.sectors[alpha].selected;
        resolved = true;
      }
    }
    if (!resolved) ++report.unresolved;
    if (records.has_filter && argmax(t.q_final) == argmax(t.q_hat_final)) ++agree;
  }
  const auto m = static_cast<double>(report.trajectories);
  for (std::size_t alpha = 0; alpha < report.sectors.size(); ++alpha) {
    BornSector& s = report.sectors[alpha];
    s.expected = expected[alpha];
    s.fraction = m > 0 ? static_cast<double>(s.selected) / m : 0.0;
    s.band = m > 0 ? 3.0 * std::sqrt(s.expected * (1.0 - s.expected) / m) : 0.0;
    s.within = std::abs(s.fraction - s.expected) <= s.band + 1e-12;
    report.passed = report.passed && s.within;
  }
  report.unresolved_fraction = m > 0 ? static_cast<double>(report.unresolved) / m : 0.0;
  if (records.has_filter && m > 0) report.filter_agreement = static_cast<double>(agree) / m;
  return report;
}

}  // namespace qsector
