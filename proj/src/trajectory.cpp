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

#include "qsector/trajectory.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "qsector/errors.hpp"

namespace qsector {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr long kBlock = 64;

double real_trace_product(const CMatrix& a, const CMatrix& b) {
  return (a.transpose().cwiseProduct(b)).sum().real();
}

double log_sum_exp(const std::vector<double>& x) {
  double top = -std::numeric_limits<double>::infinity();
  for (double v : x) top = std::max(top, v);
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double v : x) acc += std::exp(v - top);
  return top + std::log(acc);
}

}  // namespace

std::uint64_t splitmix64_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t mix64(std::uint64_t root_seed, std::uint64_t t) {
  return splitmix64_finalize(root_seed ^ (t * kGolden));
}

std::uint64_t SplitMix64::next() {
  state_ += kGolden;
  return splitmix64_finalize(state_);
}

double SplitMix64::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::uint64_t fnv1a_step(std::uint64_t hash, OutcomeIndex a) {
  std::uint64_t v = static_cast<std::uint64_t>(a);
  for (int b = 0; b < 8; ++b) {
    hash ^= (v >> (8 * b)) & 0xffU;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

void LogLawTracker::add_component(const DeformedInstrument* law, const CMatrix& local_state,
                                  double weight) {
  laws_.push_back(law);
  states_.push_back(local_state);
  log_mass_.push_back(weight > 0.0 ? std::log(weight) : -std::numeric_limits<double>::infinity());
}

void LogLawTracker::update(OutcomeIndex a) {
  for (std::size_t k = 0; k < laws_.size(); ++k) {
    if (!std::isfinite(log_mass_[k])) continue;
    CMatrix next = apply_schrodinger(laws_[k]->instrument, a, states_[k]);
    const double p = next.trace().real();
    if (!(p > 0.0)) {
      log_mass_[k] = -std::numeric_limits<double>::infinity();
      continue;
    }
    log_mass_[k] += std::log(p);
    states_[k] = next / p;
  }
}

double LogLawTracker::value() const {
  if (laws_.empty()) return -std::numeric_limits<double>::infinity();
  return log_sum_exp(log_mass_);
}

LogLawTracker conditional_tracker(const SectorDecomposition& decomp, const CMatrix& rho,
                                  std::size_t alpha) {
  const double tol_cond = decomp.options.tol_cond;
  const double total = real_trace_product(rho, decomp.sector_effects.at(alpha).matrix());
  if (!(total > tol_cond)) {
    std::ostringstream os;
    os << "P_{rho," << alpha << "} undefined: tr(rho E_alpha) = " << total;
    throw NumericalError(os.str());
  }
  LogLawTracker tracker;
  for (std::size_t i : decomp.partition[alpha]) {
    const double m = real_trace_product(rho, decomp.structure.effects[i].matrix());
    if (!(m > tol_cond)) continue;
    const DeformedInstrument& d = decomp.deformed[i];
    tracker.add_component(&d, d.deform_state(rho, tol_cond), m / total);
  }
  return tracker;
}

LogLawTracker sector_tracker(const SectorDecomposition& decomp, std::size_t alpha) {
  LogLawTracker tracker;
  const DeformedInstrument& d = decomp.deformed.at(decomp.representative(alpha));
  tracker.add_component(&d, d.invariant_state, 1.0);
  return tracker;
}

std::vector<double> q_vector(const SectorDecomposition& decomp, const CMatrix& rho) {
  std::vector<double> q(decomp.num_sectors());
  for (std::size_t alpha = 0; alpha < q.size(); ++alpha) {
    q[alpha] = std::clamp(real_trace_product(rho, decomp.sector_effects[alpha].matrix()), 0.0, 1.0);
  }
  return q;
}

double lyapunov_w(const std::vector<double>& q) {
  double w = 0.0;
  for (std::size_t a = 0; a < q.size(); ++a) {
    for (std::size_t b = 0; b < q.size(); ++b) {
      if (a != b) w += std::sqrt(q[a] * q[b]);
    }
  }
  return w;
}

TrajectoryState initial_trajectory_state(const SectorDecomposition& decomp, const CMatrix& rho0,
                                         const std::optional<CMatrix>& filter_state) {
  TrajectoryState s;
  s.rho = rho0;
  s.q = q_vector(decomp, rho0);
  s.w = lyapunov_w(s.q);
  if (filter_state) {
    s.rho_hat = *filter_state;
    s.q_hat = q_vector(decomp, *filter_state);
    s.w_hat = lyapunov_w(s.q_hat);
  }
  const Eigen::Index dim = rho0.rows();
  const CMatrix chaotic = CMatrix::Identity(dim, dim) / static_cast<double>(dim);
  for (std::size_t alpha = 0; alpha < decomp.num_sectors(); ++alpha) {
    s.trackers_ch.push_back(conditional_tracker(decomp, chaotic, alpha));
    s.trackers_sec.push_back(sector_tracker(decomp, alpha));
  }
  s.loglik_ch.assign(decomp.num_sectors(), 0.0);
  s.loglik_sec.assign(decomp.num_sectors(), 0.0);
  return s;
}

namespace {

// Returns the sampled outcome and its unnormalized post-measurement state.
OutcomeIndex sample_outcome(const Instrument& instr, const CMatrix& rho, SplitMix64& rng,
                            const StepOptions& opts, CMatrix& post, double& p_out) {
  const std::size_t m = instr.num_outcomes();
  std::vector<CMatrix> posts(m);
  std::vector<double> p(m);
  double total = 0.0;
  for (OutcomeIndex a = 0; a < m; ++a) {
    posts[a] = apply_schrodinger(instr, a, rho);
    p[a] = posts[a].trace().real();
    if (p[a] < opts.p_floor) p[a] = 0.0;
    total += p[a];
  }
  if (!(total >= instr.dim() * opts.p_floor)) {
    std::ostringstream os;
    os.precision(17);
    os << "numerical collapse: admissible outcome mass " << total << " below "
       << instr.dim() * opts.p_floor << "; probabilities";
    for (OutcomeIndex a = 0; a < m; ++a) os << ' ' << instr.label(a) << '=' << posts[a].trace().real();
    throw NumericalError(os.str());
  }
  const double u = rng.uniform() * total;
  double acc = 0.0;
  OutcomeIndex chosen = m;
  for (OutcomeIndex a = 0; a < m; ++a) {
    if (p[a] == 0.0) continue;
    acc += p[a];
    chosen = a;
    if (u < acc) break;
  }
  post = std::move(posts[chosen]);
  p_out = p[chosen];
  return chosen;
}

CMatrix renormalized(const CMatrix& post, double tol_supp) {
  return clip_and_normalize(hermitize(post), tol_supp).matrix();
}

}  // namespace

void step(const Instrument& instr, const SectorDecomposition& decomp, TrajectoryState& state,
          SplitMix64& rng, const StepOptions& opts) {
  CMatrix post;
  double p = 0.0;
  const OutcomeIndex a = sample_outcome(instr, state.rho, rng, opts, post, p);
  state.rho = renormalized(post, opts.tol_supp);
  state.q = q_vector(decomp, state.rho);
  state.w = lyapunov_w(state.q);
  state.loglik_true += std::log(p);
  if (state.rho_hat) {
    const CMatrix post_hat = apply_schrodinger(instr, a, *state.rho_hat);
    if (!(post_hat.trace().real() > 0.0)) {
      throw NumericalError("filter assigns zero mass to an observed outcome");
    }
    state.rho_hat = renormalized(post_hat, opts.tol_supp);
    state.q_hat = q_vector(decomp, *state.rho_hat);
    state.w_hat = lyapunov_w(state.q_hat);
  }
  for (std::size_t alpha = 0; alpha < state.trackers_ch.size(); ++alpha) {
    state.trackers_ch[alpha].update(a);
    state.trackers_sec[alpha].update(a);
    state.loglik_ch[alpha] = state.trackers_ch[alpha].value();
    state.loglik_sec[alpha] = state.trackers_sec[alpha].value();
  }
  state.hash = fnv1a_step(state.hash, a);
  state.outcome = static_cast<long>(a);
  ++state.step;
}

std::vector<OutcomeIndex> sample_outcomes(const Instrument& instr, const CMatrix& rho, long n,
                                          SplitMix64& rng, const StepOptions& opts) {
  std::vector<OutcomeIndex> out;
  out.reserve(static_cast<std::size_t>(std::max(n, 0L)));
  CMatrix state = rho;
  for (long k = 0; k < n; ++k) {
    CMatrix post;
    double p = 0.0;
    out.push_back(sample_outcome(instr, state, rng, opts, post, p));
    state = renormalized(post, opts.tol_supp);
  }
  return out;
}

void StepMoments::resize(long steps, std::size_t sectors) {
  const auto n = static_cast<std::size_t>(steps + 1);
  count.assign(n, 0);
  w_mean.assign(n, 0.0);
  w_m2.assign(n, 0.0);
  w_hat_mean.assign(n, 0.0);
  w_hat_m2.assign(n, 0.0);
  q_sum.assign(n, std::vector<double>(sectors, 0.0));
}

namespace {

// Welford update of (mean, m2) with the sample x; c counts x.
void welford(double& mean, double& m2, long c, double x) {
  const double delta = x - mean;
  mean += delta / static_cast<double>(c);
  m2 += delta * (x - mean);
}

// Pairwise combination of two (count, mean, m2) summaries.
void combine(double& mean, double& m2, long na, double mean_b, double m2_b, long nb) {
  if (nb == 0) return;
  if (na == 0) {
    mean = mean_b;
    m2 = m2_b;
    return;
  }
  const double n = static_cast<double>(na + nb);
  const double delta = mean_b - mean;
  mean += delta * static_cast<double>(nb) / n;
  m2 += m2_b + delta * delta * static_cast<double>(na) * static_cast<double>(nb) / n;
}

double mean_of(double mean, long count) {
  return count > 0 ? mean : std::numeric_limits<double>::quiet_NaN();
}

double se_of(double m2, long count) {
  if (count < 2) return std::numeric_limits<double>::quiet_NaN();
  const double c = static_cast<double>(count);
  return std::sqrt(std::max(0.0, m2) / (c - 1.0) / c);
}

}  // namespace

void StepMoments::add(long n, double w, double w_hat, const std::vector<double>& q) {
  const auto k = static_cast<std::size_t>(n);
  const long c = ++count.at(k);
  welford(w_mean[k], w_m2[k], c, w);
  welford(w_hat_mean[k], w_hat_m2[k], c, w_hat);
  for (std::size_t a = 0; a < q.size(); ++a) q_sum[k][a] += q[a];
}

void StepMoments::merge(const StepMoments& other) {
  for (std::size_t n = 0; n < count.size(); ++n) {
    const long na = count[n], nb = other.count[n];
    combine(w_mean[n], w_m2[n], na, other.w_mean[n], other.w_m2[n], nb);
    combine(w_hat_mean[n], w_hat_m2[n], na, other.w_hat_mean[n], other.w_hat_m2[n], nb);
    count[n] = na + nb;
    for (std::size_t a = 0; a < q_sum[n].size(); ++a) q_sum[n][a] += other.q_sum[n][a];
  }
}

double StepMoments::mean_w(long n) const { return mean_of(w_mean.at(n), count.at(n)); }
double StepMoments::se_w(long n) const { return se_of(w_m2.at(n), count.at(n)); }
double StepMoments::mean_w_hat(long n) const { return mean_of(w_hat_mean.at(n), count.at(n)); }
double StepMoments::se_w_hat(long n) const { return se_of(w_hat_m2.at(n), count.at(n)); }

namespace {

struct BlockResult {
  std::vector<RecordRow> rows;
  std::vector<TrajectorySummary> summaries;
  StepMoments moments;
};

RecordRow make_row(long traj, const TrajectoryState& s) {
  return RecordRow{traj,   s.step,        s.outcome,     s.q,         s.q_hat, s.w,
                   s.w_hat, s.loglik_true, s.loglik_ch, s.loglik_sec};
}

void accumulate(StepMoments& m, const TrajectoryState& s) {
  m.add(s.step, s.w, s.w_hat, s.q);
}

BlockResult run_block(const Instrument& instr, const SectorDecomposition& decomp,
                      const RunConfig& config, long first, long last) {
  BlockResult block;
  block.moments.resize(config.steps, decomp.num_sectors());
  for (long t = first; t < last; ++t) {
    SplitMix64 rng(mix64(config.root_seed, static_cast<std::uint64_t>(t)));
    TrajectorySummary summary;
    summary.traj = t;
    TrajectoryState s = initial_trajectory_state(decomp, config.initial_state, config.filter_state);
    auto observe = [&]() {
      accumulate(block.moments, s);
      if (config.record_stride > 0 && (s.step % config.record_stride == 0 || s.step == config.steps)) {
        block.rows.push_back(make_row(t, s));
      }
      if (config.keep_q_path) summary.q_path.push_back(s.q);
    };
    observe();
    try {
      while (s.step < config.steps) {
        step(instr, decomp, s, rng, config.step);
        if (config.keep_outcomes) summary.outcomes.push_back(static_cast<OutcomeIndex>(s.outcome));
        observe();
      }
    } catch (const Error& e) {
      summary.failed = true;
      summary.failure = e.what();
    }
    summary.steps_done = s.step;
    summary.hash = s.hash;
    summary.q_final = s.q;
    summary.q_hat_final = s.q_hat;
    block.summaries.push_back(std::move(summary));
  }
  return block;
}

}  // namespace

EnsembleRecords run_ensemble(const Instrument& instr, const SectorDecomposition& decomp,
                             const RunConfig& config) {
  if (config.steps < 0 || config.trajectories < 0) {
    throw InputError("run_ensemble: steps and trajectories must be non-negative");
  }
  if (config.initial_state.rows() != instr.dim() || config.initial_state.cols() != instr.dim()) {
    throw DimensionError("run_ensemble: initial state dimension does not match the instrument");
  }
  if (config.filter_state) {
    if (config.filter_state->rows() != instr.dim() || config.filter_state->cols() != instr.dim()) {
      throw DimensionError("run_ensemble: filter state dimension does not match the instrument");
    }
    const double lo = eig_hermitian(hermitize(*config.filter_state)).values.minCoeff();
    if (!(lo > config.step.tol_supp)) {
      std::ostringstream os;
      os << "filter state must be positive definite; smallest eigenvalue " << lo;
      throw InputError(os.str());
    }
  }

  // Surfaces setup errors here rather than inside worker threads.
  (void)initial_trajectory_state(decomp, config.initial_state, config.filter_state);

  EnsembleRecords out;
  out.num_sectors = decomp.num_sectors();
  out.has_filter = config.filter_state.has_value();
  out.steps = config.steps;
  out.moments.resize(config.steps, decomp.num_sectors());

  const long blocks = (config.trajectories + kBlock - 1) / kBlock;
  std::vector<BlockResult> results(static_cast<std::size_t>(blocks));
  std::atomic<long> next{0};
  auto worker = [&]() {
    for (long b = next++; b < blocks; b = next++) {
      const long first = b * kBlock;
      const long last = std::min(config.trajectories, first + kBlock);
      results[static_cast<std::size_t>(b)] = run_block(instr, decomp, config, first, last);
    }
  };
  int threads = config.threads > 0 ? config.threads
                                   : static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
  threads = static_cast<int>(std::min<long>(threads, std::max(1L, blocks)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (auto& block : results) {
    out.moments.merge(block.moments);
    for (auto& row : block.rows) out.rows.push_back(std::move(row));
    for (auto& summary : block.summaries) {
      if (summary.failed) ++out.failures;
      out.trajectories.push_back(std::move(summary));
    }
  }
  return out;
}

}  // namespace qsector
