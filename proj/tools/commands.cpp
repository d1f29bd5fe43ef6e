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

#include "commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "qsector/analysis.hpp"
#include "qsector/errors.hpp"
#include "qsector/instrument.hpp"
#include "qsector/invariant_structure.hpp"
#include "qsector/io.hpp"
#include "qsector/sectors.hpp"
#include "qsector/trajectory.hpp"

namespace qsector::cli {

namespace {

namespace fs = std::filesystem;

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = kFnvOffset;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string file_digest(const std::string& path) {
  if (path.empty()) return "";
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return hex64(fnv1a(ss.str()));
}

std::string out_path(const CliConfig& c, const std::string& name) {
  return (fs::path(c.out) / name).string();
}

void require_out(const CliConfig& c) {
  if (c.out.empty()) throw InputError("--out is required for '" + c.command + "'");
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec) throw InputError("cannot create output directory '" + c.out + "': " + ec.message());
}

Json tolerances_json(const CliConfig& c) {
  return Json{{"tol_channel", c.tol_channel}, {"tol_supp", c.tol_supp},
              {"tol_null", c.tol_null},       {"tol_fix", c.tol_fix},
              {"tol_gap", c.tol_gap},         {"tol_law", c.tol_law},
              {"tol_cond", c.tol_cond},       {"tol_class", c.tol_class},
              {"p_floor", c.p_floor},         {"l_eq", c.l_eq},
              {"word_budget", c.word_budget}, {"n_max", c.n_max}};
}

// Paths are deliberately excluded so that outputs depend on content only.
Json config_json(const CliConfig& c) {
  return Json{{"instrument_digest", file_digest(c.instrument)},
              {"initial_state_digest", file_digest(c.initial_state)},
              {"filter_state_digest", file_digest(c.filter_state)},
              {"seed", c.seed},
              {"steps", c.steps},
              {"trajectories", c.trajectories},
              {"record_stride", c.record_stride},
              {"kappa_restarts", c.kappa_restarts},
              {"threshold", c.threshold},
              {"rate_steps", c.rate_steps},
              {"rate_trajectories", c.rate_trajectories},
              {"lln_steps", c.lln_steps},
              {"tolerances", tolerances_json(c)}};
}

void write_metadata(const CliConfig& c) {
  const Json config = config_json(c);
  Json meta{{"tool", "qsector"},
            {"version", kToolVersion},
            {"command", c.command},
            {"seed", c.seed},
            {"config_hash", hex64(fnv1a(config.dump()))},
            {"config", config}};
  write_json_file(out_path(c, "metadata.json"), meta);
}

StructureOptions structure_options(const CliConfig& c) {
  StructureOptions o;
  o.tol_supp = c.tol_supp;
  o.tol_null = c.tol_null;
  o.tol_fix = c.tol_fix;
  o.tol_gap = c.tol_gap;
  return o;
}

SectorOptions sector_options(const CliConfig& c) {
  SectorOptions o;
  o.tol_supp = c.tol_supp;
  o.tol_null = c.tol_null;
  o.tol_law = c.tol_law;
  o.tol_cond = c.tol_cond;
  o.l_eq = c.l_eq;
  o.word_budget = c.word_budget;
  return o;
}

StepOptions step_options(const CliConfig& c) {
  StepOptions o;
  o.p_floor = c.p_floor;
  o.tol_supp = c.tol_supp;
  return o;
}

struct Decomposed {
  Instrument instr;
  SectorDecomposition decomp;
  std::optional<HorizonResult> horizon;
  std::optional<KappaResult> kappa;
};

Decomposed decompose(const CliConfig& c, bool with_kappa) {
  Instrument instr = load_instrument(c.instrument);
  require_valid(instr, c.tol_channel);
  InvariantStructure s = compute_invariant_structure(instr, structure_options(c));
  SectorDecomposition d = build_sectors(instr, std::move(s), sector_options(c));
  Decomposed out{std::move(instr), std::move(d), std::nullopt, std::nullopt};
  if (with_kappa && out.decomp.num_sectors() >= 2) {
    HorizonOptions ho;
    ho.n_max = c.n_max;
    ho.tol_law = c.tol_law;
    out.horizon = identifiability_horizon(out.instr, out.decomp, ho);
    if (out.horizon->horizon) {
      KappaOptions ko;
      ko.restarts = c.kappa_restarts;
      ko.tol_cond = c.tol_cond;
      out.kappa = kappa(out.instr, out.decomp, *out.horizon->horizon, ko);
    }
  }
  return out;
}

CMatrix initial_state(const CliConfig& c, int dim) {
  if (c.initial_state.empty()) return CMatrix::Identity(dim, dim) / static_cast<double>(dim);
  return load_state(c.initial_state, dim);
}

std::optional<CMatrix> filter_state(const CliConfig& c, int dim) {
  if (c.filter_state.empty()) return std::nullopt;
  return load_state(c.filter_state, dim);
}

std::string fmt(double x) { return format_double(x); }

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InputError*>(&e)) return 1;
  if (dynamic_cast<const ValidationError*>(&e)) return 2;
  if (dynamic_cast<const StructureError*>(&e)) return 2;
  if (dynamic_cast<const AmbiguityError*>(&e)) return 2;
  if (dynamic_cast<const NumericalError*>(&e)) return 3;
  return 3;
}

int cmd_validate(const CliConfig& c, std::ostream& log) {
  const Instrument instr = load_instrument(c.instrument);
  const ValidationReport report = validate(instr, c.tol_channel);
  Json j = validation_to_json(report);
  if (!c.out.empty()) {
    require_out(c);
    write_json_file(out_path(c, "validation.json"), j);
  }
  log << "validate: " << (report.passed ? "pass" : "FAIL") << " deficit " << fmt(report.deficit)
      << " tolerance " << fmt(report.tolerance) << '\n';
  return report.passed ? 0 : 2;
}

int cmd_decompose(const CliConfig& c, std::ostream& log) {
  require_out(c);
  const Decomposed d = decompose(c, true);
  Json structure = structure_to_json(d.decomp.structure);
  structure["tolerances"] = tolerances_json(c);
  write_json_file(out_path(c, "structure.json"), structure);
  Json sectors = sectors_to_json(d.instr, d.decomp);
  sectors["identifiability"] = d.horizon ? horizon_to_json(*d.horizon) : Json(nullptr);
  sectors["kappa"] = d.kappa ? kappa_to_json(*d.kappa) : Json(nullptr);
  write_json_file(out_path(c, "sectors.json"), sectors);
  log << "decompose: " << d.decomp.structure.r() << " minimal enclosures, "
      << d.decomp.num_sectors() << " sectors";
  if (d.horizon) {
    log << ", N = " << (d.horizon->horizon ? std::to_string(*d.horizon->horizon) : "inconclusive");
  }
  if (d.kappa) log << ", kappa = " << fmt(d.kappa->value);
  log << '\n';
  return 0;
}

int cmd_simulate(const CliConfig& c, std::ostream& log) {
  require_out(c);
  const Decomposed d = decompose(c, false);
  RunConfig rc;
  rc.steps = c.steps;
  rc.trajectories = c.trajectories;
  rc.root_seed = c.seed;
  rc.initial_state = initial_state(c, d.instr.dim());
  rc.filter_state = filter_state(c, d.instr.dim());
  rc.record_stride = c.record_stride;
  rc.step = step_options(c);
  rc.threads = c.threads;
  const EnsembleRecords records = run_ensemble(d.instr, d.decomp, rc);
  {
    std::ofstream csv(out_path(c, "records.csv"), std::ios::binary);
    if (!csv) throw InputError("cannot write records.csv");
    write_records_csv(csv, records, d.instr);
  }
  Json summary = summary_to_json(records);
  summary["tolerances"] = tolerances_json(c);
  write_json_file(out_path(c, "summary.json"), summary);
  write_metadata(c);
  log << "simulate: " << c.trajectories << " trajectories x " << c.steps << " steps, "
      << records.failures << " failed\n";
  return (c.trajectories > 0 && records.failures == c.trajectories) ? 3 : 0;
}

int cmd_analyze(const CliConfig& c, std::ostream& log) {
  require_out(c);
  const Decomposed d = decompose(c, true);
  const std::size_t ns = d.decomp.num_sectors();
  std::ifstream csv(out_path(c, "records.csv"), std::ios::binary);
  if (!csv) throw InputError("analyze: no records.csv in '" + c.out + "'; run simulate first");
  const EnsembleRecords records = read_records_csv(csv);
  if (records.num_sectors != ns) {
    throw InputError("analyze: records have " + std::to_string(records.num_sectors) +
                     " sectors, the instrument has " + std::to_string(ns));
  }
  const CMatrix rho0 = initial_state(c, d.instr.dim());
  const std::optional<CMatrix> rho_hat = filter_state(c, d.instr.dim());

  Json report;
  report["tolerances"] = tolerances_json(c);
  report["num_sectors"] = ns;
  const BornReport born = born_rule_check(records, d.decomp, rho0, c.threshold);
  report["born"] = born_to_json(born);
  log << "analyze: born";
  for (const auto& s : born.sectors) log << ' ' << fmt(s.fraction) << " (expected " << fmt(s.expected) << ')';
  log << ", unresolved " << fmt(born.unresolved_fraction) << '\n';
  if (born.filter_agreement) log << "analyze: filter agreement " << fmt(*born.filter_agreement) << '\n';

  // Plot-ready per-trajectory ln Q series.
  {
    std::ostringstream lnq;
    lnq << "traj,step";
    for (std::size_t a = 0; a < ns; ++a) lnq << ",lnQ_" << a;
    lnq << '\n';
    for (const auto& r : records.rows) {
      lnq << r.traj << ',' << r.step;
      for (double q : r.q) lnq << ',' << fmt(std::log(q));
      lnq << '\n';
    }
    write_text_file(out_path(c, "lnq.csv"), lnq.str());
  }

  if (ns < 2) {
    report["rates"] = Json::object({{"note", "single sector: Q is identically 1, no decay to fit"}});
    report["w_decay"] = nullptr;
  } else {
    // Almost-sure rates, averaged over trajectories that selected gamma.
    Json rates = Json::array();
    std::map<long, std::vector<const RecordRow*>> by_traj;
    for (const auto& r : records.rows) by_traj[r.traj].push_back(&r);
    for (std::size_t gamma = 0; gamma < ns; ++gamma) {
      for (std::size_t alpha = 0; alpha < ns; ++alpha) {
        if (alpha == gamma) continue;
        double sum = 0.0, sq = 0.0;
        long finite = 0, zero = 0;
        for (const auto& t : records.trajectories) {
          if (t.failed || !(t.q_final[gamma] > c.threshold)) continue;
          std::vector<long> steps;
          std::vector<double> q;
          for (const RecordRow* r : by_traj[t.traj]) {
            steps.push_back(r->step);
            q.push_back(r->q[alpha]);
          }
          if (steps.size() < 2) continue;
          RateFit f;
          try {
            f = as_rate(steps, q);
          } catch (const InputError&) {
            continue;
          }
          if (f.hit_zero) ++zero;
          if (std::isfinite(f.slope)) {
            sum += f.slope;
            sq += f.slope * f.slope;
            ++finite;
          }
        }
        const double m = static_cast<double>(finite);
        const double mean = finite > 0 ? sum / m : std::numeric_limits<double>::quiet_NaN();
        const double se = finite > 1 ? std::sqrt(std::max(0.0, (sq - m * mean * mean) / (m - 1.0)) / m)
                                     : std::numeric_limits<double>::quiet_NaN();
        EntropyRateOptions eo;
        eo.steps = c.rate_steps;
        eo.trajectories = c.rate_trajectories;
        eo.seed = mix64(c.seed, 0x7261746500000000ULL + gamma * ns + alpha);
        eo.step = step_options(c);
        const EntropyRate er = entropy_rate(d.instr, d.decomp, gamma, alpha, eo);
        rates.push_back({{"selected", gamma},
                         {"decaying", alpha},
                         {"trajectories_fitted", finite},
                         {"hit_zero", zero},
                         {"mean_slope", mean},
                         {"slope_se", se},
                         {"entropy_rate", entropy_rate_to_json(er)}});
        log << "analyze: rate Q(" << alpha << ") | selected " << gamma << ": slope " << fmt(mean)
            << ", s_hat " << fmt(er.mean) << '\n';
      }
    }
    Json diag = Json::array();
    for (std::size_t gamma = 0; gamma < ns; ++gamma) {
      EntropyRateOptions eo;
      eo.steps = c.rate_steps;
      eo.trajectories = c.rate_trajectories;
      eo.seed = mix64(c.seed, 0x7261746500000000ULL + gamma * ns + gamma);
      eo.step = step_options(c);
      diag.push_back(entropy_rate_to_json(entropy_rate(d.instr, d.decomp, gamma, gamma, eo)));
    }
    report["rates"] = Json{{"pairs", std::move(rates)}, {"self_entropy_rates", std::move(diag)}};

    if (d.kappa) {
      const int n = *d.horizon->horizon;
      const double w0 = lyapunov_w(q_vector(d.decomp, rho0));
      const WDecayReport w = mean_w_decay(records.moments, w0, d.kappa->value, n);
      Json wj = w_decay_to_json(w, false);
      std::ostringstream wcsv;
      wcsv << "n,mean_W,se_W,bound_W";
      std::optional<WDecayReport> wf;
      if (rho_hat) {
        const double constant = filter_bound_constant(rho0, *rho_hat);
        wf = mean_w_decay(records.moments, lyapunov_w(q_vector(d.decomp, *rho_hat)), d.kappa->value, n,
                          constant, true);
        wj["filter"] = w_decay_to_json(*wf, false);
        wcsv << ",mean_What,se_What,bound_What";
      }
      wcsv << '\n';
      for (std::size_t k = 0; k < w.points.size(); ++k) {
        const auto& p = w.points[k];
        wcsv << p.n << ',' << fmt(p.mean) << ',' << fmt(p.se) << ',' << fmt(p.bound);
        if (wf) {
          const auto& q = wf->points[k];
          wcsv << ',' << fmt(q.mean) << ',' << fmt(q.se) << ',' << fmt(q.bound);
        }
        wcsv << '\n';
      }
      write_text_file(out_path(c, "w_decay.csv"), wcsv.str());
      report["w_decay"] = std::move(wj);
      log << "analyze: mean W bound " << (w.all_ok ? "holds" : "VIOLATED") << " (gamma "
          << fmt(w.gamma) << ", fitted slope " << fmt(w.fitted_slope) << ")\n";
    } else {
      report["w_decay"] = Json{{"note", "identifiability horizon not found within n_max"}};
    }
  }

  // Frequencies and classification under each sector law.
  Json freq = Json::array();
  const std::vector<Word> words = classification_words(d.instr, d.decomp);
  for (std::size_t alpha = 0; alpha < ns; ++alpha) {
    const DeformedInstrument& src = d.decomp.deformed[d.decomp.representative(alpha)];
    SplitMix64 rng(mix64(c.seed, 0x6c6c6e0000000000ULL + alpha));
    const auto seq = sample_outcomes(src.instrument, src.invariant_state, c.lln_steps, rng, step_options(c));
    Json entries = Json::array();
    bool ok = true;
    const FrequencyTable table = empirical_frequencies(seq, words);
    for (const auto& e : table.entries) {
      const double p = sector_law(d.decomp, alpha, e.word);
      Json ej{{"word", Json::array()}, {"count", e.count}, {"frequency", e.frequency}, {"law", p}};
      for (OutcomeIndex a : e.word) ej["word"].push_back(d.instr.label(a));
      if (e.word.size() == 1) {
        const double band = 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(e.n_effective));
        ej["band"] = band;
        ej["within"] = std::abs(e.frequency - p) <= band + 1e-12;
        ok = ok && ej["within"].get<bool>();
      }
      entries.push_back(std::move(ej));
    }
    std::optional<std::size_t> cls;
    std::string cls_error;
    try {
      cls = classify_trajectory(table, d.decomp, c.tol_class);
    } catch (const AmbiguityError& e) {
      cls_error = e.what();
    }
    Json fj{{"sector", alpha}, {"n", c.lln_steps}, {"entries", std::move(entries)},
            {"single_letters_within_band", ok},
            {"classified_as", cls ? Json(*cls) : Json(nullptr)}};
    if (!cls_error.empty()) fj["classification_error"] = cls_error;
    freq.push_back(std::move(fj));
  }
  report["frequencies"] = std::move(freq);
  report["config"] = config_json(c);
  write_json_file(out_path(c, "analysis.json"), report);
  return 0;
}

int cmd_pipeline(const CliConfig& c, std::ostream& log) {
  require_out(c);
  CliConfig step = c;
  step.command = "validate";
  if (const int rc = cmd_validate(step, log); rc != 0) return rc;
  step.command = "decompose";
  if (const int rc = cmd_decompose(step, log); rc != 0) return rc;
  step.command = "simulate";
  if (const int rc = cmd_simulate(step, log); rc != 0) return rc;
  step.command = "analyze";
  const int rc = cmd_analyze(step, log);
  write_metadata(c);
  return rc;
}

}  // namespace qsector::cli
