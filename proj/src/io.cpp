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

#include "qsector/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "qsector/errors.hpp"

namespace qsector {

namespace {

double number_at(const Json& j, const std::string& where) {
  if (!j.is_number()) throw InputError(where + ": expected a number");
  return j.get<double>();
}

Json double_array(const std::vector<double>& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(x);
  return out;
}

Json word_labels(const Instrument& instr, const Word& w) {
  Json out = Json::array();
  for (OutcomeIndex a : w) out.push_back(instr.label(a));
  return out;
}

}  // namespace

Json matrix_to_json(const CMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(Json::array({m(r, c).real(), m(r, c).imag()}));
    rows.push_back(std::move(row));
  }
  return rows;
}

CMatrix matrix_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw InputError(where + ": expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array() || j[0].empty()) throw InputError(where + ": row 0 is not a non-empty array");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  CMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    const std::string rw = where + " row " + std::to_string(r);
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw InputError(rw + ": expected " + std::to_string(cols) + " entries");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Json& e = row[static_cast<std::size_t>(c)];
      const std::string ew = rw + " column " + std::to_string(c);
      if (e.is_number()) {
        m(r, c) = Complex(e.get<double>(), 0.0);
      } else if (e.is_array() && e.size() == 2) {
        m(r, c) = Complex(number_at(e[0], ew), number_at(e[1], ew));
      } else {
        throw InputError(ew + ": expected a number or [re, im]");
      }
    }
  }
  return m;
}

Instrument instrument_from_json(const Json& j) {
  if (!j.is_object()) throw InputError("instrument: top level must be an object");
  for (const char* key : {"dim", "outcomes", "kraus"}) {
    if (!j.contains(key)) throw InputError(std::string("instrument: missing key '") + key + "'");
  }
  if (!j["dim"].is_number_integer()) throw InputError("instrument: 'dim' must be an integer");
  const int dim = j["dim"].get<int>();
  if (!j["outcomes"].is_array()) throw InputError("instrument: 'outcomes' must be an array");
  std::vector<std::string> outcomes;
  for (const auto& o : j["outcomes"]) {
    if (!o.is_string()) throw InputError("instrument: outcome labels must be strings");
    outcomes.push_back(o.get<std::string>());
  }
  const Json& k = j["kraus"];
  if (!k.is_object()) throw InputError("instrument: 'kraus' must map labels to matrix lists");
  for (const auto& item : k.items()) {
    if (std::find(outcomes.begin(), outcomes.end(), item.key()) == outcomes.end()) {
      throw UnknownOutcomeError("instrument: Kraus list for undeclared outcome '" + item.key() + "'");
    }
  }
  std::vector<std::vector<CMatrix>> kraus;
  for (const auto& label : outcomes) {
    if (!k.contains(label)) throw InputError("instrument: no Kraus list for outcome '" + label + "'");
    const Json& list = k[label];
    if (!list.is_array()) throw InputError("instrument: Kraus list for '" + label + "' must be an array");
    std::vector<CMatrix> family;
    for (std::size_t n = 0; n < list.size(); ++n) {
      family.push_back(matrix_from_json(list[n], "kraus['" + label + "'][" + std::to_string(n) + "]"));
    }
    kraus.push_back(std::move(family));
  }
  return Instrument(dim, std::move(outcomes), std::move(kraus));
}

Json instrument_to_json(const Instrument& instr) {
  Json j;
  j["dim"] = instr.dim();
  j["outcomes"] = instr.outcomes();
  Json k = Json::object();
  for (OutcomeIndex a = 0; a < instr.num_outcomes(); ++a) {
    Json list = Json::array();
    for (const auto& m : instr.kraus(a)) list.push_back(matrix_to_json(m));
    k[instr.label(a)] = std::move(list);
  }
  j["kraus"] = std::move(k);
  return j;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("'" + path + "' is not valid JSON: " + e.what());
  }
}

Instrument load_instrument(const std::string& path) {
  try {
    return instrument_from_json(read_json_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw InputError("'" + path + "': " + e.what());
  } catch (const StructureError& e) {
    // Kraus shapes that do not match the declared dimension are a malformed file.
    throw InputError("'" + path + "': " + e.what());
  }
}

CMatrix load_state(const std::string& path, int dim) {
  const Json j = read_json_file(path);
  const Json& m = j.is_object() && j.contains("matrix") ? j["matrix"] : j;
  CMatrix rho = matrix_from_json(m, "state '" + path + "'");
  if (rho.rows() != dim || rho.cols() != dim) {
    throw DimensionError("state '" + path + "' has shape " + std::to_string(rho.rows()) + "x" +
                         std::to_string(rho.cols()) + ", expected " + std::to_string(dim));
  }
  try {
    return State(rho).matrix();
  } catch (const Error& e) {
    throw InputError("state '" + path + "': " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << text;
  if (!out) throw InputError("write failed for '" + path + "'");
}

void write_json_file(const std::string& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

Json validation_to_json(const ValidationReport& report) {
  Json j;
  j["passed"] = report.passed;
  j["tolerance"] = report.tolerance;
  j["deficit"] = report.deficit;
  Json per = Json::array();
  for (const auto& w : report.per_outcome) {
    per.push_back({{"outcome", w.label},
                   {"min_eigenvalue", w.min_eigenvalue},
                   {"max_eigenvalue", w.max_eigenvalue},
                   {"excess", w.excess}});
  }
  j["per_outcome"] = std::move(per);
  return j;
}

Json structure_to_json(const InvariantStructure& s) {
  Json j;
  j["r"] = s.r();
  j["recurrent_projector"] = matrix_to_json(s.recurrent_projector.matrix());
  j["split_retries"] = s.split_retries;
  Json enc = Json::array();
  for (std::size_t i = 0; i < s.r(); ++i) {
    enc.push_back({{"index", i},
                   {"rank", s.enclosures[i].basis.cols()},
                   {"lambda", s.lambdas[i]},
                   {"projector", matrix_to_json(s.enclosures[i].projector.matrix())},
                   {"state", matrix_to_json(s.states[i].matrix())},
                   {"effect", matrix_to_json(s.effects[i].matrix())}});
  }
  j["enclosures"] = std::move(enc);
  const auto& d = s.diagnostics;
  j["diagnostics"] = {{"state_fixed_residual", d.state_fixed_residual},
                      {"effect_fixed_residual", d.effect_fixed_residual},
                      {"effect_sum_residual", d.effect_sum_residual},
                      {"support_residual", d.support_residual},
                      {"off_block_residual", d.off_block_residual},
                      {"lambda_spread", d.lambda_spread},
                      {"min_foreign_overlap", d.min_foreign_overlap},
                      {"max_inclusion_residual", d.max_inclusion_residual}};
  return j;
}

Json sectors_to_json(const Instrument& instr, const SectorDecomposition& d) {
  Json j;
  j["num_sectors"] = d.num_sectors();
  Json sectors = Json::array();
  for (std::size_t alpha = 0; alpha < d.num_sectors(); ++alpha) {
    Json law = Json::object();
    for (OutcomeIndex a = 0; a < instr.num_outcomes(); ++a) law[instr.label(a)] = sector_law(d, alpha, Word{a});
    sectors.push_back({{"index", alpha},
                       {"members", d.partition[alpha]},
                       {"single_letter_law", std::move(law)},
                       {"effect", matrix_to_json(d.sector_effects[alpha].matrix())}});
  }
  j["sectors"] = std::move(sectors);
  Json comps = Json::array();
  for (const auto& pc : d.comparisons) {
    Json c{{"i", pc.i}, {"j", pc.j}, {"equal", pc.result.equal}, {"horizon", pc.result.horizon},
           {"gap", pc.result.gap}};
    if (!pc.result.equal) {
      c["witness"] = word_labels(instr, pc.result.witness);
      c["p_i"] = pc.result.p_first;
      c["p_j"] = pc.result.p_second;
    }
    comps.push_back(std::move(c));
  }
  j["comparisons"] = std::move(comps);
  const auto& o = d.options;
  j["tolerances"] = {{"tol_supp", o.tol_supp}, {"tol_channel", o.tol_channel},
                     {"tol_null", o.tol_null}, {"tol_law", o.tol_law},
                     {"tol_cond", o.tol_cond}, {"l_eq", o.l_eq},
                     {"word_budget", o.word_budget}};
  return j;
}

Json horizon_to_json(const HorizonResult& h) {
  Json j;
  j["horizon"] = h.horizon ? Json(*h.horizon) : Json(nullptr);
  j["min_gaps"] = double_array(h.min_gaps);
  j["ensemble_size"] = h.ensemble_size;
  return j;
}

Json kappa_to_json(const KappaResult& k) {
  return Json{{"value", k.value},       {"below_one", k.below_one}, {"alpha", k.alpha},
              {"beta", k.beta},         {"starts", k.starts},       {"evaluations", k.evaluations},
              {"argmax", matrix_to_json(k.argmax)}};
}

std::string records_header(std::size_t sectors) {
  std::string h = "traj,step,outcome";
  for (std::size_t a = 0; a < sectors; ++a) h += ",Q_" + std::to_string(a);
  for (std::size_t a = 0; a < sectors; ++a) h += ",Qhat_" + std::to_string(a);
  h += ",W,What,loglik_true";
  for (std::size_t a = 0; a < sectors; ++a) h += ",loglik_ch_" + std::to_string(a);
  for (std::size_t a = 0; a < sectors; ++a) h += ",loglik_sec_" + std::to_string(a);
  return h;
}

void write_records_csv(std::ostream& os, const EnsembleRecords& records, const Instrument&) {
  const std::size_t ns = records.num_sectors;
  os << records_header(ns) << '\n';
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : records.rows) {
    os << r.traj << ',' << r.step << ',' << r.outcome;
    for (double q : r.q) os << ',' << format_double(q);
    for (std::size_t a = 0; a < ns; ++a) os << ',' << format_double(r.q_hat.empty() ? nan : r.q_hat[a]);
    os << ',' << format_double(r.w) << ',' << format_double(records.has_filter ? r.w_hat : nan) << ','
       << format_double(r.loglik_true);
    for (double v : r.loglik_ch) os << ',' << format_double(v);
    for (double v : r.loglik_sec) os << ',' << format_double(v);
    os << '\n';
  }
}

EnsembleRecords read_records_csv(std::istream& is, long steps) {
  std::string line;
  if (!std::getline(is, line)) throw InputError("records: empty file");
  std::size_t ns = 0;
  {
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) {
      if (cell.rfind("Q_", 0) == 0) ++ns;
    }
  }
  if (line != records_header(ns)) throw InputError("records: unexpected header '" + line + "'");
  std::vector<std::string> lines;
  while (std::getline(is, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  if (steps < 0) {
    steps = 0;
    for (const auto& l : lines) {
      const auto first = l.find(',');
      const auto second = l.find(',', first + 1);
      if (first == std::string::npos || second == std::string::npos) continue;
      try {
        steps = std::max(steps, std::stol(l.substr(first + 1, second - first - 1)));
      } catch (const std::exception&) {
        // reported with the line number below
      }
    }
  }
  EnsembleRecords out;
  out.num_sectors = ns;
  out.steps = steps;
  out.moments.resize(steps, ns);
  const std::size_t width = 6 + 4 * ns;
  long lineno = 1;
  std::map<long, TrajectorySummary> last;
  for (const std::string& text : lines) {
    ++lineno;
    std::vector<std::string> cells;
    std::stringstream ls(text);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != width) {
      throw InputError("records line " + std::to_string(lineno) + ": expected " +
                       std::to_string(width) + " fields");
    }
    RecordRow r;
    std::size_t c = 0;
    try {
      r.traj = std::stol(cells[c++]);
      r.step = std::stol(cells[c++]);
      r.outcome = std::stol(cells[c++]);
      auto next = [&]() { return std::stod(cells[c++]); };
      for (std::size_t a = 0; a < ns; ++a) r.q.push_back(next());
      for (std::size_t a = 0; a < ns; ++a) r.q_hat.push_back(next());
      r.w = next();
      r.w_hat = next();
      r.loglik_true = next();
      for (std::size_t a = 0; a < ns; ++a) r.loglik_ch.push_back(next());
      for (std::size_t a = 0; a < ns; ++a) r.loglik_sec.push_back(next());
    } catch (const std::exception&) {
      throw InputError("records line " + std::to_string(lineno) + ": malformed field " +
                       std::to_string(c));
    }
    if (r.step < 0 || r.step > steps) {
      throw InputError("records line " + std::to_string(lineno) + ": step outside [0, steps]");
    }
    const bool filtered = !r.q_hat.empty() && !std::isnan(r.q_hat[0]);
    out.has_filter = out.has_filter || filtered;
    if (!filtered) r.q_hat.clear();

    out.moments.add(r.step, r.w, filtered ? r.w_hat : 0.0, r.q);

    TrajectorySummary& s = last[r.traj];
    s.traj = r.traj;
    s.steps_done = r.step;
    s.q_final = r.q;
    s.q_hat_final = r.q_hat;
    out.rows.push_back(std::move(r));
  }
  for (auto& [t, s] : last) {
    s.failed = s.steps_done < steps;
    if (s.failed) {
      s.failure = "trajectory stopped before the final step";
      ++out.failures;
    }
    out.trajectories.push_back(std::move(s));
  }
  return out;
}

Json summary_to_json(const EnsembleRecords& records) {
  Json j;
  j["trajectories"] = records.trajectories.size();
  j["steps"] = records.steps;
  j["failures"] = records.failures;
  Json failed = Json::array();
  for (const auto& t : records.trajectories) {
    if (t.failed) failed.push_back({{"traj", t.traj}, {"steps_done", t.steps_done}, {"error", t.failure}});
  }
  j["failed"] = std::move(failed);
  std::vector<long> selected(records.num_sectors, 0);
  for (const auto& t : records.trajectories) {
    for (std::size_t a = 0; a < t.q_final.size(); ++a) {
      if (t.q_final[a] > 0.99) ++selected[a];
    }
  }
  j["selected_q_above_0.99"] = selected;
  Json per_step = Json::array();
  const auto& m = records.moments;
  for (std::size_t n = 0; n < m.count.size(); ++n) {
    if (m.count[n] == 0) continue;
    const long step = static_cast<long>(n);
    Json q = Json::array();
    for (double s : m.q_sum[n]) q.push_back(s / static_cast<double>(m.count[n]));
    Json row{{"step", step}, {"count", m.count[n]}, {"mean_W", m.mean_w(step)},
             {"se_W", m.se_w(step)}, {"mean_Q", std::move(q)}};
    if (records.has_filter) {
      row["mean_What"] = m.mean_w_hat(step);
      row["se_What"] = m.se_w_hat(step);
    }
    per_step.push_back(std::move(row));
  }
  j["per_step"] = std::move(per_step);
  return j;
}

Json born_to_json(const BornReport& r) {
  Json j;
  j["threshold"] = r.threshold;
  j["trajectories"] = r.trajectories;
  Json s = Json::array();
  for (const auto& b : r.sectors) {
    s.push_back({{"expected", b.expected}, {"selected", b.selected}, {"fraction", b.fraction},
                 {"band", b.band}, {"within", b.within}});
  }
  j["sectors"] = std::move(s);
  j["unresolved"] = r.unresolved;
  j["unresolved_fraction"] = r.unresolved_fraction;
  j["filter_agreement"] = r.filter_agreement ? Json(*r.filter_agreement) : Json(nullptr);
  j["passed"] = r.passed;
  return j;
}

Json rate_to_json(const RateFit& f) {
  return Json{{"slope", std::isfinite(f.slope) ? Json(f.slope) : Json(format_double(f.slope))},
              {"std_error", f.std_error},
              {"burn_in", f.burn_in},
              {"first", f.first},
              {"last", f.last},
              {"hit_zero", f.hit_zero},
              {"zero_step", f.zero_step}};
}

Json entropy_rate_to_json(const EntropyRate& e) {
  return Json{{"estimate", std::isfinite(e.mean) ? Json(e.mean) : Json(format_double(e.mean))},
              {"std_error", e.std_error},
              {"trajectories", e.trajectories},
              {"infinite", e.infinite},
              {"truncation_step", e.truncation_step}};
}

Json w_decay_to_json(const WDecayReport& r, bool include_points) {
  Json j{{"w0", r.w0},           {"kappa", r.kappa},
         {"N", r.horizon},       {"gamma", r.gamma},
         {"constant", r.constant}, {"violations", r.violations},
         {"all_ok", r.all_ok},   {"fitted_slope", r.fitted_slope},
         {"fit_points", r.fit_points}, {"truncated", r.truncated}};
  if (include_points) {
    Json pts = Json::array();
    for (const auto& p : r.points) {
      pts.push_back({{"n", p.n}, {"mean", p.mean}, {"se", p.se}, {"bound", p.bound}, {"ok", p.ok}});
    }
    j["points"] = std::move(pts);
  }
  return j;
}

}  // namespace qsector
