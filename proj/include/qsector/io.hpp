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

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsector/analysis.hpp"
#include "qsector/instrument.hpp"
#include "qsector/invariant_structure.hpp"
#include "qsector/sectors.hpp"
#include "qsector/trajectory.hpp"

namespace qsector {

using Json = nlohmann::ordered_json;

/// Matrices are arrays of rows; an entry is a real number or [re, im].
Json matrix_to_json(const CMatrix& m);
CMatrix matrix_from_json(const Json& j, const std::string& where);

/// {"dim": d, "outcomes": [labels], "kraus": {label: [matrix, ...]}}.
/// Throws InputError on malformed documents; structural problems surface as
/// StructureError from the Instrument constructor.
Instrument instrument_from_json(const Json& j);
Json instrument_to_json(const Instrument& instr);
Instrument load_instrument(const std::string& path);

/// A bare matrix or {"matrix": ...}. Validated as a density matrix.
CMatrix load_state(const std::string& path, int dim);

Json read_json_file(const std::string& path);
/// Writes with two-space indentation and a trailing newline.
void write_json_file(const std::string& path, const Json& j);
void write_text_file(const std::string& path, const std::string& text);

/// 17 significant digits, "nan", "inf", "-inf".
std::string format_double(double x);

Json validation_to_json(const ValidationReport& report);
Json structure_to_json(const InvariantStructure& s);
Json sectors_to_json(const Instrument& instr, const SectorDecomposition& d);
Json horizon_to_json(const HorizonResult& h);
Json kappa_to_json(const KappaResult& k);

std::string records_header(std::size_t sectors);
void write_records_csv(std::ostream& os, const EnsembleRecords& records, const Instrument& instr);

/// Parses a records CSV written by write_records_csv and rebuilds rows,
/// per-trajectory final values, and moments at the recorded steps. A
/// negative step count is inferred as the largest recorded step.
EnsembleRecords read_records_csv(std::istream& is, long steps = -1);

Json summary_to_json(const EnsembleRecords& records);
Json born_to_json(const BornReport& r);
Json rate_to_json(const RateFit& f);
Json entropy_rate_to_json(const EntropyRate& e);
Json w_decay_to_json(const WDecayReport& r, bool include_points);

}  // namespace qsector
