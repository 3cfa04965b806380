// Copyright 2026 The gridplan Authors
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

#ifndef GRIDPLAN__PREDICTIONS_HPP_
#define GRIDPLAN__PREDICTIONS_HPP_

#include "gridplan/objectives.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace gridplan
{

/// One line of the prediction dump.
struct PredictionRecord
{
  std::string example_id;
  std::vector<Trajectory> samples;          // C x t_f points
  std::vector<Trajectory> representatives;  // K x t_f points
  std::map<std::string, double> metrics;
};

/// Formats a double with 9 significant digits (%.9g); signed zero is written as 0.
std::string format_g9(double v);

/// Writes one JSON object per line: {"example_id", "samples", "representatives", "metrics"}.
void write_prediction(std::ostream & out, const PredictionRecord & rec);
/// Reads every record; throws std::runtime_error naming the offending line.
std::vector<PredictionRecord> read_predictions(std::istream & in);

}  // namespace gridplan

#endif  // GRIDPLAN__PREDICTIONS_HPP_
