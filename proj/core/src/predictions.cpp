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

#include "gridplan/predictions.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace gridplan
{

std::string format_g9(double v)
{
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Infinity" : "-Infinity";
  if (v == 0.0) return "0";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

namespace
{

void write_set(std::ostream & out, const std::vector<Trajectory> & set)
{
  out << '[';
  for (std::size_t i = 0; i < set.size(); ++i) {
    out << (i ? "," : "") << '[';
    for (std::size_t t = 0; t < set[i].size(); ++t) {
      out << (t ? "," : "") << '[' << format_g9(set[i][t].x) << ',' << format_g9(set[i][t].y) << ']';
    }
    out << ']';
  }
  out << ']';
}

std::vector<Trajectory> read_set(const nlohmann::json & j)
{
  std::vector<Trajectory> set;
  for (const auto & traj : j) {
    Trajectory t;
    for (const auto & p : traj) {
      if (!p.is_array() || p.size() != 2) throw std::runtime_error("point must be [x, y]");
      t.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    set.push_back(std::move(t));
  }
  return set;
}

double read_number(const nlohmann::json & v)
{
  if (v.is_number()) return v.get<double>();
  const std::string s = v.get<std::string>();
  if (s == "NaN") return std::nan("");
  if (s == "Infinity") return INFINITY;
  if (s == "-Infinity") return -INFINITY;
  throw std::runtime_error("metric value '" + s + "' is not a number");
}

}  // namespace

void write_prediction(std::ostream & out, const PredictionRecord & rec)
{
  out << "{\"example_id\":" << nlohmann::json(rec.example_id).dump() << ",\"samples\":";
  write_set(out, rec.samples);
  out << ",\"representatives\":";
  write_set(out, rec.representatives);
  out << ",\"metrics\":{";
  bool first = true;
  for (const auto & [k, v] : rec.metrics) {
    const std::string num = format_g9(v);
    const bool finite = std::isfinite(v);
    out << (first ? "" : ",") << nlohmann::json(k).dump() << ':' << (finite ? num : "\"" + num + "\"");
    first = false;
  }
  out << "}}\n";
}

std::vector<PredictionRecord> read_predictions(std::istream & in)
{
  std::vector<PredictionRecord> out;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      PredictionRecord r;
      r.example_id = j.at("example_id").get<std::string>();
      r.samples = read_set(j.at("samples"));
      r.representatives = read_set(j.at("representatives"));
      for (const auto & [k, v] : j.at("metrics").items()) r.metrics[k] = read_number(v);
      out.push_back(std::move(r));
    } catch (const std::exception & e) {
      throw std::runtime_error("prediction dump line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace gridplan
