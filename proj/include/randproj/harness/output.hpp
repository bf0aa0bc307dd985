// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "randproj/errors.hpp"
#include "randproj/experiments.hpp"
#include "randproj/seed.hpp"

namespace randproj::harness {

using nlohmann::json;

/// Shortest text that parses back to the same double (17 significant digits).
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// The part of a config that determines results; paths and thread counts are dropped.
inline json result_echo(const json& echo) {
  json e = echo;
  e.erase("out_dir");
  e.erase("threads");
  e.erase("format");
  return e;
}

inline void write_table_csv(std::ostream& os, const Table& t, const json& echo, Seed master) {
  os << "# config: " << result_echo(echo).dump() << "\n";
  os << "# master_seed: " << master << "\n";
  for (std::size_t c = 0; c < t.columns.size(); ++c) os << (c ? "," : "") << t.columns[c];
  os << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << format_number(row[c]);
    os << "\n";
  }
}

inline json number_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline void write_table_json(std::ostream& os, const Table& t, const json& echo, Seed master) {
  json j;
  j["config"] = result_echo(echo);
  j["master_seed"] = master;
  j["columns"] = t.columns;
  json rows = json::array();
  for (const auto& row : t.rows) {
    json r = json::array();
    for (double v : row) r.push_back(number_json(v));
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  os << j.dump(1) << "\n";
}

/// Writes `t` as <stem>.csv or <stem>.json under dir and returns the file name.
inline std::string write_table(const std::string& dir, const std::string& stem, const Table& t, const json& echo,
                               Seed master, const std::string& format) {
  const std::string name = stem + (format == "json" ? ".json" : ".csv");
  std::ofstream os(dir + "/" + name, std::ios::binary);
  if (!os) throw InvalidArgument("harness", "cannot write " + dir + "/" + name);
  if (format == "json")
    write_table_json(os, t, echo, master);
  else
    write_table_csv(os, t, echo, master);
  return name;
}

/// Parses a CSV written by write_table_csv, skipping comment lines.
inline Table read_table_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("harness", "cannot open " + path);
  Table t;
  std::string line;
  bool header = true;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    if (header) {
      while (std::getline(ss, cell, ',')) t.columns.push_back(cell);
      header = false;
    } else {
      std::vector<double> row;
      while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

}  // namespace randproj::harness
