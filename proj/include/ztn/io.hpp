#pragma once

// Files: bandwidth datasets, training traces and loop records as CSV;
// forecaster and Q-table checkpoints as JSON. Numbers are written with fixed
// formats so repeated runs produce byte-identical files.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ztn/core.hpp"
#include "ztn/errors.hpp"
#include "ztn/forecaster.hpp"
#include "ztn/qagent.hpp"

namespace ztn {

namespace fs = std::filesystem;

inline std::string fmt(double v, int decimals = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Plain files

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw DataError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void save_json(const fs::path& path, const nlohmann::json& doc) { write_text(path, doc.dump(2) + "\n"); }

inline nlohmann::json load_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// CSV

/// Header-indexed CSV table of numbers.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name, const std::string& source) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw DataError(source + ": missing column '" + name + "'");
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline CsvTable parse_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  CsvTable t;
  if (!std::getline(in, line)) throw DataError(source + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split_csv_line(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != t.header.size())
      throw DataError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                      " fields, got " + std::to_string(cells.size()));
    std::vector<double> row;
    for (const auto& c : cells) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(c, &used));
        if (used != c.size()) throw std::invalid_argument(c);
      } catch (const std::exception&) {
        throw DataError(source + ":" + std::to_string(lineno) + ": not a number: '" + c + "'");
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline std::string series_csv(const TimeSeries& series) {
  std::string out = "time_s,bandwidth_mbps\n";
  for (const auto& s : series) out += fmt(s.timestamp, 3) + "," + fmt(s.bandwidth) + "\n";
  return out;
}

inline void write_series_csv(const fs::path& path, const TimeSeries& series) { write_text(path, series_csv(series)); }

inline TimeSeries read_series_csv(const fs::path& path) {
  const auto t = parse_csv(read_text(path), path.string());
  const auto ct = t.column("time_s", path.string()), cb = t.column("bandwidth_mbps", path.string());
  std::vector<QosObservation> samples;
  samples.reserve(t.rows.size());
  for (const auto& r : t.rows) samples.push_back({r[ct], r[cb]});
  try {
    return TimeSeries(std::move(samples));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::string out = "episode,total_reward,epsilon,mae\n";
  for (const auto& r : trace)
    out += std::to_string(r.episode) + "," + fmt(r.total_reward, 4) + "," + fmt(r.epsilon, 8) + "," + fmt(r.mae) + "\n";
  return out;
}

inline std::vector<TraceRow> read_trace_csv(const fs::path& path) {
  const auto t = parse_csv(read_text(path), path.string());
  const auto ce = t.column("episode", path.string()), cr = t.column("total_reward", path.string()),
             cp = t.column("epsilon", path.string()), cm = t.column("mae", path.string());
  std::vector<TraceRow> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    if (!(r[ce] >= 0.0)) throw DataError(path.string() + ": negative episode number");
    out.push_back({static_cast<std::size_t>(r[ce]), r[cr], r[cp], r[cm]});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Q-table checkpoint

inline constexpr int kQTableSchemaVersion = 1;

struct QCheckpoint {
  QTable q;
  std::optional<AchievedTable> model;  // reward model the table was trained on
  std::size_t num_bins = 0;
  double max_bw = 0.0;
};

inline nlohmann::json qtable_to_json(const QCheckpoint& c) {
  nlohmann::json doc;
  doc["schema_version"] = kQTableSchemaVersion;
  doc["states"] = c.q.num_states();
  doc["actions"] = c.q.num_actions();
  doc["action_labels"] = nlohmann::json::array();
  for (std::size_t a = 0; a < c.q.num_actions(); ++a) doc["action_labels"].push_back("a" + std::to_string(a + 1));
  doc["bins"] = {{"num_bins", c.num_bins}, {"max_bw", c.max_bw}};
  doc["values"] = c.q.values();
  if (c.model) doc["achieved"] = {{"expected", c.model->expected()}, {"values", c.model->values()}};
  return doc;
}

inline QCheckpoint qtable_from_json(const nlohmann::json& doc) {
  try {
    const int version = doc.at("schema_version").get<int>();
    if (version != kQTableSchemaVersion)
      throw DataError("Q-table checkpoint schema version " + std::to_string(version) + ", expected " +
                      std::to_string(kQTableSchemaVersion));
    const auto states = doc.at("states").get<std::size_t>(), actions = doc.at("actions").get<std::size_t>();
    const auto values = doc.at("values").get<std::vector<double>>();
    if (values.size() != states * actions) throw DataError("Q-table checkpoint values do not match its dimensions");
    if (doc.at("action_labels").size() != actions) throw DataError("Q-table checkpoint has the wrong label count");
    QCheckpoint c{QTable(states, actions), std::nullopt, doc.at("bins").at("num_bins").get<std::size_t>(),
                  doc.at("bins").at("max_bw").get<double>()};
    for (std::size_t s = 0; s < states; ++s)
      for (std::size_t a = 0; a < actions; ++a) c.q.set(s, a, values[s * actions + a]);
    if (doc.contains("achieved"))
      c.model = AchievedTable(doc["achieved"].at("expected").get<double>(), states, actions,
                              doc["achieved"].at("values").get<std::vector<double>>());
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed Q-table checkpoint: ") + e.what());
  }
}

inline void save_qtable(const fs::path& path, const QCheckpoint& c) { save_json(path, qtable_to_json(c)); }

inline QCheckpoint load_qtable(const fs::path& path) {
  try {
    return qtable_from_json(load_json(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Forecaster checkpoint

inline void save_forecaster(const fs::path& path, const HybridForecaster& f) { save_json(path, f.to_json()); }

inline HybridForecaster load_forecaster(const fs::path& path) {
  try {
    return HybridForecaster::from_json(load_json(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace ztn
