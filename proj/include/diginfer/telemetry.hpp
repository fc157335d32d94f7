#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "diginfer/errors.hpp"
#include "diginfer/util.hpp"

namespace diginfer {

enum class Role { BucketDig, BucketDump, Excavator };

inline const char* role_name(Role r) {
  switch (r) {
    case Role::BucketDig: return "dig";
    case Role::BucketDump: return "dump";
    default: return "excavator";
  }
}

struct TelemetryRecord {
  double timestamp = 0.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  Role role = Role::BucketDig;
  bool z_unused = false;  // excavator rows with empty z column
};

struct RejectedRow {
  std::size_t line;  // 1-based line number in the source file
  std::string reason;
};

struct TelemetryLog {
  std::vector<TelemetryRecord> records;  // sorted non-decreasing by timestamp
  std::vector<RejectedRow> rejects;

  bool has_role(Role r) const {
    return std::any_of(records.begin(), records.end(),
                       [r](const TelemetryRecord& rec) { return rec.role == r; });
  }
};

namespace detail {

inline bool parse_role(std::string_view s, Role& out) {
  std::string lower;
  for (char c : trim(s)) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lower == "dig") { out = Role::BucketDig; return true; }
  if (lower == "dump") { out = Role::BucketDump; return true; }
  if (lower == "excavator") { out = Role::Excavator; return true; }
  return false;
}

}  // namespace detail

// Parses the fixed `timestamp,x,y,z,role` schema. Bad rows are collected in
// the rejection report; the load aborts only when the reject fraction exceeds
// max_reject_fraction. If every timestamp cell is empty, records get synthetic
// timestamps equal to their data-row index.
inline TelemetryLog load_csv_stream(std::istream& in, double max_reject_fraction = 0.10) {
  TelemetryLog log;
  std::string line;
  if (!std::getline(in, line)) throw data_error("empty CSV: missing header");
  {
    auto cols = split_csv_line(line);
    if (cols.size() != 5 || trim(cols[0]) != "timestamp" || trim(cols[1]) != "x" ||
        trim(cols[2]) != "y" || trim(cols[3]) != "z" || trim(cols[4]) != "role") {
      throw data_error("CSV header must be `timestamp,x,y,z,role`");
    }
  }

  struct PendingRecord {
    TelemetryRecord rec;
    bool has_timestamp;
    std::size_t row_index;
    std::size_t line_no;
  };
  std::vector<PendingRecord> pending;
  std::size_t line_no = 1;
  std::size_t total_rows = 0;
  std::size_t row_index = 0;
  bool any_timestamp = false;

  auto reject = [&](std::size_t ln, std::string reason) {
    log.rejects.push_back({ln, std::move(reason)});
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++total_rows;
    auto cols = split_csv_line(line);
    if (cols.size() != 5) {
      reject(line_no, "expected 5 fields, got " + std::to_string(cols.size()));
      continue;
    }
    TelemetryRecord rec;
    if (!detail::parse_role(cols[4], rec.role)) {
      reject(line_no, "unknown role `" + std::string(trim(cols[4])) + "`");
      continue;
    }
    bool has_ts = !trim(cols[0]).empty();
    if (has_ts) {
      auto ts = parse_double(cols[0]);
      if (!ts || !std::isfinite(*ts)) { reject(line_no, "non-numeric timestamp"); continue; }
      if (*ts < 0) { reject(line_no, "negative timestamp"); continue; }
      rec.timestamp = *ts;
      any_timestamp = true;
    }
    auto px = parse_double(cols[1]);
    auto py = parse_double(cols[2]);
    if (!px || !std::isfinite(*px)) { reject(line_no, "non-numeric x"); continue; }
    if (!py || !std::isfinite(*py)) { reject(line_no, "non-numeric y"); continue; }
    rec.x = *px;
    rec.y = *py;
    if (trim(cols[3]).empty()) {
      if (rec.role == Role::Excavator) {
        rec.z = 0.0;
        rec.z_unused = true;
      } else {
        reject(line_no, "missing z for non-excavator row");
        continue;
      }
    } else {
      auto pz = parse_double(cols[3]);
      if (!pz || !std::isfinite(*pz)) { reject(line_no, "non-numeric z"); continue; }
      rec.z = *pz;
    }
    pending.push_back({rec, has_ts, row_index, line_no});
    ++row_index;
  }

  if (total_rows > 0 &&
      static_cast<double>(log.rejects.size()) > max_reject_fraction * static_cast<double>(total_rows)) {
    throw data_error("rejected " + std::to_string(log.rejects.size()) + " of " +
                     std::to_string(total_rows) + " rows, above the configured limit");
  }

  if (!any_timestamp) {
    // Timestamps-optional mode: ordering by row index stands in for time.
    for (auto& p : pending) p.rec.timestamp = static_cast<double>(p.row_index);
  } else {
    for (auto it = pending.begin(); it != pending.end();) {
      if (!it->has_timestamp) {
        reject(it->line_no, "row lacks a timestamp in a timestamped file");
        it = pending.erase(it);
      } else {
        ++it;
      }
    }
  }

  std::stable_sort(pending.begin(), pending.end(),
                   [](const PendingRecord& a, const PendingRecord& b) {
                     return a.rec.timestamp < b.rec.timestamp;
                   });
  log.records.reserve(pending.size());
  for (auto& p : pending) log.records.push_back(p.rec);
  return log;
}

inline TelemetryLog load_csv(const std::string& path, double max_reject_fraction = 0.10) {
  std::ifstream in(path);
  if (!in) throw missing_file(path);
  return load_csv_stream(in, max_reject_fraction);
}

inline void save_csv_stream(const TelemetryLog& log, std::ostream& out) {
  out << "timestamp,x,y,z,role\n";
  for (const auto& r : log.records) {
    out << format_double(r.timestamp) << ',' << format_double(r.x) << ','
        << format_double(r.y) << ',';
    if (!r.z_unused) out << format_double(r.z);
    out << ',' << role_name(r.role) << '\n';
  }
}

inline void save_csv(const TelemetryLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path);
  save_csv_stream(log, out);
}

inline nlohmann::json rejection_report(const TelemetryLog& log) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : log.rejects) arr.push_back({{"line", r.line}, {"reason", r.reason}});
  return arr;
}

inline std::vector<TelemetryRecord> select_role(const TelemetryLog& log, Role role) {
  std::vector<TelemetryRecord> out;
  for (const auto& r : log.records)
    if (r.role == role) out.push_back(r);
  return out;
}

}  // namespace diginfer
