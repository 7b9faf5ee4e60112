#pragma once

// Result records of scenario runs and their CSV / JSON serialization.
// Wall times go to a separate timings file so the data files stay
// byte-identical across repeated runs.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace molbat {

using FieldValue = std::variant<double, std::vector<double>, std::string>;

struct Field {
  std::string name;
  FieldValue value;
};

struct ResultRecord {
  std::string scenario;
  std::string id;
  std::size_t sweep_index = 0;
  std::uint64_t config_hash = 0;
  std::string status = "ok";  // "ok" or "<kind>: <message>"
  std::vector<Field> inputs;
  std::vector<Field> outputs;
  std::vector<Field> diagnostics;
  double wall_time = 0.0;  // seconds, timings file only

  bool ok() const { return status == "ok"; }
  const FieldValue* find_output(std::string_view name) const;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::string hash_hex(std::uint64_t h);

/// %.17g; "nan", "inf", "-inf" for non-finite values.
std::string format_double(double x);

/// Header: scenario,id,sweep_index,config_hash,status, then in.*, out.*,
/// diag.* columns in first-seen order. Vectors become name[i] columns.
void write_csv(std::ostream& os, const std::vector<ResultRecord>& records);

/// Array of record objects. Non-finite numbers are written as strings.
void write_json(std::ostream& os, const std::vector<ResultRecord>& records);

/// id,sweep_index,wall_time_s
void write_timings(std::ostream& os, const std::vector<ResultRecord>& records);

/// Inverse of write_json (wall times are not stored there and come back as 0).
std::vector<ResultRecord> read_json_records(std::istream& is);

enum class OutputFormat { Csv, Json };

struct EmittedFiles {
  std::string data;
  std::string timings;
};

/// Writes <dir>/<stem>.csv|json and <dir>/<stem>.timings.csv through temporary
/// files renamed into place. Throws std::runtime_error with the OS message on
/// I/O failure. Requires a nonempty record list.
EmittedFiles emit(const std::vector<ResultRecord>& records, const std::string& dir, const std::string& stem,
                  OutputFormat format);

}  // namespace molbat
