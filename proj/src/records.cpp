#include "molbat/records.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "molbat/errors.hpp"

namespace molbat {

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

std::string json_number(double x) {
  if (std::isfinite(x)) return format_double(x);
  return "\"" + format_double(x) + "\"";
}

std::string json_value(const FieldValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return json_number(*d);
  if (const auto* s = std::get_if<std::string>(&v)) return json_string(*s);
  const auto& vec = std::get<std::vector<double>>(v);
  std::string out = "[";
  for (std::size_t i = 0; i < vec.size(); ++i) out += (i ? "," : "") + json_number(vec[i]);
  return out + "]";
}

// Flattened (column, cell) pairs of one field list.
void flatten(const std::string& prefix, const std::vector<Field>& fields,
             std::vector<std::pair<std::string, std::string>>& out) {
  for (const auto& f : fields) {
    const std::string base = prefix + f.name;
    if (const auto* d = std::get_if<double>(&f.value)) {
      out.emplace_back(base, format_double(*d));
    } else if (const auto* s = std::get_if<std::string>(&f.value)) {
      out.emplace_back(base, csv_escape(*s));
    } else {
      const auto& vec = std::get<std::vector<double>>(f.value);
      for (std::size_t i = 0; i < vec.size(); ++i)
        out.emplace_back(base + "[" + std::to_string(i) + "]", format_double(vec[i]));
    }
  }
}

double number_from_json(const nlohmann::ordered_json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "nan") return std::nan("");
    if (s == "inf") return HUGE_VAL;
    if (s == "-inf") return -HUGE_VAL;
  }
  throw InputError("records: expected a number, got " + j.dump());
}

std::vector<Field> fields_from_json(const nlohmann::ordered_json& obj) {
  std::vector<Field> out;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const auto& v = it.value();
    if (v.is_array()) {
      std::vector<double> vec;
      for (const auto& x : v) vec.push_back(number_from_json(x));
      out.push_back({it.key(), vec});
    } else if (v.is_string() && v.get<std::string>() != "nan" && v.get<std::string>() != "inf" &&
               v.get<std::string>() != "-inf") {
      out.push_back({it.key(), v.get<std::string>()});
    } else {
      out.push_back({it.key(), number_from_json(v)});
    }
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + ": " + std::strerror(errno));
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string() + ": " + std::strerror(errno));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

}  // namespace

const FieldValue* ResultRecord::find_output(std::string_view name) const {
  for (const auto& f : outputs)
    if (f.name == name) return &f.value;
  return nullptr;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_csv(std::ostream& os, const std::vector<ResultRecord>& records) {
  std::vector<std::vector<std::pair<std::string, std::string>>> rows;
  std::vector<std::string> columns;
  std::map<std::string, bool> seen;
  for (const auto& r : records) {
    std::vector<std::pair<std::string, std::string>> cells;
    flatten("in.", r.inputs, cells);
    flatten("out.", r.outputs, cells);
    flatten("diag.", r.diagnostics, cells);
    for (const auto& [c, v] : cells)
      if (!seen[c]) {
        seen[c] = true;
        columns.push_back(c);
      }
    rows.push_back(std::move(cells));
  }
  os << "scenario,id,sweep_index,config_hash,status";
  for (const auto& c : columns) os << ',' << csv_escape(c);
  os << '\n';
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    std::map<std::string, std::string> cell(rows[i].begin(), rows[i].end());
    os << csv_escape(r.scenario) << ',' << csv_escape(r.id) << ',' << r.sweep_index << ',' << hash_hex(r.config_hash)
       << ',' << csv_escape(r.status);
    for (const auto& c : columns) {
      os << ',';
      const auto it = cell.find(c);
      if (it != cell.end()) os << it->second;
    }
    os << '\n';
  }
}

void write_json(std::ostream& os, const std::vector<ResultRecord>& records) {
  auto block = [&](const char* name, const std::vector<Field>& fields) {
    os << "    " << json_string(name) << ": {";
    for (std::size_t i = 0; i < fields.size(); ++i)
      os << (i ? ", " : "") << json_string(fields[i].name) << ": " << json_value(fields[i].value);
    os << "}";
  };
  os << "[\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    os << "  {\n";
    os << "    \"scenario\": " << json_string(r.scenario) << ",\n";
    os << "    \"id\": " << json_string(r.id) << ",\n";
    os << "    \"sweep_index\": " << r.sweep_index << ",\n";
    os << "    \"config_hash\": " << json_string(hash_hex(r.config_hash)) << ",\n";
    os << "    \"status\": " << json_string(r.status) << ",\n";
    block("inputs", r.inputs);
    os << ",\n";
    block("outputs", r.outputs);
    os << ",\n";
    block("diagnostics", r.diagnostics);
    os << "\n  }" << (i + 1 < records.size() ? "," : "") << "\n";
  }
  os << "]\n";
}

void write_timings(std::ostream& os, const std::vector<ResultRecord>& records) {
  os << "id,sweep_index,wall_time_s\n";
  for (const auto& r : records) os << csv_escape(r.id) << ',' << r.sweep_index << ',' << format_double(r.wall_time) << '\n';
}

std::vector<ResultRecord> read_json_records(std::istream& is) {
  const nlohmann::ordered_json doc = nlohmann::ordered_json::parse(is);
  if (!doc.is_array()) throw InputError("records: top level must be an array");
  std::vector<ResultRecord> out;
  for (const auto& j : doc) {
    ResultRecord r;
    r.scenario = j.at("scenario").get<std::string>();
    r.id = j.at("id").get<std::string>();
    r.sweep_index = j.at("sweep_index").get<std::size_t>();
    r.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
    r.status = j.at("status").get<std::string>();
    r.inputs = fields_from_json(j.at("inputs"));
    r.outputs = fields_from_json(j.at("outputs"));
    r.diagnostics = fields_from_json(j.at("diagnostics"));
    out.push_back(std::move(r));
  }
  return out;
}

EmittedFiles emit(const std::vector<ResultRecord>& records, const std::string& dir, const std::string& stem,
                  OutputFormat format) {
  if (records.empty()) throw ContractViolation("emit: no records");
  const std::filesystem::path base(dir);
  std::error_code ec;
  std::filesystem::create_directories(base, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
  std::ostringstream data, timings;
  if (format == OutputFormat::Csv)
    write_csv(data, records);
  else
    write_json(data, records);
  write_timings(timings, records);
  EmittedFiles files;
  files.data = (base / (stem + (format == OutputFormat::Csv ? ".csv" : ".json"))).string();
  files.timings = (base / (stem + ".timings.csv")).string();
  write_file(files.data, data.str());
  write_file(files.timings, timings.str());
  return files;
}

}  // namespace molbat
