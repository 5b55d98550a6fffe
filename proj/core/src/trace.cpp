#include "fpcav/trace.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fpcav/errors.hpp"
#include "fpcav/io.hpp"
#include "json.hpp"

namespace fpcav {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

std::string_view to_string(AbscissaKind kind) {
  switch (kind) {
    case AbscissaKind::voltage: return "voltage";
    case AbscissaKind::length: return "length";
    case AbscissaKind::frequency: return "frequency";
  }
  return "frequency";
}

AbscissaKind abscissa_kind_from_string(std::string_view name) {
  if (name == "voltage") return AbscissaKind::voltage;
  if (name == "length") return AbscissaKind::length;
  if (name == "frequency") return AbscissaKind::frequency;
  throw ConfigError("unknown abscissa kind '" + std::string(name) + "'");
}

std::string_view abscissa_units(AbscissaKind kind) {
  switch (kind) {
    case AbscissaKind::voltage: return "V";
    case AbscissaKind::length: return "m";
    case AbscissaKind::frequency: return "Hz";
  }
  return "";
}

void ReflectionTrace::validate() const {
  if (x.size() != power.size()) throw InvalidArgument("trace abscissa and power sizes differ");
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise_sigma must be non-negative");
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (!(x[i] > x[i - 1])) throw InvalidArgument("trace abscissa must be strictly increasing");
  }
  const double upper = 1.0 + 3.0 * noise_sigma;
  for (double p : power) {
    if (!(p >= 0.0 && p <= upper)) {
      throw InvalidArgument("trace power " + std::to_string(p) + " outside [0, 1 + 3 sigma]");
    }
  }
}

ReflectionTrace ReflectionTrace::window(double lo, double hi) const {
  ReflectionTrace out;
  out.kind = kind;
  out.noise_sigma = noise_sigma;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] >= lo && x[i] <= hi) {
      out.x.push_back(x[i]);
      out.power.push_back(power[i]);
    }
  }
  return out;
}

void write_trace_csv(const std::filesystem::path& path, const ReflectionTrace& trace) {
  std::string out = "x,power\n";
  out.reserve(trace.size() * 40);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out += io::format_double(trace.x[i]);
    out += ',';
    out += io::format_double(trace.power[i]);
    out += '\n';
  }
  io::write_file_atomic(path, out);
}

ReflectionTrace read_trace_csv(const std::filesystem::path& path, AbscissaKind kind) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace file " + path.string());
  ReflectionTrace trace;
  trace.kind = kind;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = trim(line);
    if (row.empty()) continue;
    if (!header_seen) {
      if (row != "x,power") throw ParseError("expected header 'x,power'", line_no);
      header_seen = true;
      continue;
    }
    const auto comma = row.find(',');
    double x = 0.0;
    double p = 0.0;
    if (comma == std::string_view::npos || !parse_double(row.substr(0, comma), x) ||
        !parse_double(row.substr(comma + 1), p)) {
      throw ParseError("malformed trace row '" + std::string(row) + "'", line_no);
    }
    if (!trace.x.empty() && !(x > trace.x.back())) {
      throw ParseError("abscissa not strictly increasing", line_no);
    }
    trace.x.push_back(x);
    trace.power.push_back(p);
  }
  if (!header_seen) throw ParseError("empty trace file", line_no == 0 ? 1 : line_no);
  return trace;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  p += ".json";
  return p;
}

void write_trace_sidecar(const std::filesystem::path& csv_path, const ReflectionTrace& trace,
                         std::string_view extra_json_fields) {
  nlohmann::ordered_json j;
  j["abscissa_kind"] = std::string(to_string(trace.kind));
  j["units"] = std::string(abscissa_units(trace.kind));
  j["noise_sigma"] = trace.noise_sigma;
  j["samples"] = trace.size();
  if (!extra_json_fields.empty()) {
    const auto extra = nlohmann::ordered_json::parse(extra_json_fields);
    for (const auto& [key, value] : extra.items()) j[key] = value;
  }
  io::write_file_atomic(sidecar_path(csv_path), j.dump(2) + "\n");
}

ReflectionTrace load_trace(const std::filesystem::path& csv_path) {
  AbscissaKind kind = AbscissaKind::frequency;
  double sigma = 0.0;
  const auto side = sidecar_path(csv_path);
  if (std::filesystem::exists(side)) {
    std::ifstream in(side);
    nlohmann::json j;
    try {
      in >> j;
      kind = abscissa_kind_from_string(j.at("abscissa_kind").get<std::string>());
      sigma = j.value("noise_sigma", 0.0);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("malformed trace sidecar " + side.string() + ": " + e.what());
    }
  }
  ReflectionTrace trace = read_trace_csv(csv_path, kind);
  trace.noise_sigma = sigma;
  return trace;
}

}  // namespace fpcav
