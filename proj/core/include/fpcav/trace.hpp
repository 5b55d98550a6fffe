#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fpcav {

enum class AbscissaKind { voltage, length, frequency };

std::string_view to_string(AbscissaKind kind);
AbscissaKind abscissa_kind_from_string(std::string_view name);
std::string_view abscissa_units(AbscissaKind kind);

/// Sampled reflection scan: strictly increasing abscissa, normalised power.
struct ReflectionTrace {
  AbscissaKind kind = AbscissaKind::frequency;
  std::vector<double> x;
  std::vector<double> power;
  double noise_sigma = 0.0;

  [[nodiscard]] std::size_t size() const { return x.size(); }

  /// Throws InvalidArgument when the abscissa is not strictly increasing,
  /// sizes differ, or a power value leaves [0, 1 + 3 noise_sigma].
  void validate() const;

  /// Samples with lo <= x <= hi.
  [[nodiscard]] ReflectionTrace window(double lo, double hi) const;
};

/// CSV with header `x,power`. ParseError carries the offending line number.
void write_trace_csv(const std::filesystem::path& path, const ReflectionTrace& trace);
ReflectionTrace read_trace_csv(const std::filesystem::path& path,
                               AbscissaKind kind = AbscissaKind::frequency);

/// JSON sidecar recording abscissa kind, units and noise level.
std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);
void write_trace_sidecar(const std::filesystem::path& csv_path, const ReflectionTrace& trace,
                         std::string_view extra_json_fields = {});

/// Reads the CSV and, if present, its sidecar.
ReflectionTrace load_trace(const std::filesystem::path& csv_path);

}  // namespace fpcav
