#include "zofed/trace.hpp"

#include <sstream>

#include "zofed/csv.hpp"

namespace zofed {

std::string trace_to_csv(const std::vector<TraceRecord>& trace) {
  std::ostringstream out;
  out << "round,f_gap,grad_map_sq,oracle_calls,wall_ms\n";
  for (const TraceRecord& r : trace) {
    out << r.round << ',' << format_double(r.f_gap) << ',' << format_double(r.grad_map_sq) << ','
        << r.oracle_calls << ',' << format_double(r.wall_ms) << '\n';
  }
  return out.str();
}

void write_trace_csv(const std::string& path, const std::vector<TraceRecord>& trace) {
  write_file_atomic(path, trace_to_csv(trace));
}

void write_meta_file(const std::string& path,
                     const std::vector<std::pair<std::string, std::string>>& entries) {
  std::ostringstream out;
  for (const auto& [k, v] : entries) out << k << " = " << v << '\n';
  write_file_atomic(path, out.str());
}

}  // namespace zofed
