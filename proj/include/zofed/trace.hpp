#pragma once

#include <string>
#include <utility>
#include <vector>

namespace zofed {

// One row of experiment telemetry. f_gap and grad_map_sq are measured at the
// projected server model; oracle_calls and wall_ms are cumulative.
struct TraceRecord {
  int round = 0;
  double f_gap = 0.0;
  double grad_map_sq = 0.0;
  long long oracle_calls = 0;
  double wall_ms = 0.0;
};

// CSV with header `round,f_gap,grad_map_sq,oracle_calls,wall_ms`, '.'
// decimal, LF line endings, shortest round-trip number formatting.
std::string trace_to_csv(const std::vector<TraceRecord>& trace);
void write_trace_csv(const std::string& path, const std::vector<TraceRecord>& trace);

// Sidecar key-value metadata (`key = value` lines), written atomically.
void write_meta_file(const std::string& path,
                     const std::vector<std::pair<std::string, std::string>>& entries);

}  // namespace zofed
