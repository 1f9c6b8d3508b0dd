#pragma once

#include <string>

#include "zofed/matrix.hpp"

namespace zofed {

// Reads a rectangular numeric CSV ('.' decimal, comma separators, optional
// single header row auto-detected). Rows become matrix rows.
// Throws IoError, ParseError(line, col), RaggedRows.
Matrix load_matrix_csv(const std::string& path);

// Writes a matrix as CSV with shortest round-trip number formatting and LF
// line endings, atomically (temp file + rename).
void write_matrix_csv(const std::string& path, const Matrix& m);

// Shortest round-trip decimal form of a double, locale-independent.
std::string format_double(double v);

// Atomic whole-file write: the target is either fully written or absent.
void write_file_atomic(const std::string& path, const std::string& content);

// FNV-1a 64-bit hash of a file's bytes; used to pin frozen assets.
uint64_t fnv1a_file(const std::string& path);
uint64_t fnv1a_bytes(const void* data, size_t n);

}  // namespace zofed
