#include "zofed/csv.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace zofed {
namespace {

bool parse_double(std::string_view token, double& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  size_t start = 0;
  while (true) {
    const size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

Matrix load_matrix_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "': " + std::strerror(errno));

  std::vector<double> entries;
  int cols = -1;
  int rows = 0;
  std::string line;
  long line_no = 0;
  bool first_content_line = true;

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty()) continue;

    const auto fields = split_fields(view);
    std::vector<double> row;
    row.reserve(fields.size());
    bool numeric = true;
    size_t bad_col = 0;
    for (size_t c = 0; c < fields.size(); ++c) {
      double v;
      if (!parse_double(trim(fields[c]), v)) {
        numeric = false;
        bad_col = c;
        break;
      }
      row.push_back(v);
    }

    if (!numeric) {
      if (first_content_line) {
        first_content_line = false;  // header row
        continue;
      }
      throw ParseError("'" + path + "': not a number", line_no, static_cast<long>(bad_col + 1));
    }
    first_content_line = false;

    if (cols < 0) {
      cols = static_cast<int>(row.size());
    } else if (static_cast<int>(row.size()) != cols) {
      throw RaggedRows("'" + path + "': row " + std::to_string(line_no) + " has " +
                       std::to_string(row.size()) + " fields, expected " + std::to_string(cols));
    }
    entries.insert(entries.end(), row.begin(), row.end());
    ++rows;
  }
  if (in.bad()) throw IoError("read failure on '" + path + "'");
  if (rows == 0) throw ParseError("'" + path + "': no numeric rows", line_no, 1);

  return Matrix(rows, cols, std::move(entries));
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw NumericalFailure("format_double failed");
  return std::string(buf, ptr);
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      throw IoError("write failure on '" + tmp + "'");
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw IoError("rename to '" + path + "' failed: " + std::strerror(errno));
  }
}

void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::ostringstream out;
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

uint64_t fnv1a_bytes(const void* data, size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = 0xCBF29CE484222325ull;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ull;
  }
  return h;
}

uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for hashing");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  return fnv1a_bytes(bytes.data(), bytes.size());
}

}  // namespace zofed
