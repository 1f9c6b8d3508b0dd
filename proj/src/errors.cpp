#include "zofed/errors.hpp"

namespace zofed {

ParseError::ParseError(const std::string& what, long line_, long col_)
    : Error(what + " (line " + std::to_string(line_) + ", col " + std::to_string(col_) + ")"),
      line(line_),
      col(col_) {}

}  // namespace zofed
