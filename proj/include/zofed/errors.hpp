#pragma once

#include <stdexcept>
#include <string>

namespace zofed {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A numerical routine failed to produce a trustworthy result
// (factorization breakdown, non-finite values).
struct NumericalFailure : Error {
  using Error::Error;
};

// Projection input lies outside the region where the nearest-point map is
// unique: zero norm, rank deficiency, or a tie at the truncation rank.
struct DegenerateProjection : Error {
  using Error::Error;
};

struct MembershipViolation : Error {
  using Error::Error;
};

struct NonTangentDirection : Error {
  using Error::Error;
};

// Smoothing parameter exceeds the manifold's uniqueness-tube radius.
struct SmoothingOutOfTube : Error {
  using Error::Error;
};

struct MissingExactGradient : Error {
  using Error::Error;
};

// An iterate left the proximal-smoothness tube. Fatal by design: silently
// projecting back would mask a mis-tuned step size.
struct TubeEscape : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct ParseError : Error {
  ParseError(const std::string& what, long line, long col);
  long line;
  long col;
};

struct RaggedRows : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

}  // namespace zofed
