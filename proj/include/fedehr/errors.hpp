#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fedehr {

// Base class for every error thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- dataset ---------------------------------------------------------------

struct MalformedRow : Error {
  std::size_t row;  // 1-based data-row index (header excluded)
  MalformedRow(std::size_t row_, const std::string& what_)
      : Error("row " + std::to_string(row_) + ": " + what_), row(row_) {}
};

struct MissingColumn : Error {
  using Error::Error;
};
struct LengthMismatch : Error {
  using Error::Error;
};
struct DegenerateColumn : Error {
  using Error::Error;
};
struct UnknownColumn : Error {
  using Error::Error;
};
struct UnknownCategory : Error {
  using Error::Error;
};
struct TooManyClients : Error {
  using Error::Error;
};
struct ExhaustedSpace : Error {
  using Error::Error;
};

// --- models ----------------------------------------------------------------

struct SingularMatrix : Error {
  using Error::Error;
};
struct ShapeMismatch : Error {
  using Error::Error;
};
struct EmptyShard : Error {
  using Error::Error;
};
struct ZeroVariance : Error {
  using Error::Error;
};

// --- fedlearn --------------------------------------------------------------

struct EmptyUpdates : Error {
  using Error::Error;
};
struct ArityMismatch : Error {
  using Error::Error;
};
struct NonFinite : Error {
  using Error::Error;
};

// --- privacy ---------------------------------------------------------------

struct NonNumericColumn : Error {
  using Error::Error;
};
struct MalformedSSN : Error {
  using Error::Error;
};
struct BadKeyLength : Error {
  using Error::Error;
};
struct AuthenticationFailure : Error {
  using Error::Error;
};
struct TooFewRows : Error {
  using Error::Error;
};

// --- audit -----------------------------------------------------------------

struct Unauthorized : Error {
  using Error::Error;
};

}  // namespace fedehr
