#pragma once

#include <stdexcept>
#include <string>

namespace bracket {

/**
 * Error taxonomy.
 *
 * The hierarchy mirrors the CLI exit-code partition:
 *   InputError        -> exit 2 (bad files, schemas, flag values, domains)
 *   ComputationError  -> exit 3 (singular fits, empty cells, degenerate resampling)
 *   VerificationError -> exit 4 (self-check assertions that fail under --verify)
 */
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Problems with user-supplied inputs: files, schemas, parameter values.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A named column is absent or the file layout is unusable.
class SchemaError : public InputError {
 public:
  using InputError::InputError;
};

/// A cell failed to parse as the required numeric type (or is non-finite).
class ParseError : public InputError {
 public:
  using InputError::InputError;
};

/// A parsed value lies outside its allowed domain (e.g. w not in {0,1}).
class DomainError : public InputError {
 public:
  using InputError::InputError;
};

/// A caller-visible precondition on arguments or dataset shape is violated.
class PreconditionError : public InputError {
 public:
  using InputError::InputError;
};

/// Numeric/structural failures arising during estimation itself.
class ComputationError : public Error {
 public:
  using Error::Error;
};

/// A least-squares design matrix is rank deficient where a full rank is required.
class SingularityError : public ComputationError {
 public:
  using ComputationError::ComputationError;
};

/// A sample became empty or otherwise unusable mid-computation
/// (e.g. all treated units trimmed, all kernel weights underflowed).
class DegenerateSampleError : public ComputationError {
 public:
  using ComputationError::ComputationError;
};

/// A --verify style self-check failed; the message names the violated property.
class VerificationError : public Error {
 public:
  using Error::Error;
};

}  // namespace bracket
