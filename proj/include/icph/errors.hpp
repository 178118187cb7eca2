#pragma once

#include <stdexcept>
#include <string>

namespace icph {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- data / input errors ---
struct DimensionMismatch : Error {
  using Error::Error;
};
struct DegenerateData : Error {
  using Error::Error;
};
struct InsufficientData : Error {
  using Error::Error;
};
struct InvalidSpec : Error {
  using Error::Error;
};
struct InvalidOptions : Error {
  using Error::Error;
};
struct EmptyEnvironment : Error {
  using Error::Error;
};
struct MissingColumn : Error {
  using Error::Error;
};
struct NonNumericValue : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct SubsetBlowup : Error {
  using Error::Error;
};

// --- numerical errors ---
struct DomainError : Error {
  using Error::Error;
};
struct ReducibleChain : Error {
  using Error::Error;
};
struct NonFiniteLikelihood : Error {
  using Error::Error;
};
struct NonFiniteObjective : Error {
  using Error::Error;
};
struct AllRestartsFailed : Error {
  using Error::Error;
};
struct SingularInformation : Error {
  using Error::Error;
};
struct IntegrationFailure : Error {
  using Error::Error;
};

}  // namespace icph
