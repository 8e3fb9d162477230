#pragma once

#include <stdexcept>
#include <string>

namespace evpower {

/// Error categories surfaced by the toolkit. The CLI prints the category
/// name verbatim so scripts can dispatch on it.
enum class Errc {
  LengthMismatch,
  TooShort,
  DegenerateRange,
  EmptySplit,
  ParseError,
  NonMonotonicTime,
  EmptyFile,
  NotSymmetric,
  NoConvergence,
  InvalidGeometry,
  ShapeMismatch,
  EmptyDataset,
  CorruptFile,
  SpecMismatch,
  TooFewSamples,
  DegenerateEntropy,
  TooFewBatches,
  DegenerateSegment,
  MissingCoeffs,
  TooShortTrip,
  SingularSystem,
  ZeroVariance,
  ZeroEnergy,
  TooFewWindows,
  DegenerateSample,
  IoError,
  InvalidArgument,
};

const char* errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }
  const char* code_name() const noexcept { return errc_name(code_); }

 private:
  Errc code_;
};

}  // namespace evpower
