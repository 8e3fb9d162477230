#include "evpower/errors.hpp"

namespace evpower {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::TooShort: return "TooShort";
    case Errc::DegenerateRange: return "DegenerateRange";
    case Errc::EmptySplit: return "EmptySplit";
    case Errc::ParseError: return "ParseError";
    case Errc::NonMonotonicTime: return "NonMonotonicTime";
    case Errc::EmptyFile: return "EmptyFile";
    case Errc::NotSymmetric: return "NotSymmetric";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::InvalidGeometry: return "InvalidGeometry";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::CorruptFile: return "CorruptFile";
    case Errc::SpecMismatch: return "SpecMismatch";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::DegenerateEntropy: return "DegenerateEntropy";
    case Errc::TooFewBatches: return "TooFewBatches";
    case Errc::DegenerateSegment: return "DegenerateSegment";
    case Errc::MissingCoeffs: return "MissingCoeffs";
    case Errc::TooShortTrip: return "TooShortTrip";
    case Errc::SingularSystem: return "SingularSystem";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::ZeroEnergy: return "ZeroEnergy";
    case Errc::TooFewWindows: return "TooFewWindows";
    case Errc::DegenerateSample: return "DegenerateSample";
    case Errc::IoError: return "IoError";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace evpower
