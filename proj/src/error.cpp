#include "mew/error.hpp"

namespace mew {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::InvalidValue: return "InvalidValue";
    case Errc::DuplicateCellId: return "DuplicateCellId";
    case Errc::EmptyTable: return "EmptyTable";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::InvalidManifest: return "InvalidManifest";
    case Errc::TooFewCells: return "TooFewCells";
    case Errc::NoSeedLabels: return "NoSeedLabels";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::EmptyEdgeList: return "EmptyEdgeList";
    case Errc::UntypedNode: return "UntypedNode";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::EmptyGraph: return "EmptyGraph";
    case Errc::SingleClass: return "SingleClass";
    case Errc::NoComparablePairs: return "NoComparablePairs";
    case Errc::NoValidLabels: return "NoValidLabels";
    case Errc::BadMagic: return "BadMagic";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::HashMismatch: return "HashMismatch";
    case Errc::MissingCache: return "MissingCache";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

bool is_validation_error(Errc code) {
  switch (code) {
    case Errc::MissingCache:
    case Errc::Io:
    case Errc::BadMagic:
    case Errc::VersionMismatch:
    case Errc::TruncatedFile:
    case Errc::HashMismatch:
      return false;
    default:
      return true;
  }
}

}  // namespace mew
