#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mew {

enum class Errc {
  // input validation
  MissingColumn,
  NonFiniteValue,
  InvalidValue,
  DuplicateCellId,
  EmptyTable,
  InvalidConfig,
  InvalidManifest,
  TooFewCells,
  NoSeedLabels,
  DegenerateInput,
  EmptyEdgeList,
  UntypedNode,
  IndexOutOfRange,
  DimMismatch,
  EmptyGraph,
  SingleClass,
  NoComparablePairs,
  NoValidLabels,
  // files
  BadMagic,
  VersionMismatch,
  TruncatedFile,
  HashMismatch,
  MissingCache,
  Io,
};

std::string_view errc_name(Errc code);

/// Validation errors map to CLI exit code 2, everything else to 3.
bool is_validation_error(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace mew
