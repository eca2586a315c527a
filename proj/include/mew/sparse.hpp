#pragma once

#include <cstdint>
#include <vector>

namespace mew {

/// Square matrix in compressed-row form. Column indices are sorted within
/// each row and explicit zeros are never stored.
struct SparseMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> row_offsets;  // n + 1 entries
  std::vector<std::uint32_t> columns;
  std::vector<double> values;

  std::size_t nnz() const { return values.size(); }
};

}  // namespace mew
