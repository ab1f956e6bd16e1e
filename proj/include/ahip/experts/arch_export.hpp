#pragma once

#include <string>
#include <vector>

#include "ahip/experts/grow_op.hpp"

namespace ahip {

/// One JSON record per line:
///   {"task":2,"ops":[{"op":"R","target":0},{"op":"N","created":1},...]}
std::string arch_to_machine(const std::vector<PathSpec>& paths);
/// Inverse of arch_to_machine. Throws FormatError on malformed input.
std::vector<PathSpec> arch_from_machine(const std::string& text);

/// Aligned grid, one row per task and one column per block:
///
///   Task | B1    B2    B3    B4
///   -----+-----------------------
///      1 | N     N     N     N
///      2 | R(0)  A(0)  N     S
std::string arch_to_grid(const std::vector<PathSpec>& paths);

}  // namespace ahip
