#pragma once

#include <cstdint>
#include <utility>

#include "ahip/taskdata/dataset.hpp"

namespace ahip {

/// Per class, round(val_fraction * n_class) samples go to validation,
/// chosen by a shuffle seeded from `seed`. Both sides keep stored order.
std::pair<std::vector<Index>, std::vector<Index>> stratified_split(const std::vector<int>& labels,
                                                                   double val_fraction,
                                                                   std::uint64_t seed);

/// Carves `val` out of `train`. Throws InputError unless 0 <= val_fraction < 1.
TaskDataset make_splits(const TaskDataset& dataset, double val_fraction, std::uint64_t seed);

}  // namespace ahip
