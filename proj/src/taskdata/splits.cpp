#include "ahip/taskdata/splits.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ahip/numerics/errors.hpp"

namespace ahip {

std::pair<std::vector<Index>, std::vector<Index>> stratified_split(const std::vector<int>& labels,
                                                                   double val_fraction,
                                                                   std::uint64_t seed) {
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw InputError("make_splits: val_fraction must lie in [0, 1)");
  }
  std::map<int, std::vector<Index>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(static_cast<Index>(i));
  std::vector<char> is_val(labels.size(), 0);
  for (auto& [label, members] : by_class) {
    Rng rng = Rng::stream(seed, "split.class." + std::to_string(label));
    rng.shuffle(members);
    const auto k = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(members.size())));
    for (std::size_t i = 0; i < k; ++i) is_val[static_cast<std::size_t>(members[i])] = 1;
  }
  std::pair<std::vector<Index>, std::vector<Index>> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (is_val[i] ? out.second : out.first).push_back(static_cast<Index>(i));
  }
  return out;
}

TaskDataset make_splits(const TaskDataset& dataset, double val_fraction, std::uint64_t seed) {
  auto [train_idx, val_idx] = stratified_split(dataset.train.labels, val_fraction, seed);
  TaskDataset out = dataset;
  if (val_idx.empty()) {
    out.val = Dataset{};
    return out;
  }
  out.train = subset(dataset.train, train_idx);
  out.val = subset(dataset.train, val_idx);
  return out;
}

}  // namespace ahip
