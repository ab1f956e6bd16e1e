#pragma once

#include <string>
#include <vector>

#include "ahip/taskdata/dataset.hpp"

namespace ahip {

/// IDX image file (magic 0x00000803): [n, 1, rows, cols] scaled to [0, 1].
Tensor<float> load_idx_images(const std::string& path);
/// IDX label file (magic 0x00000801).
std::vector<int> load_idx_labels(const std::string& path);

/// Images and labels of one split. Throws FormatError on a bad magic or a
/// count mismatch and IoError on a missing, empty or truncated file.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

void write_idx_images(const std::string& path, const Tensor<float>& images);
void write_idx_labels(const std::string& path, const std::vector<int>& labels);

}  // namespace ahip
