#pragma once

#include <map>
#include <string>
#include <vector>

#include "ahip/taskdata/synth.hpp"

namespace ahip {

/// Flat key=value lines; '#' starts a comment. Throws FormatError on a
/// line without '=' and on a repeated key.
std::map<std::string, std::string> parse_key_values(const std::string& text);
std::map<std::string, std::string> read_key_values(const std::string& path);

/// One task of a stream: either IDX files or a synthetic spec.
struct TaskSource {
  std::string name;
  bool synthetic = true;
  SynthTaskSpec synth;
  std::string train_images, train_labels, test_images, test_labels;
  int num_classes = 10;
  int channels = 1;
  int height = 28;
  int width = 28;
  AugmentPolicy augment;
};

/// Stream manifest. Either `stream=toy-vdd` (optional train_size,
/// test_size) or `tasks=N` followed by `task.K.*` keys for K = 1..N:
///   task.K.name, task.K.kind (idx | synth), task.K.classes,
///   task.K.train_images, task.K.train_labels, task.K.test_images,
///   task.K.test_labels, task.K.height, task.K.width, task.K.channels,
///   task.K.synth.{style,transform,theta,base_seed,sample_seed,
///   transform_seed,train_size,test_size}, task.K.augment.{crop,hflip,vflip}.
/// Relative paths resolve against `base_dir`.
std::vector<TaskSource> parse_stream_manifest(const std::map<std::string, std::string>& kv,
                                              const std::string& base_dir = "");

/// Builds the task's data (train/test; val still empty). Throws UsageError
/// when an IDX path is missing.
TaskDataset load_task(const TaskSource& source);

}  // namespace ahip
