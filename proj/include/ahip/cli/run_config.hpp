#pragma once

#include <map>
#include <string>
#include <vector>

#include "ahip/lifelong/component_study.hpp"
#include "ahip/taskdata/manifest.hpp"

namespace ahip {

/// A run is a pure function of this plus the data files.
///
/// Flat key=value file with dotted sections:
///   profile, seed, out, precision (32 | 64), task_token, class_incremental,
///   val_fraction, workers,
///   data.stream (toy-vdd) | data.manifest (path), data.train_size, data.test_size,
///   base.epochs, base.batches_min, base.lr,
///   sampler.eps1, sampler.eps2,
///   search.<every SearchConfig field>,
///   study.epochs, study.batches_min, study.lr, study.components (comma list),
///   model.<ViTConfig field> overrides of the profile.
struct RunConfig {
  std::string profile = "tiny";
  std::uint64_t seed = 0;
  std::string out = "run";
  int precision = 32;
  bool task_token = false;
  bool class_incremental = false;
  double val_fraction = 0.1;
  int workers = 1;

  std::string data_stream = "toy-vdd";
  std::string data_manifest;
  int data_train_size = 540;
  int data_test_size = 256;

  LifelongConfig model;  // vit, search, sampler, base training
  StudyConfig study;
  std::vector<Component> study_components{Component::kHeadOnly, Component::kProj, Component::kMhsaLn1};

  /// Throws UsageError on unknown keys or bad values.
  static RunConfig from_key_values(const std::map<std::string, std::string>& kv);
  static RunConfig from_file(const std::string& path);
  /// Canonical key=value text (sorted keys); round-trips through from_key_values.
  std::string to_text() const;
  void validate() const;

  /// Task stream with IDX paths resolved against the manifest's directory.
  std::vector<TaskSource> task_sources() const;
};

}  // namespace ahip
