#pragma once

#include <cmath>
#include <iosfwd>
#include <string>
#include <vector>

#include "ahip/numerics/tensor.hpp"

namespace ahip {

/// One line of the run log. NaN fields are written as null.
struct RunRecord {
  int task = 0;
  std::string phase;
  int epoch_or_gen = 0;
  std::string strategy;
  double loss = NAN;
  double fitness_best = NAN;
  double fitness_mean = NAN;
  Index params_added = 0;
};

std::string to_json_line(const RunRecord& r);

/// Collects records and optionally mirrors them to a stream.
class RunLog {
 public:
  RunLog() = default;
  explicit RunLog(std::ostream* sink) : sink_(sink) {}

  void write(const RunRecord& r);
  const std::vector<RunRecord>& records() const { return records_; }
  std::string jsonl() const;

 private:
  std::ostream* sink_ = nullptr;
  std::vector<RunRecord> records_;
};

}  // namespace ahip
