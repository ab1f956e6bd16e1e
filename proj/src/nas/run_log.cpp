#include "ahip/nas/run_log.hpp"

#include <ostream>

#include <json.hpp>

namespace ahip {

namespace {

nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::string to_json_line(const RunRecord& r) {
  nlohmann::ordered_json j;
  j["task"] = r.task;
  j["phase"] = r.phase;
  j["epoch_or_gen"] = r.epoch_or_gen;
  j["strategy"] = r.strategy.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(r.strategy);
  j["loss"] = number_or_null(r.loss);
  j["fitness_best"] = number_or_null(r.fitness_best);
  j["fitness_mean"] = number_or_null(r.fitness_mean);
  j["params_added"] = r.params_added;
  return j.dump();
}

void RunLog::write(const RunRecord& r) {
  records_.push_back(r);
  if (sink_) *sink_ << to_json_line(r) << '\n' << std::flush;
}

std::string RunLog::jsonl() const {
  std::string out;
  for (const auto& r : records_) out += to_json_line(r) + "\n";
  return out;
}

}  // namespace ahip
