#include "ahip/taskdata/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ahip/numerics/errors.hpp"
#include "ahip/taskdata/idx.hpp"

namespace ahip {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

class Keys {
 public:
  Keys(const std::map<std::string, std::string>& kv, std::string prefix)
      : kv_(kv), prefix_(std::move(prefix)) {}

  bool has(const std::string& k) const { return kv_.count(prefix_ + k) != 0; }
  std::string str(const std::string& k, const std::string& fallback = "") const {
    auto it = kv_.find(prefix_ + k);
    return it == kv_.end() ? fallback : it->second;
  }
  long long integer(const std::string& k, long long fallback) const {
    if (!has(k)) return fallback;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(str(k), &used);
      if (used != str(k).size()) throw std::invalid_argument(k);
      return v;
    } catch (const std::exception&) {
      throw UsageError("manifest key " + prefix_ + k + ": expected an integer");
    }
  }
  double real(const std::string& k, double fallback) const {
    if (!has(k)) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(str(k), &used);
      if (used != str(k).size()) throw std::invalid_argument(k);
      return v;
    } catch (const std::exception&) {
      throw UsageError("manifest key " + prefix_ + k + ": expected a number");
    }
  }
  bool flag(const std::string& k, bool fallback) const {
    if (!has(k)) return fallback;
    const std::string v = str(k);
    if (v == "1" || v == "true" || v == "on") return true;
    if (v == "0" || v == "false" || v == "off") return false;
    throw UsageError("manifest key " + prefix_ + k + ": expected a boolean");
  }

 private:
  const std::map<std::string, std::string>& kv_;
  std::string prefix_;
};

std::string resolve(const std::string& base, const std::string& path) {
  if (path.empty() || base.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base) / path).string();
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("line " + std::to_string(number) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw FormatError("line " + std::to_string(number) + ": empty key");
    if (!kv.emplace(key, trim(line.substr(eq + 1))).second) {
      throw FormatError("line " + std::to_string(number) + ": duplicate key " + key);
    }
  }
  return kv;
}

std::map<std::string, std::string> read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_key_values(text.str());
}

std::vector<TaskSource> parse_stream_manifest(const std::map<std::string, std::string>& kv,
                                              const std::string& base_dir) {
  const Keys top(kv, "");
  std::vector<TaskSource> out;
  if (top.str("stream") == "toy-vdd") {
    for (const auto& spec : toy_vdd_stream(static_cast<int>(top.integer("train_size", 540)),
                                           static_cast<int>(top.integer("test_size", 256)))) {
      TaskSource src;
      src.name = spec.name;
      src.synth = spec;
      src.num_classes = spec.num_classes;
      src.height = src.width = spec.image_size;
      src.channels = spec.channels;
      out.push_back(src);
    }
    return out;
  }
  if (top.has("stream")) throw UsageError("unknown stream '" + top.str("stream") + "'");
  const long long n = top.integer("tasks", 0);
  if (n <= 0) throw UsageError("manifest: need stream=toy-vdd or tasks=N");
  for (long long k = 1; k <= n; ++k) {
    const Keys t(kv, "task." + std::to_string(k) + ".");
    TaskSource src;
    src.name = t.str("name", "task" + std::to_string(k));
    src.num_classes = static_cast<int>(t.integer("classes", 10));
    src.channels = static_cast<int>(t.integer("channels", 1));
    src.height = static_cast<int>(t.integer("height", 28));
    src.width = static_cast<int>(t.integer("width", src.height));
    src.augment.scale_crop = t.flag("augment.crop", false);
    src.augment.hflip = t.flag("augment.hflip", false);
    src.augment.vflip = t.flag("augment.vflip", false);
    const std::string kind = t.str("kind", "synth");
    if (kind == "idx") {
      src.synthetic = false;
      src.train_images = resolve(base_dir, t.str("train_images"));
      src.train_labels = resolve(base_dir, t.str("train_labels"));
      src.test_images = resolve(base_dir, t.str("test_images"));
      src.test_labels = resolve(base_dir, t.str("test_labels"));
    } else if (kind == "synth") {
      SynthTaskSpec& s = src.synth;
      s.name = src.name;
      s.num_classes = src.num_classes;
      s.channels = src.channels;
      s.image_size = src.height;
      s.style = synth_style_from_string(t.str("synth.style", "strokes"));
      s.transform = synth_transform_from_string(t.str("synth.transform", "identity"));
      s.theta = t.real("synth.theta", 0.0);
      s.base_seed = static_cast<std::uint64_t>(t.integer("synth.base_seed", 1001));
      s.sample_seed = static_cast<std::uint64_t>(t.integer("synth.sample_seed", 10 + k));
      s.transform_seed = static_cast<std::uint64_t>(t.integer("synth.transform_seed", 20 + k));
      s.train_size = static_cast<int>(t.integer("synth.train_size", 540));
      s.test_size = static_cast<int>(t.integer("synth.test_size", 256));
    } else {
      throw UsageError("task." + std::to_string(k) + ".kind must be idx or synth");
    }
    out.push_back(src);
  }
  return out;
}

TaskDataset load_task(const TaskSource& source) {
  TaskDataset task;
  if (source.synthetic) {
    task = synth_task(source.synth);
  } else {
    for (const auto* p : {&source.train_images, &source.train_labels, &source.test_images, &source.test_labels}) {
      if (p->empty()) throw UsageError("task " + source.name + ": missing IDX path");
      if (!std::filesystem::exists(*p)) throw UsageError("task " + source.name + ": no such file " + *p);
    }
    task.name = source.name;
    task.train = load_idx(source.train_images, source.train_labels);
    task.test = load_idx(source.test_images, source.test_labels);
    task.num_classes = source.num_classes;
    task.channels = source.channels;
    task.height = source.height;
    task.width = source.width;
  }
  task.augment = source.augment;
  task.validate();
  return task;
}

}  // namespace ahip
