#include "ahip/cli/run_config.hpp"

#include <charconv>
#include <filesystem>
#include <functional>
#include <sstream>

#include "ahip/numerics/errors.hpp"

namespace ahip {

namespace {

using Setter = std::function<void(RunConfig&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  if constexpr (std::is_floating_point_v<T>) {
    std::size_t used = 0;
    try {
      out = static_cast<T>(std::stod(v, &used));
    } catch (const std::exception&) {
      used = 0;
    }
    if (v.empty() || used != v.size()) throw UsageError(key + ": expected a number, got '" + v + "'");
  } else {
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (v.empty() || ec != std::errc() || ptr != end) throw UsageError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw UsageError(key + ": expected true or false, got '" + v + "'");
}

std::string format_double(double v) {
  std::ostringstream o;
  o.precision(17);
  o << v;
  return o.str();
}

struct Field {
  Setter set;
  Getter get;
};

template <typename T, typename Access>
Field number_field(const std::string& key, Access access) {
  return {[key, access](RunConfig& c, const std::string& v) { access(c) = parse_number<T>(key, v); },
          [access](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(access(const_cast<RunConfig&>(c)));
            } else {
              return std::to_string(access(const_cast<RunConfig&>(c)));
            }
          }};
}

template <typename Access>
Field bool_field(const std::string& key, Access access) {
  return {[key, access](RunConfig& c, const std::string& v) { access(c) = parse_bool(key, v); },
          [access](const RunConfig& c) { return std::string(access(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

template <typename Access>
Field string_field(Access access) {
  return {[access](RunConfig& c, const std::string& v) { access(c) = v; },
          [access](const RunConfig& c) { return access(const_cast<RunConfig&>(c)); }};
}

#define AHIP_F(type, key, expr) {key, number_field<type>(key, [](RunConfig& c) -> type& { return expr; })}
#define AHIP_B(key, expr) {key, bool_field(key, [](RunConfig& c) -> bool& { return expr; })}
#define AHIP_S(key, expr) {key, string_field([](RunConfig& c) -> std::string& { return expr; })}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      AHIP_S("profile", c.profile),
      AHIP_F(std::uint64_t, "seed", c.seed),
      AHIP_S("out", c.out),
      AHIP_F(int, "precision", c.precision),
      AHIP_B("task_token", c.task_token),
      AHIP_B("class_incremental", c.class_incremental),
      AHIP_F(double, "val_fraction", c.val_fraction),
      AHIP_F(int, "workers", c.workers),
      AHIP_S("data.stream", c.data_stream),
      AHIP_S("data.manifest", c.data_manifest),
      AHIP_F(int, "data.train_size", c.data_train_size),
      AHIP_F(int, "data.test_size", c.data_test_size),
      AHIP_F(int, "base.epochs", c.model.base_epochs),
      AHIP_F(int, "base.batches_min", c.model.base_batches_min),
      AHIP_F(double, "base.lr", c.model.base_lr),
      AHIP_F(int, "probe_size", c.model.probe_size),
      AHIP_F(double, "sampler.eps1", c.model.sampler.eps1),
      AHIP_F(double, "sampler.eps2", c.model.sampler.eps2),
      AHIP_F(int, "search.supernet_epochs", c.model.search.supernet_epochs),
      AHIP_F(int, "search.batches_per_epoch_min", c.model.search.batches_per_epoch_min),
      AHIP_F(int, "search.batch_size", c.model.search.batch_size),
      AHIP_F(int, "search.eval_batch_size", c.model.search.eval_batch_size),
      AHIP_F(int, "search.evo_generations", c.model.search.evo_generations),
      AHIP_F(int, "search.population", c.model.search.population),
      AHIP_F(double, "search.mutation_prob", c.model.search.mutation_prob),
      AHIP_F(int, "search.n_mutants", c.model.search.n_mutants),
      AHIP_F(int, "search.n_crossover", c.model.search.n_crossover),
      AHIP_F(int, "search.crossover_pool", c.model.search.crossover_pool),
      AHIP_F(int, "search.keep", c.model.search.keep),
      AHIP_F(int, "search.finetune_epochs", c.model.search.finetune_epochs),
      AHIP_F(int, "search.finetune_batches_min", c.model.search.finetune_batches_min),
      AHIP_F(double, "search.finetune_drop_path", c.model.search.finetune_drop_path),
      AHIP_F(double, "search.label_smoothing", c.model.search.label_smoothing),
      AHIP_F(double, "search.supernet_lr", c.model.search.supernet_lr),
      AHIP_F(double, "search.finetune_lr", c.model.search.finetune_lr),
      AHIP_F(double, "search.token_supernet_lr", c.model.search.token_supernet_lr),
      AHIP_F(double, "search.token_lr", c.model.search.token_lr),
      AHIP_F(double, "search.token_finetune_lr", c.model.search.token_finetune_lr),
      AHIP_F(int, "search.token_epochs", c.model.search.token_epochs),
      AHIP_F(int, "study.epochs", c.study.epochs),
      AHIP_F(int, "study.batches_min", c.study.min_batches),
      AHIP_F(double, "study.lr", c.study.lr),
      AHIP_F(int, "model.image_size", c.model.vit.image_size),
      AHIP_F(int, "model.patch_size", c.model.vit.patch_size),
      AHIP_F(int, "model.channels", c.model.vit.channels),
      AHIP_F(int, "model.depth", c.model.vit.depth),
      AHIP_F(int, "model.embed_dim", c.model.vit.embed_dim),
      AHIP_F(int, "model.num_heads", c.model.vit.num_heads),
      AHIP_F(int, "model.mlp_ratio", c.model.vit.mlp_ratio),
  };
  return table;
}

#undef AHIP_F
#undef AHIP_B
#undef AHIP_S

std::vector<Component> parse_components(const std::string& v) {
  std::vector<Component> out;
  std::stringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(component_from_string(item));
  }
  if (out.empty()) throw UsageError("study.components: empty list");
  return out;
}

}  // namespace

RunConfig RunConfig::from_key_values(const std::map<std::string, std::string>& kv) {
  RunConfig c;
  // the profile fixes the geometry first; model.* keys then override it
  if (auto it = kv.find("profile"); it != kv.end()) c.profile = it->second;
  c.model.vit = ViTConfig::from_profile(c.profile);
  for (const auto& [key, value] : kv) {
    if (key == "study.components") {
      c.study_components = parse_components(value);
      continue;
    }
    auto it = fields().find(key);
    if (it == fields().end()) throw UsageError("unknown config key '" + key + "'");
    it->second.set(c, value);
  }
  c.model.seed = c.seed;
  c.model.task_token = c.task_token;
  c.study.seed = c.seed;
  c.study.batch_size = c.model.search.batch_size;
  c.study.smoothing = c.model.search.label_smoothing;
  c.validate();
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  RunConfig c = from_key_values(read_key_values(path));
  if (!c.data_manifest.empty() && std::filesystem::path(c.data_manifest).is_relative()) {
    c.data_manifest = (std::filesystem::path(path).parent_path() / c.data_manifest).string();
  }
  return c;
}

std::string RunConfig::to_text() const {
  std::map<std::string, std::string> kv;
  for (const auto& [key, f] : fields()) kv[key] = f.get(*this);
  std::string comps;
  for (Component comp : study_components) comps += (comps.empty() ? "" : ",") + std::string(to_string(comp));
  kv["study.components"] = comps;
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

void RunConfig::validate() const {
  if (precision != 32 && precision != 64) throw UsageError("precision must be 32 or 64");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw UsageError("val_fraction must lie in (0, 1)");
  if (workers < 1) throw UsageError("workers must be at least 1");
  if (data_manifest.empty() && data_stream != "toy-vdd") throw UsageError("data.stream must be toy-vdd");
  if (data_train_size <= 0 || data_test_size <= 0) throw UsageError("data sizes must be positive");
  if (study.epochs <= 0 || study.min_batches <= 0 || !(study.lr > 0.0)) throw UsageError("study settings must be positive");
  try {
    model.validate();
  } catch (const InputError& e) {
    throw UsageError(e.what());
  }
}

std::vector<TaskSource> RunConfig::task_sources() const {
  if (data_manifest.empty()) {
    return parse_stream_manifest({{"stream", "toy-vdd"},
                                  {"train_size", std::to_string(data_train_size)},
                                  {"test_size", std::to_string(data_test_size)}});
  }
  if (!std::filesystem::exists(data_manifest)) throw UsageError("data.manifest: no such file " + data_manifest);
  return parse_stream_manifest(read_key_values(data_manifest),
                               std::filesystem::path(data_manifest).parent_path().string());
}

}  // namespace ahip
