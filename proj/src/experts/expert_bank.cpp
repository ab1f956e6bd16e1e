#include "ahip/experts/expert_bank.hpp"

#include <sstream>

namespace ahip {

namespace {

std::string entry_prefix(int block, int id) {
  return "bank.b" + std::to_string(block) + ".e" + std::to_string(id);
}

}  // namespace

template <typename Scalar>
std::vector<Parameter<Scalar>> BankEntry<Scalar>::parameters() const {
  if (kind == EntryKind::kExpert) return {proj.weight, proj.bias};
  return {adapter.down.weight, adapter.down.bias, adapter.up.weight, adapter.up.bias};
}

template <typename Scalar>
Index BankEntry<Scalar>::parameter_count() const {
  return kind == EntryKind::kExpert ? proj.parameter_count() : adapter.parameter_count();
}

template <typename Scalar>
std::uint64_t BankEntry<Scalar>::content_hash() const {
  std::vector<std::uint64_t> h;
  for (const auto& p : parameters()) h.push_back(p.content_hash());
  h.push_back(mean_token.content_hash());
  h.push_back(static_cast<std::uint64_t>(parent + 1));
  h.push_back(adapter.mode == AdapterMode::kResidual);
  return fnv1a64(h.data(), h.size() * sizeof(std::uint64_t));
}

template <typename Scalar>
std::vector<int> ExpertBank<Scalar>::sizes() const {
  std::vector<int> out;
  for (int l = 0; l < depth(); ++l) out.push_back(size(l));
  return out;
}

template <typename Scalar>
const BankEntry<Scalar>& ExpertBank<Scalar>::entry(int block, int id) const {
  if (block < 0 || block >= depth() || id < 0 || id >= size(block)) {
    throw IntegrityError("bank: no entry " + std::to_string(id) + " at block " +
                         std::to_string(block));
  }
  return blocks_[static_cast<std::size_t>(block)][static_cast<std::size_t>(id)];
}

template <typename Scalar>
int ExpertBank<Scalar>::add_expert(int block, Linear<Scalar> proj, Tensor<Scalar> mean_token,
                                   int owner_task) {
  if (proj.in_features() != dim_ || proj.out_features() != dim_ || mean_token.numel() != dim_) {
    throw DimensionError("bank: expert does not match model width");
  }
  auto& entries = blocks_.at(static_cast<std::size_t>(block));
  const int id = static_cast<int>(entries.size());
  BankEntry<Scalar> e;
  e.kind = EntryKind::kExpert;
  e.proj = proj.clone(entry_prefix(block, id) + ".proj");
  e.proj.set_trainable(false);
  e.mean_token = std::move(mean_token);
  e.owner_task = owner_task;
  e.sealed_hash = e.content_hash();
  entries.push_back(std::move(e));
  return id;
}

template <typename Scalar>
int ExpertBank<Scalar>::add_adapter(int block, int parent, Adapter<Scalar> adapter,
                                    Tensor<Scalar> mean_token, int owner_task) {
  entry(block, parent);
  if (adapter.down.in_features() != dim_ || adapter.up.out_features() != dim_ ||
      mean_token.numel() != dim_) {
    throw DimensionError("bank: adapter does not match model width");
  }
  auto& entries = blocks_[static_cast<std::size_t>(block)];
  const int id = static_cast<int>(entries.size());
  const std::string prefix = entry_prefix(block, id);
  BankEntry<Scalar> e;
  e.kind = EntryKind::kAdapter;
  e.adapter = {adapter.down.clone(prefix + ".adapter.down"), adapter.up.clone(prefix + ".adapter.up"),
               adapter.mode};
  e.adapter.set_trainable(false);
  e.parent = parent;
  e.mean_token = std::move(mean_token);
  e.owner_task = owner_task;
  e.sealed_hash = e.content_hash();
  entries.push_back(std::move(e));
  // The child list is bookkeeping only and is not part of the parent's hash.
  entries[static_cast<std::size_t>(parent)].children.push_back(id);
  return id;
}

template <typename Scalar>
Var<Scalar> ExpertBank<Scalar>::apply(int block, int id, const Var<Scalar>& u) const {
  const auto& e = entry(block, id);
  if (e.kind == EntryKind::kExpert) return e.proj(u);
  return e.adapter(apply(block, e.parent, u));
}

template <typename Scalar>
bool ExpertBank<Scalar>::verify_sealed() const {
  for (const auto& entries : blocks_) {
    for (const auto& e : entries) {
      if (e.content_hash() != e.sealed_hash) return false;
    }
  }
  return true;
}

template <typename Scalar>
std::uint64_t ExpertBank<Scalar>::content_hash() const {
  std::vector<std::uint64_t> h;
  for (const auto& entries : blocks_) {
    for (const auto& e : entries) h.push_back(e.content_hash());
  }
  return fnv1a64(h.data(), h.size() * sizeof(std::uint64_t));
}

template <typename Scalar>
std::vector<Parameter<Scalar>> ExpertBank<Scalar>::parameters() const {
  std::vector<Parameter<Scalar>> out;
  for (const auto& entries : blocks_) {
    for (const auto& e : entries) {
      for (auto& p : e.parameters()) out.push_back(p);
    }
  }
  return out;
}

template <typename Scalar>
void ExpertBank<Scalar>::save(Checkpoint& ck) const {
  std::ostringstream meta;
  meta << "depth=" << depth() << "\ndim=" << dim_ << "\nadapter_hidden=" << adapter_hidden_ << "\n";
  for (int l = 0; l < depth(); ++l) {
    for (int id = 0; id < size(l); ++id) {
      const auto& e = entry(l, id);
      meta << "entry " << l << " " << id << " "
           << (e.kind == EntryKind::kExpert ? "expert" : "adapter") << " parent=" << e.parent
           << " owner=" << e.owner_task << "\n";
      for (const auto& p : e.parameters()) ck.put(p.name(), p.value());
      ck.put(entry_prefix(l, id) + ".mean_token", e.mean_token);
    }
  }
  ck.put_text("bank.meta", meta.str());
}

template <typename Scalar>
ExpertBank<Scalar> ExpertBank<Scalar>::load(const Checkpoint& ck) {
  std::istringstream meta(ck.get_text("bank.meta"));
  std::string line;
  int depth = -1;
  Index dim = -1, hidden = -1;
  ExpertBank bank;
  auto header = [&](const std::string& key) -> long {
    if (!std::getline(meta, line) || line.rfind(key + "=", 0) != 0) {
      throw FormatError("bank.meta: expected " + key);
    }
    return std::stol(line.substr(key.size() + 1));
  };
  depth = static_cast<int>(header("depth"));
  dim = header("dim");
  hidden = header("adapter_hidden");
  bank = ExpertBank(depth, dim, hidden);
  while (std::getline(meta, line)) {
    if (line.empty()) continue;
    std::istringstream in(line);
    std::string tag, kind, parent_kv, owner_kv;
    int l = -1, id = -1;
    in >> tag >> l >> id >> kind >> parent_kv >> owner_kv;
    if (tag != "entry" || !in || l < 0 || l >= depth || id != bank.size(l)) {
      throw FormatError("bank.meta: bad line '" + line + "'");
    }
    const int parent = std::stoi(parent_kv.substr(parent_kv.find('=') + 1));
    const int owner = std::stoi(owner_kv.substr(owner_kv.find('=') + 1));
    const std::string prefix = entry_prefix(l, id);
    Tensor<Scalar> mean = ck.template get<Scalar>(prefix + ".mean_token");
    auto param = [&](const std::string& name) {
      return Parameter<Scalar>(name, ck.template get<Scalar>(name), false);
    };
    if (kind == "expert") {
      Linear<Scalar> proj{param(prefix + ".proj.weight"), param(prefix + ".proj.bias")};
      bank.add_expert(l, proj, std::move(mean), owner);
    } else if (kind == "adapter") {
      Adapter<Scalar> a{{param(prefix + ".adapter.down.weight"), param(prefix + ".adapter.down.bias")},
                        {param(prefix + ".adapter.up.weight"), param(prefix + ".adapter.up.bias")},
                        AdapterMode::kResidual};
      bank.add_adapter(l, parent, a, std::move(mean), owner);
    } else {
      throw FormatError("bank.meta: unknown entry kind '" + kind + "'");
    }
  }
  return bank;
}

template struct BankEntry<float>;
template struct BankEntry<double>;
template class ExpertBank<float>;
template class ExpertBank<double>;

}  // namespace ahip
