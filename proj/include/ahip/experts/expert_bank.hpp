#pragma once

#include <vector>

#include "ahip/numerics/checkpoint.hpp"
#include "ahip/numerics/parameter.hpp"

namespace ahip {

enum class AdapterMode { kPlain, kResidual };

/// Squeeze MLP stacked on a projection: A(v) = up(GELU(down(v))).
/// Plain mode outputs A(v); residual mode outputs v + A(v).
template <typename Scalar>
struct Adapter {
  Linear<Scalar> down;
  Linear<Scalar> up;
  AdapterMode mode = AdapterMode::kPlain;

  static Adapter create(const std::string& name, Index dim, Index hidden, Rng& rng,
                        AdapterMode mode = AdapterMode::kPlain) {
    return {Linear<Scalar>::create(name + ".down", dim, hidden, rng),
            Linear<Scalar>::create(name + ".up", hidden, dim, rng), mode};
  }

  Var<Scalar> operator()(const Var<Scalar>& v) const {
    Var<Scalar> a = up(gelu(down(v)));
    return mode == AdapterMode::kResidual ? add(v, a) : a;
  }

  Index parameter_count() const { return down.parameter_count() + up.parameter_count(); }
  void set_trainable(bool t) const {
    down.set_trainable(t);
    up.set_trainable(t);
  }
};

/// Closed-form parameter cost of the growing operations.
inline Index new_op_parameters(Index dim) { return dim * dim + dim; }
inline Index adapt_op_parameters(Index dim, Index hidden) { return 2 * dim * hidden + hidden + dim; }

enum class EntryKind { kExpert, kAdapter };

/// One unit of long-term memory at a block: a projection (expert) or an
/// adapter stacked on another entry, plus its mean class token.
template <typename Scalar>
struct BankEntry {
  EntryKind kind = EntryKind::kExpert;
  Linear<Scalar> proj;        // kExpert
  Adapter<Scalar> adapter;    // kAdapter
  int parent = -1;            // kAdapter: entry the adapter is stacked on
  Tensor<Scalar> mean_token;  // [d]
  int owner_task = 0;
  std::vector<int> children;  // adapters stacked on this entry by later tasks
  std::uint64_t sealed_hash = 0;

  std::vector<Parameter<Scalar>> parameters() const;
  Index parameter_count() const;
  /// Hash of parameters and mean token.
  std::uint64_t content_hash() const;
};

/// The per-block mixture of experts. Entries are appended
/// at consolidation and never modified afterwards.
template <typename Scalar>
class ExpertBank {
 public:
  ExpertBank() = default;
  ExpertBank(int depth, Index dim, Index adapter_hidden)
      : dim_(dim), adapter_hidden_(adapter_hidden), blocks_(static_cast<std::size_t>(depth)) {}

  int depth() const { return static_cast<int>(blocks_.size()); }
  Index dim() const { return dim_; }
  Index adapter_hidden() const { return adapter_hidden_; }
  int size(int block) const { return static_cast<int>(blocks_.at(static_cast<std::size_t>(block)).size()); }
  std::vector<int> sizes() const;

  /// Throws IntegrityError for a dangling reference.
  const BankEntry<Scalar>& entry(int block, int id) const;

  /// Appends a frozen expert / adapter and returns its id. The mean token
  /// and parameters are sealed by a content hash.
  int add_expert(int block, Linear<Scalar> proj, Tensor<Scalar> mean_token, int owner_task);
  int add_adapter(int block, int parent, Adapter<Scalar> adapter, Tensor<Scalar> mean_token,
                  int owner_task);

  /// Output of entry `id` for multi-head output u. Adapters apply their
  /// parent chain first.
  Var<Scalar> apply(int block, int id, const Var<Scalar>& u) const;

  /// True when every entry still matches the hash taken when it was added.
  bool verify_sealed() const;
  std::uint64_t content_hash() const;
  std::vector<Parameter<Scalar>> parameters() const;

  void save(Checkpoint& ck) const;
  static ExpertBank load(const Checkpoint& ck);

 private:
  Index dim_ = 0;
  Index adapter_hidden_ = 0;
  std::vector<std::vector<BankEntry<Scalar>>> blocks_;
};

}  // namespace ahip
