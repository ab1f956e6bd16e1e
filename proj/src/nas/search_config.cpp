#include "ahip/nas/search_config.hpp"

#include <string>

#include "ahip/numerics/errors.hpp"

namespace ahip {

void SearchConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw UsageError(std::string("search.") + name + " must be positive");
  };
  auto probability = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw UsageError(std::string("search.") + name + " must lie in [0, 1]");
  };
  positive(supernet_epochs, "supernet_epochs");
  positive(batches_per_epoch_min, "batches_per_epoch_min");
  positive(batch_size, "batch_size");
  positive(eval_batch_size, "eval_batch_size");
  positive(population, "population");
  positive(crossover_pool, "crossover_pool");
  positive(keep, "keep");
  positive(finetune_epochs, "finetune_epochs");
  positive(finetune_batches_min, "finetune_batches_min");
  if (evo_generations < 0) throw UsageError("search.evo_generations must be nonnegative");
  if (token_epochs < 0) throw UsageError("search.token_epochs must be nonnegative");
  if (n_mutants < 0 || n_crossover < 0 || n_mutants + n_crossover != population) {
    throw UsageError("search.n_mutants + search.n_crossover must equal search.population");
  }
  probability(mutation_prob, "mutation_prob");
  probability(finetune_drop_path, "finetune_drop_path");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) {
    throw UsageError("search.label_smoothing must lie in [0, 1)");
  }
  for (double lr : {supernet_lr, finetune_lr, token_supernet_lr, token_lr, token_finetune_lr}) {
    if (!(lr > 0.0)) throw UsageError("search learning rates must be positive");
  }
}

}  // namespace ahip
