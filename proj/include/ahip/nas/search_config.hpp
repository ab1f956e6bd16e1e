#pragma once

namespace ahip {

struct SearchConfig {
  int supernet_epochs = 60;
  int batches_per_epoch_min = 15;
  int batch_size = 32;
  int eval_batch_size = 128;

  int evo_generations = 20;
  int population = 50;
  double mutation_prob = 0.1;
  int n_mutants = 25;
  int n_crossover = 25;
  int crossover_pool = 10;
  int keep = 50;

  int finetune_epochs = 30;
  int finetune_batches_min = 30;
  double finetune_drop_path = 0.25;
  double label_smoothing = 0.1;

  double supernet_lr = 1e-3;
  double finetune_lr = 1e-3;
  /// With a task token: token and supernet rates during the search, and
  /// the token rate while it is first learned / finetuned.
  double token_supernet_lr = 5e-4;
  double token_lr = 3e-3;
  double token_finetune_lr = 1e-3;
  int token_epochs = 10;

  /// Throws UsageError on a non-positive size, a probability outside
  /// [0, 1], or n_mutants + n_crossover != population.
  void validate() const;
};

}  // namespace ahip
