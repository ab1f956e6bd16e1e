#pragma once

#include <string>
#include <vector>

namespace ahip {

/// a(n, i): accuracy on task i after learning tasks 1..n (1-based, i <= n).
class AccuracyMatrix {
 public:
  AccuracyMatrix() = default;
  explicit AccuracyMatrix(int tasks);

  int size() const { return static_cast<int>(rows_.size()); }
  /// Grows to n rows if needed. Throws InputError for i > n or a value
  /// outside [0, 1].
  void set(int n, int i, double accuracy);
  double at(int n, int i) const;
  bool has(int n, int i) const;
  std::vector<double> row(int n) const;

  /// Tab-separated lower triangle, "-" above the diagonal.
  std::string to_text(int precision = 4) const;

 private:
  std::vector<std::vector<double>> rows_;
};

/// (1/N) sum_n a(N, n).
double average_accuracy(const AccuracyMatrix& m, int n_tasks);

/// (1/(N-1)) sum_{n<N} (max_{j in [n, N-1]} a(j, n) - a(N, n)); 0 for N = 1.
double average_forgetting(const AccuracyMatrix& m, int n_tasks);

/// Mean of per-task transfer accuracies (tasks 2..N).
double mean_transfer_accuracy(const std::vector<double>& per_task);

}  // namespace ahip
