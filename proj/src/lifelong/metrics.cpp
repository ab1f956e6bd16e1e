#include "ahip/lifelong/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ahip/numerics/errors.hpp"

namespace ahip {

AccuracyMatrix::AccuracyMatrix(int tasks) {
  for (int n = 1; n <= tasks; ++n) rows_.emplace_back(static_cast<std::size_t>(n), NAN);
}

void AccuracyMatrix::set(int n, int i, double accuracy) {
  if (n < 1 || i < 1 || i > n) throw InputError("AccuracyMatrix: entry must satisfy 1 <= i <= n");
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw InputError("AccuracyMatrix: accuracy outside [0, 1]");
  while (size() < n) rows_.emplace_back(rows_.size() + 1, NAN);
  rows_[static_cast<std::size_t>(n - 1)][static_cast<std::size_t>(i - 1)] = accuracy;
}

bool AccuracyMatrix::has(int n, int i) const {
  return n >= 1 && n <= size() && i >= 1 && i <= n && !std::isnan(rows_[static_cast<std::size_t>(n - 1)][static_cast<std::size_t>(i - 1)]);
}

double AccuracyMatrix::at(int n, int i) const {
  if (!has(n, i)) throw InputError("AccuracyMatrix: entry (" + std::to_string(n) + "," + std::to_string(i) + ") not set");
  return rows_[static_cast<std::size_t>(n - 1)][static_cast<std::size_t>(i - 1)];
}

std::vector<double> AccuracyMatrix::row(int n) const {
  std::vector<double> out;
  for (int i = 1; i <= n; ++i) out.push_back(at(n, i));
  return out;
}

std::string AccuracyMatrix::to_text(int precision) const {
  std::string out;
  char buf[64];
  for (int n = 1; n <= size(); ++n) {
    for (int i = 1; i <= size(); ++i) {
      if (i > 1) out += '\t';
      if (has(n, i)) {
        std::snprintf(buf, sizeof(buf), "%.*f", precision, at(n, i));
        out += buf;
      } else {
        out += '-';
      }
    }
    out += '\n';
  }
  return out;
}

double average_accuracy(const AccuracyMatrix& m, int n_tasks) {
  if (n_tasks < 1) throw InputError("average_accuracy: need at least one task");
  double s = 0.0;
  for (int n = 1; n <= n_tasks; ++n) s += m.at(n_tasks, n);
  return s / n_tasks;
}

double average_forgetting(const AccuracyMatrix& m, int n_tasks) {
  if (n_tasks < 1) throw InputError("average_forgetting: need at least one task");
  if (n_tasks == 1) return 0.0;
  double s = 0.0;
  for (int n = 1; n <= n_tasks - 1; ++n) {
    double best = m.at(n, n);
    for (int j = n + 1; j <= n_tasks - 1; ++j) best = std::max(best, m.at(j, n));
    s += best - m.at(n_tasks, n);
  }
  return s / (n_tasks - 1);
}

double mean_transfer_accuracy(const std::vector<double>& per_task) {
  if (per_task.empty()) throw InputError("transfer accuracy: need at least two tasks");
  double s = 0.0;
  for (double a : per_task) s += a;
  return s / static_cast<double>(per_task.size());
}

}  // namespace ahip
