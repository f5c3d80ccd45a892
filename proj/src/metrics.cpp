#include "cactus/metrics.hpp"

#include <algorithm>
#include <limits>

#include "cactus/error.hpp"

namespace cactus {

// Shortest augmenting path with potentials, O(n^3).
std::vector<int> hungarian(std::span<const double> cost, std::size_t n) {
  if (cost.size() != n * n) throw ShapeError("cost matrix must be n x n");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = static_cast<int>(j - 1);
  return row_to_col;
}

double matching_accuracy(std::span<const int> clusters, std::span<const int> labels) {
  if (clusters.size() != labels.size()) throw ShapeError("one cluster id per label required");
  if (labels.empty()) return 0.0;
  int kc = 0, kl = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) throw ContractError("labels must be nonnegative");
    kc = std::max(kc, clusters[i] + 1);
    kl = std::max(kl, labels[i] + 1);
  }
  const auto n = static_cast<std::size_t>(std::max(kc, kl));
  std::vector<double> cost(n * n, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (clusters[i] >= 0) cost[static_cast<std::size_t>(clusters[i]) * n + static_cast<std::size_t>(labels[i])] -= 1.0;
  const auto match = hungarian(cost, n);
  double hits = 0.0;
  for (std::size_t c = 0; c < n; ++c) hits -= cost[c * n + static_cast<std::size_t>(match[c])];
  return hits / static_cast<double>(labels.size());
}

}  // namespace cactus
