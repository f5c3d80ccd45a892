#pragma once

#include <span>
#include <vector>

namespace cactus {

// Minimum-cost perfect assignment on a square cost matrix (row-major, n x n).
// Returns column chosen for each row.
std::vector<int> hungarian(std::span<const double> cost, std::size_t n);

// Fraction of points whose cluster maps to their label under the best one-to-one
// cluster/label pairing. Points with cluster -1 count as misses.
double matching_accuracy(std::span<const int> clusters, std::span<const int> labels);

}  // namespace cactus
