#pragma once

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "irislab/core.hpp"

namespace testing {

// Random strictly positive distribution over ids 0..n-1; `sharpness` > 1 makes
// peaked draws more likely.
inline irislab::CategoricalDist random_dist(std::mt19937_64& gen, int n, double sharpness = 1.0) {
  std::uniform_real_distribution<double> u(1e-6, 1.0);
  std::vector<double> w(static_cast<std::size_t>(n));
  for (double& x : w) x = std::pow(u(gen), sharpness);
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= sum;
  std::vector<irislab::TokenId> ids(w.size());
  std::iota(ids.begin(), ids.end(), 0);
  return irislab::CategoricalDist(w, ids);
}

inline std::vector<irislab::TokenId> iota_ids(int n) {
  std::vector<irislab::TokenId> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

}  // namespace testing
