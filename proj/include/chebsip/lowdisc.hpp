#pragma once

#include "chebsip/core.hpp"

#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace chebsip {

inline std::vector<int> first_primes(std::size_t count) {
  std::vector<int> primes;
  for (int c = 2; primes.size() < count; ++c) {
    bool prime = true;
    for (int p : primes) {
      if (p * p > c) break;
      if (c % p == 0) {
        prime = false;
        break;
      }
    }
    if (prime) primes.push_back(c);
  }
  return primes;
}

/// Halton sequence with a random digit permutation per base (fixed by seed).
/// Point 0 of the unscrambled sequence is skipped.
class ScrambledHalton {
 public:
  ScrambledHalton(std::size_t dim, std::uint64_t seed) : bases_(first_primes(dim)), perms_(dim) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    for (std::size_t d = 0; d < dim; ++d) {
      auto& p = perms_[d];
      p.resize(static_cast<std::size_t>(bases_[d]));
      std::iota(p.begin(), p.end(), 0);
      // Keep digit 0 fixed so the radical inverse stays in [0,1).
      std::shuffle(p.begin() + 1, p.end(), rng);
    }
  }

  std::size_t dim() const { return bases_.size(); }

  /// Point with index i in [0,1)^dim.
  Vec point(std::uint64_t i) const {
    Vec out(static_cast<Eigen::Index>(dim()));
    for (std::size_t d = 0; d < dim(); ++d) {
      const auto b = static_cast<std::uint64_t>(bases_[d]);
      double f = 1.0, r = 0.0;
      std::uint64_t n = i + 1;
      while (n > 0) {
        f /= static_cast<double>(b);
        r += f * perms_[d][n % b];
        n /= b;
      }
      out[static_cast<Eigen::Index>(d)] = r;
    }
    return out;
  }

 private:
  std::vector<int> bases_;
  std::vector<std::vector<int>> perms_;
};

/// splitmix64 step, used to derive independent seeds.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace chebsip
