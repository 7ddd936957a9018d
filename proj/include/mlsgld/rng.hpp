#pragma once

// Keyed random streams, Brownian-increment coupling and minibatch sampling.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "mlsgld/types.hpp"

namespace mlsgld {

/// Purpose tag of a stream. Each (level, replicate, attempt) owns one
/// disjoint stream per phase.
enum class Phase : std::uint32_t {
  burnin_noise = 1,
  burnin_batch = 2,
  coupled_noise = 3,
  fine_batch = 4,
  coarse_select = 5,
  mala_noise = 6,
  mala_accept = 7,
  mala_tune = 8,
  data_design = 9,
  data_truth = 10,
  data_labels = 11,
  generic = 12,
};

struct StreamKey {
  std::uint64_t level = 0;
  std::uint64_t replicate = 0;
  Phase phase = Phase::generic;
  std::uint32_t attempt = 0;
};

using BatchIndices = std::vector<std::size_t>;

/// SplitMix64 finaliser; used to derive child seeds from a master seed.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Child seed for (purpose, index) under `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t purpose,
                                    std::uint64_t index = 0) {
  return mix64(mix64(mix64(seed) ^ purpose) ^ index);
}

/// A single-owner random stream whose whole sequence is a function of
/// (master seed, key). Streams with different keys share no state.
class RngStream {
 public:
  RngStream(std::uint64_t seed, const StreamKey& key) : engine_(make_engine(seed, key)) {}

  double normal() { return normal_(engine_); }

  /// Uniform on [0, 1).
  double uniform() { return std::generate_canonical<double, 53>(engine_); }

  /// Uniform integer on [lo, hi].
  std::size_t uniform_index(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  static std::mt19937_64 make_engine(std::uint64_t seed, const StreamKey& key) {
    const auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
    const auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
    std::seed_seq seq{lo(seed),
                      hi(seed),
                      lo(key.level),
                      hi(key.level),
                      lo(key.replicate),
                      hi(key.replicate),
                      static_cast<std::uint32_t>(key.phase),
                      key.attempt};
    return std::mt19937_64(seq);
  }

  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

inline void fill_gaussian(RngStream& rng, ParamVector& out) {
  for (Eigen::Index j = 0; j < out.size(); ++j) out[j] = rng.normal();
}

/// d i.i.d. standard normal draws.
inline ParamVector gaussian_vector(RngStream& rng, std::size_t d) {
  require(d >= 1, "gaussian_vector: d must be >= 1");
  ParamVector v(static_cast<Eigen::Index>(d));
  fill_gaussian(rng, v);
  return v;
}

/// Coarse Brownian increment built from the two fine increments it spans.
inline ParamVector coarse_noise(const ParamVector& xi1, const ParamVector& xi2) {
  require_same_dim(xi1, xi2, "coarse_noise");
  return (xi1 + xi2) * (1.0 / std::numbers::sqrt2);
}

/// n i.i.d. uniform indices on [0, N), drawn with replacement.
inline void sample_batch_into(RngStream& rng, std::size_t N, BatchIndices& out) {
  for (auto& idx : out) idx = rng.uniform_index(0, N - 1);
}

inline BatchIndices sample_batch(RngStream& rng, std::size_t N, std::size_t n) {
  require(N >= 1 && n >= 1, "sample_batch: N and n must be >= 1");
  BatchIndices out(n);
  sample_batch_into(rng, N, out);
  return out;
}

/// Draws n entries without replacement from concat(fine1, fine2) by a
/// partial Fisher-Yates shuffle. `pick(lo, hi)` must return a uniform
/// integer on [lo, hi]; it is called exactly n times with lo = 0..n-1 and
/// hi = 2n-1.
template <typename Pick>
BatchIndices select_without_replacement(std::span<const std::size_t> fine1,
                                        std::span<const std::size_t> fine2, Pick&& pick) {
  if (fine1.size() != fine2.size()) {
    throw std::invalid_argument("coarse_batch: fine batches differ in length");
  }
  const std::size_t n = fine1.size();
  BatchIndices pool;
  pool.reserve(2 * n);
  pool.insert(pool.end(), fine1.begin(), fine1.end());
  pool.insert(pool.end(), fine2.begin(), fine2.end());
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t k = pick(j, 2 * n - 1);
    std::swap(pool[j], pool[k]);
  }
  pool.resize(n);
  return pool;
}

/// Coarse-path batch whose marginal law equals the fine-batch law.
inline BatchIndices coarse_batch(RngStream& rng, std::span<const std::size_t> fine1,
                                 std::span<const std::size_t> fine2) {
  return select_without_replacement(
      fine1, fine2, [&rng](std::size_t lo, std::size_t hi) { return rng.uniform_index(lo, hi); });
}

}  // namespace mlsgld
