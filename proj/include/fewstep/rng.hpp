#pragma once

#include <cstdint>
#include <random>

namespace fewstep {

/// Deterministic random stream keyed by (seed, stream id).
///
/// Two RngStream objects constructed from the same pair produce the same
/// draw sequence. Instances are single-consumer; derive a new stream rather
/// than sharing one across threads.
class RngStream {
 public:
  RngStream(std::uint64_t seed = 0, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  double normal();
  double uniform();  // [0, 1)
  double beta(double alpha, double beta);
  bool bernoulli(double p);

  // Independent child stream; the parent is not advanced.
  RngStream derive(std::uint64_t child) const;

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace fewstep
