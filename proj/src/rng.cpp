#include "fewstep/rng.hpp"

#include "fewstep/errors.hpp"

namespace fewstep {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(splitmix64(stream)),
                    static_cast<std::uint32_t>(splitmix64(stream) >> 32)};
  engine_.seed(seq);
}

double RngStream::normal() { return normal_(engine_); }

double RngStream::uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

double RngStream::beta(double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw ValidationError("beta parameters must be positive");
  }
  const double x = std::gamma_distribution<double>(alpha, 1.0)(engine_);
  const double y = std::gamma_distribution<double>(beta, 1.0)(engine_);
  return x / (x + y);
}

bool RngStream::bernoulli(double p) { return uniform() < p; }

RngStream RngStream::derive(std::uint64_t child) const {
  return RngStream(splitmix64(seed_ ^ splitmix64(stream_ + 0x51ed2701ULL)), child);
}

}  // namespace fewstep
