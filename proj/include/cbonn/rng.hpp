#pragma once

#include <cstdint>
#include <random>

namespace cbonn {

/// Independent random streams keyed by (run seed, domain, index).
///
/// Every consumer that may run concurrently (particle noise, particle
/// initialisation) owns its own stream, so the draws it sees never depend on
/// how work is scheduled across threads.
enum class StreamDomain : std::uint32_t {
  Data = 1,
  Sampler = 2,
  Init = 3,
  Noise = 4,
  Fixture = 5,
};

class RngStream {
 public:
  RngStream() : RngStream(0, StreamDomain::Fixture, 0) {}

  RngStream(std::uint64_t seed, StreamDomain domain, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(domain),
                      static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    engine_.seed(seq);
  }

  double normal() { return normal_(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace cbonn
