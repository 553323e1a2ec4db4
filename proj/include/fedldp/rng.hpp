#ifndef FEDLDP_RNG_HPP
#define FEDLDP_RNG_HPP

#include <cstdint>

namespace fedldp {

/// Counter-based random stream keyed by (seed, client, round, purpose).
/// Output i is a pure function of the key and the counter i, so streams can be
/// created and consumed in any order across threads without changing results.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t client, std::uint64_t round,
            std::uint64_t purpose = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~std::uint64_t{0}; }

  result_type operator()();

  /// Uniform double in [0, 1).
  double uniform();

  /// Standard normal via Box-Muller (deterministic across platforms).
  double normal();

  /// Uniform integer in [0, n), unbiased.
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Purpose tags keep logically distinct draws in disjoint streams.
namespace rng_purpose {
constexpr std::uint64_t kAvailability = 1;
constexpr std::uint64_t kMinibatch = 2;
constexpr std::uint64_t kNoise = 3;
constexpr std::uint64_t kShuffle = 4;
constexpr std::uint64_t kDataOrder = 5;
constexpr std::uint64_t kOracle = 6;
}  // namespace rng_purpose

}  // namespace fedldp

#endif
