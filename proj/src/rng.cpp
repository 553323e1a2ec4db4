#include "fedldp/rng.hpp"

#include <cmath>

namespace fedldp {
namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer
std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t combine(std::uint64_t key, std::uint64_t v) {
  return mix(key ^ (v + kGolden + (key << 6) + (key >> 2)));
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t client, std::uint64_t round,
                     std::uint64_t purpose) {
  std::uint64_t k = mix(seed + kGolden);
  k = combine(k, client);
  k = combine(k, round);
  k = combine(k, purpose);
  key_ = k;
}

RngStream::result_type RngStream::operator()() {
  return mix(key_ + kGolden * ++counter_);
}

double RngStream::uniform() {
  // 53 random bits into [0, 1)
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) return 0;
  // rejection sampling on the top bits
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t v;
  do {
    v = (*this)();
  } while (v >= limit);
  return v % n;
}

}  // namespace fedldp
