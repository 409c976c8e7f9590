#pragma once

#include <cstdint>

namespace rwmp {

// Counter-based pseudo-random stream (splitmix64 over seed+counter).
// Draw i depends only on (seed, i), so identical seeds reproduce identical
// measurement records bit-for-bit on any platform or thread count.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64();
  double next_unit();  // uniform in [0, 1)
  double next_gaussian();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  // Independent stream derived from this seed; used to give concurrent
  // workers disjoint randomness.
  RandomStream split(std::uint64_t stream_id) const;

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t counter_ = 0;
  bool have_spare_gaussian_ = false;
  double spare_gaussian_ = 0.0;
};

}  // namespace rwmp
