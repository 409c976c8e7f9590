#include "rwmp/random.hpp"

#include <cmath>

namespace rwmp {
namespace {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t RandomStream::next_u64() {
  const std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ull;
  return mix64(z);
}

double RandomStream::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::next_gaussian() {
  if (have_spare_gaussian_) {
    have_spare_gaussian_ = false;
    return spare_gaussian_;
  }
  double u1 = next_unit();
  double u2 = next_unit();
  if (u1 < 1e-300) u1 = 1e-300;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * M_PI * u2;
  spare_gaussian_ = r * std::sin(phi);
  have_spare_gaussian_ = true;
  return r * std::cos(phi);
}

RandomStream RandomStream::split(std::uint64_t stream_id) const {
  return RandomStream(mix64(seed_ ^ mix64(stream_id + 0x632BE59BD9B4E019ull)));
}

}  // namespace rwmp
