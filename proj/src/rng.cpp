#include "genfeat/rng.hpp"

#include <cmath>

namespace genfeat {

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) return 0;
  std::uint64_t span = static_cast<std::uint64_t>(n);
  std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / span * span;
  std::uint64_t x = 0;
  do {
    x = gen_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % span);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t stage_seed(std::uint64_t master, std::string_view stage) {
  return splitmix64(master ^ fnv1a64(stage));
}

}  // namespace genfeat
