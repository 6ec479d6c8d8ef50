#include "qcde/rng.hpp"

#include <cmath>

namespace qcde {

std::uint64_t splitmix64(std::uint64_t x)
{
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

std::uint64_t Rng::next_u64()
{
  ++counter_;
  return splitmix64(seed_ + counter_ * 0x9e3779b97f4a7c15ULL);
}

double Rng::uniform()
{
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

std::pair<double, double> Rng::normal_pair()
{
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * M_PI * u2;
  return { r * std::cos(t), r * std::sin(t) };
}

double Rng::normal()
{
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const auto [z0, z1] = normal_pair();
  spare_ = z1;
  has_spare_ = true;
  return z0;
}

} // namespace qcde
