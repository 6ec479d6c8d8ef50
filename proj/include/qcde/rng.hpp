#pragma once

#include <cstdint>
#include <utility>

namespace qcde {

//! Counter-based generator: draw k is splitmix64(seed + (k+1) * golden).
//! Normals come from Box-Muller, both variates of a pair being used.
class Rng
{
public:
  explicit Rng(std::uint64_t seed)
    : seed_(seed)
  {}

  std::uint64_t next_u64();
  //! Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  std::pair<double, double> normal_pair();

  std::uint64_t counter() const { return counter_; }

private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

} // namespace qcde
