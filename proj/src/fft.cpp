#include "qcde/fft.hpp"

#include "qcde/errors.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <vector>

namespace qcde::fft {

namespace {

struct PlanPair
{
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
};

std::mutex plan_mutex;
std::map<int, PlanPair> plans;

const PlanPair& plans_for(int n)
{
  std::lock_guard<std::mutex> lock(plan_mutex);
  auto it = plans.find(n);
  if (it != plans.end())
    return it->second;
  std::vector<std::complex<double>> scratch(static_cast<std::size_t>(n) * n);
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  PlanPair p;
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  p.fwd = fftw_plan_dft_2d(n, n, buf, buf, FFTW_FORWARD, flags);
  p.bwd = fftw_plan_dft_2d(n, n, buf, buf, FFTW_BACKWARD, flags);
  return plans.emplace(n, p).first->second;
}

} // namespace

void transform(std::span<std::complex<double>> data, int n, int sign)
{
  if (data.size() != static_cast<std::size_t>(n) * n)
    throw DimensionMismatch("fft buffer does not hold n*n values");
  const auto& p = plans_for(n);
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(sign < 0 ? p.fwd : p.bwd, buf, buf);
}

} // namespace qcde::fft
