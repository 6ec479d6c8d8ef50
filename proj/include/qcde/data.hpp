#pragma once

#include "qcde/grid.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace qcde {

enum class Example
{
  halfg,
  stroke,
  waffle
};

std::string to_string(Example e);
//! Throws ConfigError for unknown names.
Example parse_example(const std::string& name);

struct Dataset
{
  std::vector<cplx> points;
  Example example = Example::halfg;
  std::uint64_t seed = 0;
};

Dataset sample_halfg(int n, std::uint64_t seed);
Dataset sample_stroke(int n, std::uint64_t seed);
Dataset sample_waffle(int n, std::uint64_t seed);
Dataset sample(Example e, int n, std::uint64_t seed);

//! Deformations applied to the base normals.
cplx halfg_map(cplx x);
cplx stroke_map(cplx x);
cplx waffle_map(cplx x);
double halfg_edge(double u); //!< h(u) = sin(5u)/15 - u tanh(u)/3

//! Roots of x + sin(2 pi x)/pi = c (shape = sine) or x + cos(2 pi x)/pi = c
//! inside [-range, range]. Throws BranchSearchIncomplete when a root could
//! lie beyond the range.
enum class WaffleBranch
{
  sine,
  cosine
};
std::vector<double> waffle_roots(WaffleBranch shape, double c, double range = 6.0);

//! Sampling density of an example. `range` bounds the waffle branch search.
double true_density(Example e, cplx y, double range = 6.0);
std::vector<double> true_density(Example e,
                                 std::span<const cplx> pts,
                                 double range = 6.0);

//! Evaluation window used for metrics and plots.
GridSpec metric_window(Example e, int n = 512);

using DensityGrid = RealGrid;
DensityGrid true_density_grid(Example e, const GridSpec& window, double range = 6.0);

//! Probability of the box [lo.real(), hi.real()] x [lo.imag(), hi.imag()]
//! under the sampling density. The waffle density has inverse square-root
//! singularities along its fold curves, so node sums of it converge erratically;
//! this splits at the folds and integrates each piece with a substitution that
//! absorbs them.
double true_mass(Example e, cplx lo, cplx hi, double range = 6.0);

//! Isotropic Gaussian kernel estimate.
DensityGrid kde(std::span<const cplx> data, double bandwidth, const GridSpec& window);

struct KdeOracle
{
  double bandwidth;
  double ise;
  std::vector<double> bandwidths;
  std::vector<double> ises;
};

//! Bandwidth minimizing the ISE over 25 log-spaced values in [0.005, 1].
KdeOracle kde_oracle_ise(std::span<const cplx> data, const DensityGrid& truth);

struct Metrics
{
  double ise;
  double hellinger2; //!< (1/2) int (sqrt p - sqrt q)^2
  double hellinger;
  double l1;
};

//! Throws NegativeDensity for values below -1e-12.
Metrics metrics(const DensityGrid& p, const DensityGrid& q);

void write_csv(std::ostream& out, const Dataset& d);
void write_csv(const std::string& path, const Dataset& d);
std::vector<cplx> read_csv(std::istream& in);
std::vector<cplx> read_csv(const std::string& path);

} // namespace qcde
