#pragma once

#include "qcde/data.hpp"
#include "qcde/deformation.hpp"
#include "qcde/optimizer.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace qcde {

//! Settings of one experiment. Zero / negative values of basis_order,
//! basis_radius mean "pick the per-example default".
struct ExperimentConfig
{
  Example example = Example::stroke;
  int n = 1000;
  int basis_order = 0;
  double basis_radius = 0.0;
  int grid_n = 256;
  double grid_half_width = 0.0; //!< 0: twice the basis radius
  int window_n = 512;
  std::vector<std::uint64_t> seeds{ 1 };
  std::string output_dir = "out";
  int threads = 1;

  DeformationOptions deformation = default_deformation_options();
  OptimizerConfig optimizer;

  // bench suite
  std::vector<Example> bench_examples{ Example::halfg, Example::stroke,
                                       Example::waffle };
  std::vector<int> bench_sizes{ 100, 1000 };

  static DeformationOptions default_deformation_options();

  BasisSpec basis() const;
  BasisSpec basis_for(Example e, int n) const;
  GridSpec grid_for(const BasisSpec& basis) const;

  //! Throws ConfigError.
  void validate() const;
};

//! N = 6, except 10 for waffle and 8 for stroke at n >= 10000.
int default_basis_order(Example e, int n);
double default_basis_radius(Example e);
TargetDensity target_for(Example e);

//! Key = value file with [sections]; unknown keys are errors.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(std::istream& in, const std::string& origin = "<input>");
void print_config(std::ostream& out, const ExperimentConfig& cfg);

} // namespace qcde
