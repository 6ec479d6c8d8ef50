#pragma once

#include "qcde/config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace qcde {

struct JobResult
{
  Example example = Example::halfg;
  int n = 0;
  std::uint64_t seed = 0;
  Metrics deformation{};
  double lambda_star = 0.0;
  double fitted_mass = 0.0;
  Metrics kde{};
  double bandwidth_star = 0.0;
  double max_rebuild_residual = 0.0;
  double seconds = 0.0;
  FitResult fit;
};

struct JobOptions
{
  //! Directory for traces, parameters and density grids; empty for none.
  std::string out_dir;
  std::function<void(const DeformationState&, const Eigen::VectorXd&)> on_accept;
  std::function<void(const LambdaRun&)> progress;
};

//! Sample, fit the lambda sweep, and score against the KDE oracle.
JobResult run_job(const ExperimentConfig& cfg,
                  Example e,
                  int n,
                  std::uint64_t seed,
                  const JobOptions& opts = {});

struct Aggregate
{
  Example example;
  int n;
  int count;
  double mean[6]; //!< ISE, H2, L1 for deformation then KDE, times 1e4
  double sd[6];
};

struct BenchReport
{
  std::vector<JobResult> rows;
  std::vector<Aggregate> aggregates() const;
};

//! Runs every (example, size, seed) job of the bench section; jobs run on
//! cfg.threads workers and rows are sorted by job key.
BenchReport run_bench(const ExperimentConfig& cfg, const JobOptions& opts = {});

void write_bench_csv(std::ostream& out, const BenchReport& report);
void write_bench_summary(std::ostream& out, const BenchReport& report);

//! Level c with quad(p 1{p >= c}) = alpha, by bisection.
double mass_level(const DensityGrid& p, double alpha);

//! Writes <stem>.sqrt.qgrid and <stem>.levels.txt (95/50/25% mass levels).
void write_heatmap(const DensityGrid& p, const std::string& stem);

} // namespace qcde
