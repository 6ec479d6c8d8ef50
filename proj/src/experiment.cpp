#include "qcde/experiment.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>
#include <tuple>

namespace qcde {

namespace fs = std::filesystem;

namespace {

std::string lambda_tag(std::size_t i)
{
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02zu", i);
  return buf;
}

nlohmann::json metrics_json(const Metrics& m)
{
  return { { "ise", m.ise },
           { "hellinger2", m.hellinger2 },
           { "hellinger", m.hellinger },
           { "l1", m.l1 } };
}

void write_job_files(const std::string& dir,
                     const ExperimentConfig& cfg,
                     const Dataset& data,
                     const TargetDensity& target,
                     const BasisSpec& basis,
                     const GridSpec& grid,
                     const DensityGrid& truth,
                     const KdeOracle& oracle,
                     const JobResult& res)
{
  fs::create_directories(dir);
  write_csv(dir + "/data.csv", data);
  write_qgrid(dir + "/truth.qgrid", truth);
  write_qgrid(dir + "/kde.qgrid", kde(data.points, oracle.bandwidth, truth.spec()));
  nlohmann::json runs = nlohmann::json::array();
  for (std::size_t i = 0; i < res.fit.runs.size(); ++i) {
    const auto& r = res.fit.runs[i];
    write_trace_csv(dir + "/trace_" + lambda_tag(i) + ".csv", r.trace);
    if (!r.theta.coeffs.empty())
      write_qtheta(dir + "/theta_" + lambda_tag(i) + ".qtheta", r.theta, basis);
    runs.push_back({ { "lambda", r.lambda },
                     { "objective", r.objective },
                     { "penalty", r.penalty },
                     { "iterations", r.iterations },
                     { "termination", to_string(r.reason) },
                     { "message", r.message },
                     { "failed", r.failed },
                     { "mass", r.mass },
                     { "metrics", metrics_json(r.metrics) },
                     { "rebuild_residuals", r.rebuild_residuals } });
  }
  const auto& best = res.fit.runs[res.fit.selected];
  write_qtheta(dir + "/theta.qtheta", best.theta, basis);
  const auto state = rebuild(best.theta, basis, grid, cfg.deformation);
  const auto fitted = fitted_density(state, target, truth.spec());
  write_qgrid(dir + "/fitted.qgrid", fitted);

  nlohmann::json j = {
    { "example", to_string(res.example) },
    { "n", res.n },
    { "seed", res.seed },
    { "basis_order", basis.N },
    { "basis_radius", basis.L },
    { "grid_n", grid.n },
    { "grid_half_width", grid.half_width },
    { "selected_lambda", res.lambda_star },
    { "deformation", metrics_json(res.deformation) },
    { "kde", metrics_json(res.kde) },
    { "kde_bandwidth", res.bandwidth_star },
    { "kde_bandwidths", oracle.bandwidths },
    { "kde_ises", oracle.ises },
    { "fitted_mass", res.fitted_mass },
    { "max_rebuild_residual", res.max_rebuild_residual },
    { "seconds", res.seconds },
    { "runs", runs },
  };
  std::ofstream(dir + "/job.json") << j.dump(2) << '\n';
}

} // namespace

JobResult run_job(const ExperimentConfig& cfg,
                  Example e,
                  int n,
                  std::uint64_t seed,
                  const JobOptions& opts)
{
  const auto t0 = std::chrono::steady_clock::now();
  const auto basis = cfg.basis_for(e, n);
  const auto grid = cfg.grid_for(basis);
  const auto window = metric_window(e, cfg.window_n);
  const auto data = sample(e, n, seed);
  const auto target = target_for(e);
  const auto truth = true_density_grid(e, window);
  const auto oracle = kde_oracle_ise(data.points, truth);

  SweepSetup setup{ basis, grid, cfg.deformation, cfg.optimizer, opts.on_accept };
  JobResult res;
  res.example = e;
  res.n = n;
  res.seed = seed;
  res.fit = lambda_sweep(data.points, target, setup, truth, opts.progress);
  const auto& best = res.fit.runs[res.fit.selected];
  res.deformation = best.metrics;
  res.lambda_star = best.lambda;
  res.fitted_mass = best.mass;
  res.kde = metrics(kde(data.points, oracle.bandwidth, window), truth);
  res.bandwidth_star = oracle.bandwidth;
  for (const auto& r : res.fit.runs)
    for (double v : r.rebuild_residuals)
      res.max_rebuild_residual = std::max(res.max_rebuild_residual, v);
  res.seconds =
    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!opts.out_dir.empty())
    write_job_files(opts.out_dir, cfg, data, target, basis, grid, truth, oracle,
                    res);
  return res;
}

std::vector<Aggregate> BenchReport::aggregates() const
{
  std::vector<Aggregate> out;
  for (const auto& row : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const Aggregate& a) {
      return a.example == row.example && a.n == row.n;
    });
    if (it == out.end()) {
      out.push_back({ row.example, row.n, 0, {}, {} });
      it = out.end() - 1;
    }
    ++it->count;
  }
  for (auto& a : out) {
    std::vector<std::array<double, 6>> vals;
    for (const auto& row : rows)
      if (row.example == a.example && row.n == a.n)
        vals.push_back({ row.deformation.ise, row.deformation.hellinger2,
                         row.deformation.l1, row.kde.ise, row.kde.hellinger2,
                         row.kde.l1 });
    for (int k = 0; k < 6; ++k) {
      double m = 0.0;
      for (const auto& v : vals)
        m += v[k];
      m /= static_cast<double>(vals.size());
      double ss = 0.0;
      for (const auto& v : vals)
        ss += (v[k] - m) * (v[k] - m);
      const double sd =
        vals.size() > 1 ? std::sqrt(ss / static_cast<double>(vals.size() - 1))
                        : 0.0;
      a.mean[k] = 1e4 * m;
      a.sd[k] = 1e4 * sd;
    }
  }
  return out;
}

BenchReport run_bench(const ExperimentConfig& cfg, const JobOptions& opts)
{
  struct Key
  {
    Example e;
    int n;
    std::uint64_t seed;
  };
  std::vector<Key> keys;
  for (Example e : cfg.bench_examples)
    for (int n : cfg.bench_sizes)
      for (auto s : cfg.seeds)
        keys.push_back({ e, n, s });
  std::sort(keys.begin(), keys.end(), [](const Key& x, const Key& y) {
    return std::tie(x.e, x.n, x.seed) < std::tie(y.e, y.n, y.seed);
  });

  BenchReport report;
  report.rows.resize(keys.size());
  std::atomic<std::size_t> next{ 0 };
  std::mutex err_mtx;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= keys.size())
        return;
      try {
        JobOptions jo = opts;
        if (!opts.out_dir.empty())
          jo.out_dir = opts.out_dir + "/" + to_string(keys[i].e) + "_n" +
                       std::to_string(keys[i].n) + "_s" +
                       std::to_string(keys[i].seed);
        report.rows[i] = run_job(cfg, keys[i].e, keys[i].n, keys[i].seed, jo);
      } catch (...) {
        std::lock_guard lock(err_mtx);
        if (!failure)
          failure = std::current_exception();
      }
    }
  };
  const int workers =
    std::max(1, std::min<int>(cfg.threads, static_cast<int>(keys.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t)
      pool.emplace_back(worker);
    for (auto& t : pool)
      t.join();
  }
  if (failure)
    std::rethrow_exception(failure);
  return report;
}

void write_bench_csv(std::ostream& out, const BenchReport& report)
{
  out << "example,n,seed,def_ise,def_h2,def_l1,lambda_star,kde_ise,kde_h2,"
         "kde_l1,bandwidth_star,fitted_mass,max_rebuild_residual\n";
  for (const auto& r : report.rows)
    out << to_string(r.example) << ',' << r.n << ',' << r.seed << ','
        << format_double(r.deformation.ise) << ','
        << format_double(r.deformation.hellinger2) << ','
        << format_double(r.deformation.l1) << ',' << format_double(r.lambda_star)
        << ',' << format_double(r.kde.ise) << ','
        << format_double(r.kde.hellinger2) << ',' << format_double(r.kde.l1)
        << ',' << format_double(r.bandwidth_star) << ','
        << format_double(r.fitted_mass) << ','
        << format_double(r.max_rebuild_residual) << '\n';
}

void write_bench_summary(std::ostream& out, const BenchReport& report)
{
  out << "example,n,runs,def_ise,def_ise_sd,kde_ise,kde_ise_sd,def_h2,"
         "def_h2_sd,kde_h2,kde_h2_sd,def_l1,def_l1_sd,kde_l1,kde_l1_sd\n";
  char buf[64];
  auto f = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return std::string(buf);
  };
  for (const auto& a : report.aggregates())
    out << to_string(a.example) << ',' << a.n << ',' << a.count << ','
        << f(a.mean[0]) << ',' << f(a.sd[0]) << ',' << f(a.mean[3]) << ','
        << f(a.sd[3]) << ',' << f(a.mean[1]) << ',' << f(a.sd[1]) << ','
        << f(a.mean[4]) << ',' << f(a.sd[4]) << ',' << f(a.mean[2]) << ','
        << f(a.sd[2]) << ',' << f(a.mean[5]) << ',' << f(a.sd[5]) << '\n';
}

double mass_level(const DensityGrid& p, double alpha)
{
  if (!(alpha > 0.0 && alpha < 1.0))
    throw InvalidArgument("mass level needs 0 < alpha < 1");
  const double h = p.spec().spacing();
  auto mass_above = [&](double c) {
    double s = 0.0;
    for (double v : p.values())
      if (v >= c)
        s += v;
    return s * h * h;
  };
  double lo = 0.0;
  double hi = *std::max_element(p.values().begin(), p.values().end());
  if (mass_above(lo) < alpha)
    throw InvalidArgument("density carries less than the requested mass");
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mass_above(mid) >= alpha)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

void write_heatmap(const DensityGrid& p, const std::string& stem)
{
  DensityGrid root(p.spec());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < -1e-12)
      throw NegativeDensity("heatmap input holds negative values");
    root[i] = std::sqrt(std::max(p[i], 0.0));
  }
  write_qgrid(stem + ".sqrt.qgrid", root);
  std::ofstream out(stem + ".levels.txt");
  if (!out)
    throw FormatError("cannot open " + stem + ".levels.txt for writing");
  out << "mass level sqrt_level\n";
  for (double a : { 0.95, 0.50, 0.25 }) {
    const double c = mass_level(p, a);
    out << format_double(a) << ' ' << format_double(c) << ' '
        << format_double(std::sqrt(c)) << '\n';
  }
}

} // namespace qcde
