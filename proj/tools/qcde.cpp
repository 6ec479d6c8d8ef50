#include "qcde/config.hpp"
#include "qcde/experiment.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <variant>

namespace fs = std::filesystem;
using namespace qcde;

namespace {

constexpr int exit_config = 2;
constexpr int exit_numeric = 3;

struct Common
{
  std::string config;
  std::uint64_t seed = 0;
  bool has_seed = false;
  int threads = 0;
  std::string out;
  std::string example;
  int n = 0;
};

ExperimentConfig resolve(const Common& c)
{
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  if (!c.example.empty())
    cfg.example = parse_example(c.example);
  if (c.n > 0)
    cfg.n = c.n;
  if (c.has_seed)
    cfg.seeds = { c.seed };
  if (c.threads > 0)
    cfg.threads = c.threads;
  if (!c.out.empty())
    cfg.output_dir = c.out;
  cfg.validate();
  return cfg;
}

std::string job_stem(Example e, int n, std::uint64_t seed)
{
  return to_string(e) + "_n" + std::to_string(n) + "_s" + std::to_string(seed);
}

nlohmann::json metrics_json(const Metrics& m)
{
  return { { "ise", m.ise },
           { "hellinger2", m.hellinger2 },
           { "hellinger", m.hellinger },
           { "l1", m.l1 } };
}

void log_run(const LambdaRun& r)
{
  std::cerr << "lambda " << format_double(r.lambda) << ": " << r.iterations
            << " iterations, " << to_string(r.reason) << ", ISE "
            << format_double(r.metrics.ise) << '\n';
}

int cmd_sample(const Common& c)
{
  const auto cfg = resolve(c);
  fs::create_directories(cfg.output_dir);
  for (auto seed : cfg.seeds) {
    const auto path =
      cfg.output_dir + "/" + job_stem(cfg.example, cfg.n, seed) + ".csv";
    write_csv(path, sample(cfg.example, cfg.n, seed));
    std::cout << path << '\n';
  }
  return 0;
}

int cmd_fit(const Common& c, const std::string& data_path)
{
  const auto cfg = resolve(c);
  fs::create_directories(cfg.output_dir);
  if (data_path.empty()) {
    for (auto seed : cfg.seeds) {
      JobOptions jo;
      jo.out_dir = cfg.output_dir + "/" + job_stem(cfg.example, cfg.n, seed);
      jo.progress = log_run;
      const auto res = run_job(cfg, cfg.example, cfg.n, seed, jo);
      std::cout << jo.out_dir << " lambda* " << format_double(res.lambda_star)
                << " ISE " << format_double(res.deformation.ise) << '\n';
    }
    return 0;
  }
  const auto X = read_csv(data_path);
  const int n = static_cast<int>(X.size());
  const auto basis = cfg.basis_for(cfg.example, n);
  SweepSetup setup{ basis, cfg.grid_for(basis), cfg.deformation, cfg.optimizer, {} };
  const auto truth = true_density_grid(cfg.example, metric_window(cfg.example, cfg.window_n));
  const auto fit = lambda_sweep(X, target_for(cfg.example), setup, truth, log_run);
  const auto& best = fit.runs[fit.selected];
  write_qtheta(cfg.output_dir + "/theta.qtheta", best.theta, basis);
  for (std::size_t i = 0; i < fit.runs.size(); ++i)
    write_trace_csv(cfg.output_dir + "/trace_" + std::to_string(i) + ".csv",
                    fit.runs[i].trace);
  std::cout << cfg.output_dir << "/theta.qtheta lambda* "
            << format_double(best.lambda) << '\n';
  return 0;
}

int cmd_eval(const Common& c, const std::string& theta_path)
{
  const auto cfg = resolve(c);
  const auto [theta, basis] = read_qtheta(theta_path);
  const auto state = rebuild(theta, basis, cfg.grid_for(basis), cfg.deformation);
  const auto window = metric_window(cfg.example, cfg.window_n);
  const auto fitted = fitted_density(state, target_for(cfg.example), window);
  const auto truth = true_density_grid(cfg.example, window);
  const auto m = metrics(fitted, truth);
  fs::create_directories(cfg.output_dir);
  write_qgrid(cfg.output_dir + "/fitted.qgrid", fitted);
  write_qgrid(cfg.output_dir + "/truth.qgrid", truth);
  nlohmann::json j = { { "example", to_string(cfg.example) },
                       { "metrics", metrics_json(m) },
                       { "mass", quad(fitted) },
                       { "beltrami_residual", beltrami_residual(state) } };
  std::ofstream(cfg.output_dir + "/eval.json") << j.dump(2) << '\n';
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_bench(const Common& c)
{
  const auto cfg = resolve(c);
  fs::create_directories(cfg.output_dir);
  JobOptions jo;
  jo.out_dir = cfg.output_dir;
  if (cfg.threads == 1)
    jo.progress = log_run;
  const auto report = run_bench(cfg, jo);
  std::ofstream rows(cfg.output_dir + "/bench.csv");
  write_bench_csv(rows, report);
  std::ofstream summary(cfg.output_dir + "/summary.csv");
  write_bench_summary(summary, report);
  write_bench_summary(std::cout, report);
  return 0;
}

int cmd_heatmap(const Common& c, const std::string& grid_path)
{
  const auto any = read_qgrid(grid_path);
  const auto* p = std::get_if<RealGrid>(&any);
  if (!p)
    throw FormatError(grid_path + ": heatmap needs a real density grid");
  const std::string out_dir = c.out.empty() ? "." : c.out;
  fs::create_directories(out_dir);
  const auto stem = out_dir + "/" + fs::path(grid_path).stem().string();
  write_heatmap(*p, stem);
  std::cout << stem << ".sqrt.qgrid\n" << stem << ".levels.txt\n";
  return 0;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{ "Deformation-based bivariate density estimation" };
  app.require_subcommand(0, 1);
  Common common;
  bool print = false;
  app.add_flag("--print-config", print, "Print the resolved configuration and exit");

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "Configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "Seed (replaces the seed list)")
      ->each([&](const std::string&) { common.has_seed = true; });
    sub->add_option("--threads", common.threads, "Worker threads");
    sub->add_option("--out", common.out, "Output directory");
    sub->add_option("--example", common.example, "halfg, stroke or waffle");
    sub->add_option("-n", common.n, "Sample size");
    sub->add_flag("--print-config", print, "Print the resolved configuration and exit");
  };

  std::string data_path, theta_path, grid_path;
  auto* sample = app.add_subcommand("sample", "Draw a dataset");
  add_common(sample);
  auto* fit = app.add_subcommand("fit", "Fit the lambda sweep");
  add_common(fit);
  fit->add_option("--data", data_path, "Dataset CSV; sampled from the config when absent");
  auto* eval = app.add_subcommand("eval", "Evaluate a fitted parameter file");
  add_common(eval);
  eval->add_option("--theta", theta_path, "QTHETA file")->required();
  auto* bench = app.add_subcommand("bench", "Run the benchmark suite");
  add_common(bench);
  auto* heatmap = app.add_subcommand("heatmap", "Square-root grid and mass contours");
  add_common(heatmap);
  heatmap->add_option("--grid", grid_path, "QGRID density")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_config;
  }

  try {
    if (print) {
      print_config(std::cout, resolve(common));
      return 0;
    }
    if (sample->parsed())
      return cmd_sample(common);
    if (fit->parsed())
      return cmd_fit(common, data_path);
    if (eval->parsed())
      return cmd_eval(common, theta_path);
    if (bench->parsed())
      return cmd_bench(common);
    if (heatmap->parsed())
      return cmd_heatmap(common, grid_path);
    std::cout << app.help();
    return exit_config;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return exit_config;
  } catch (const FormatError& e) {
    std::cerr << e.what() << '\n';
    return exit_config;
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return exit_numeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
