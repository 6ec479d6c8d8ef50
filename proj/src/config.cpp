#include "qcde/config.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fstream>
#include <functional>
#include <map>
#include <ostream>

namespace qcde {

DeformationOptions ExperimentConfig::default_deformation_options()
{
  DeformationOptions o;
  o.integrator = Integrator::rk4;
  o.rebuild_steps = 10;
  return o;
}

int default_basis_order(Example e, int n)
{
  if (n >= 10000 && e == Example::waffle)
    return 10;
  if (n >= 10000 && e == Example::stroke)
    return 8;
  return 6;
}

double default_basis_radius(Example e)
{
  return e == Example::stroke ? 2.5 : 3.0;
}

TargetDensity target_for(Example e)
{
  switch (e) {
    case Example::halfg:
      return halfg_target();
    case Example::stroke:
      return gaussian_target(0.05);
    case Example::waffle:
      return gaussian_target(0.5);
  }
  throw InvalidArgument("unknown example");
}

BasisSpec ExperimentConfig::basis_for(Example e, int size) const
{
  BasisSpec b;
  b.N = basis_order > 0 ? basis_order : default_basis_order(e, size);
  b.L = basis_radius > 0.0 ? basis_radius : default_basis_radius(e);
  return b;
}

BasisSpec ExperimentConfig::basis() const
{
  return basis_for(example, n);
}

GridSpec ExperimentConfig::grid_for(const BasisSpec& b) const
{
  GridSpec g{ grid_half_width > 0.0 ? grid_half_width : 2.0 * b.L, grid_n };
  g.validate();
  return g;
}

void ExperimentConfig::validate() const
{
  if (n < 1)
    throw ConfigError("[experiment] n: sample size must be >= 1");
  if (seeds.empty())
    throw ConfigError("[experiment] seeds: at least one seed is required");
  if (threads < 1)
    throw ConfigError("[experiment] threads: must be >= 1");
  if (window_n < 16 || (window_n & (window_n - 1)) != 0)
    throw ConfigError("[experiment] window_n: must be a power of two >= 16");
  if (grid_n < 16 || (grid_n & (grid_n - 1)) != 0)
    throw ConfigError("[grid] n: must be a power of two >= 16");
  if (deformation.rebuild_steps < 1)
    throw ConfigError("[deformation] rebuild_steps: must be >= 1");
  if (!(deformation.beltrami_tol > 0.0))
    throw ConfigError("[deformation] beltrami_tol: must be positive");
  if (deformation.newton_iters < 1 || !(deformation.newton_tol > 0.0))
    throw ConfigError("[deformation] newton settings must be positive");
  optimizer.validate();
  if (bench_sizes.empty() || bench_examples.empty())
    throw ConfigError("[bench] examples and sizes must not be empty");
  for (int s : bench_sizes)
    if (s < 1)
      throw ConfigError("[bench] sizes: entries must be >= 1");
  // the deformation grid must contain the metric window
  for (Example e : bench_examples) {
    const auto b = basis_for(e, n);
    const auto g = grid_for(b);
    const auto w = metric_window(e, window_n);
    if (w.half_width > g.half_width - 3.0 * g.spacing())
      throw ConfigError("[grid] half_width: deformation grid does not contain "
                        "the " + to_string(e) + " metric window");
  }
}

namespace {

template<class T>
T parse_value(const std::string& where, const std::string& text)
{
  try {
    std::size_t used = 0;
    T v;
    if constexpr (std::is_same_v<T, int>)
      v = std::stoi(text, &used);
    else if constexpr (std::is_same_v<T, double>)
      v = std::stod(text, &used);
    else
      v = std::stoull(text, &used);
    if (used != text.size())
      throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(where + ": cannot parse '" + text + "'");
  }
}

template<class T>
std::vector<T> parse_list(const std::string& where, const std::string& text)
{
  std::vector<std::string> parts;
  boost::split(parts, text, boost::is_any_of(","));
  std::vector<T> out;
  for (auto& p : parts) {
    boost::trim(p);
    if (p.empty())
      continue;
    if constexpr (std::is_same_v<T, Example>) {
      try {
        out.push_back(parse_example(p));
      } catch (const ConfigError& e) {
        throw ConfigError(where + ": " + e.what());
      }
    } else {
      out.push_back(parse_value<T>(where, p));
    }
  }
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&,
                                  const std::string&)>;

const std::map<std::string, Setter>& setters()
{
  static const std::map<std::string, Setter> table = {
    { "experiment.example",
      [](auto& c, auto& w, auto& v) {
        try {
          c.example = parse_example(v);
        } catch (const ConfigError& e) {
          throw ConfigError(w + ": " + e.what());
        }
      } },
    { "experiment.n", [](auto& c, auto& w, auto& v) { c.n = parse_value<int>(w, v); } },
    { "experiment.seeds",
      [](auto& c, auto& w, auto& v) { c.seeds = parse_list<std::uint64_t>(w, v); } },
    { "experiment.output_dir", [](auto& c, auto&, auto& v) { c.output_dir = v; } },
    { "experiment.threads",
      [](auto& c, auto& w, auto& v) { c.threads = parse_value<int>(w, v); } },
    { "experiment.window_n",
      [](auto& c, auto& w, auto& v) { c.window_n = parse_value<int>(w, v); } },
    { "basis.order",
      [](auto& c, auto& w, auto& v) { c.basis_order = parse_value<int>(w, v); } },
    { "basis.radius",
      [](auto& c, auto& w, auto& v) { c.basis_radius = parse_value<double>(w, v); } },
    { "grid.n", [](auto& c, auto& w, auto& v) { c.grid_n = parse_value<int>(w, v); } },
    { "grid.half_width",
      [](auto& c, auto& w, auto& v) { c.grid_half_width = parse_value<double>(w, v); } },
    { "deformation.integrator",
      [](auto& c, auto& w, auto& v) {
        if (v == "euler")
          c.deformation.integrator = Integrator::euler;
        else if (v == "rk4")
          c.deformation.integrator = Integrator::rk4;
        else
          throw ConfigError(w + ": expected euler or rk4, got '" + v + "'");
      } },
    { "deformation.rebuild_steps",
      [](auto& c, auto& w, auto& v) {
        c.deformation.rebuild_steps = parse_value<int>(w, v);
      } },
    { "deformation.beltrami_tol",
      [](auto& c, auto& w, auto& v) {
        c.deformation.beltrami_tol = parse_value<double>(w, v);
      } },
    { "deformation.solve_mode",
      [](auto& c, auto& w, auto& v) {
        if (v == "whole_plane")
          c.deformation.solve.mode = SolveMode::whole_plane;
        else if (v == "periodic")
          c.deformation.solve.mode = SolveMode::periodic;
        else
          throw ConfigError(w + ": expected whole_plane or periodic, got '" +
                            v + "'");
      } },
    { "deformation.newton_iters",
      [](auto& c, auto& w, auto& v) {
        c.deformation.newton_iters = parse_value<int>(w, v);
      } },
    { "deformation.newton_tol",
      [](auto& c, auto& w, auto& v) {
        c.deformation.newton_tol = parse_value<double>(w, v);
      } },
    { "optimizer.max_step_len",
      [](auto& c, auto& w, auto& v) {
        c.optimizer.max_step_len = parse_value<double>(w, v);
      } },
    { "optimizer.hessian_init_diag",
      [](auto& c, auto& w, auto& v) {
        c.optimizer.hessian_init_diag = parse_value<double>(w, v);
      } },
    { "optimizer.max_halvings",
      [](auto& c, auto& w, auto& v) {
        c.optimizer.max_halvings = parse_value<int>(w, v);
      } },
    { "optimizer.rebuild_every",
      [](auto& c, auto& w, auto& v) {
        c.optimizer.rebuild_every = parse_value<int>(w, v);
      } },
    { "optimizer.max_iters",
      [](auto& c, auto& w, auto& v) {
        c.optimizer.max_iters = parse_value<int>(w, v);
      } },
    { "optimizer.grad_tol",
      [](auto& c, auto& w, auto& v) {
        c.optimizer.grad_tol = parse_value<double>(w, v);
      } },
    { "optimizer.lambda_grid",
      [](auto& c, auto& w, auto& v) {
        c.optimizer.lambda_grid = parse_list<double>(w, v);
      } },
    { "bench.examples",
      [](auto& c, auto& w, auto& v) { c.bench_examples = parse_list<Example>(w, v); } },
    { "bench.sizes",
      [](auto& c, auto& w, auto& v) { c.bench_sizes = parse_list<int>(w, v); } },
  };
  return table;
}

} // namespace

ExperimentConfig parse_config(std::istream& in, const std::string& origin)
{
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(origin + ":" + std::to_string(e.line()) + ": " +
                      e.message());
  }
  ExperimentConfig cfg;
  const auto& table = setters();
  for (const auto& [section, body] : tree) {
    if (body.empty())
      throw ConfigError(origin + ": key '" + section +
                        "' must be inside a [section]");
    for (const auto& [key, value] : body) {
      const std::string name = section + "." + key;
      const std::string where = origin + ": [" + section + "] " + key;
      auto it = table.find(name);
      if (it == table.end())
        throw ConfigError(where + ": unknown setting");
      it->second(cfg, where, boost::trim_copy(value.data()));
    }
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config file " + path);
  return parse_config(in, path);
}

namespace {

template<class T, class F>
std::string join(const std::vector<T>& v, F fmt)
{
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i)
      s += ", ";
    s += fmt(v[i]);
  }
  return s;
}

} // namespace

void print_config(std::ostream& out, const ExperimentConfig& c)
{
  auto num = [](double v) { return format_double(v); };
  out << "[experiment]\n"
      << "example = " << to_string(c.example) << '\n'
      << "n = " << c.n << '\n'
      << "seeds = "
      << join(c.seeds, [](std::uint64_t s) { return std::to_string(s); })
      << '\n'
      << "output_dir = " << c.output_dir << '\n'
      << "threads = " << c.threads << '\n'
      << "window_n = " << c.window_n << '\n'
      << "\n[basis]\n"
      << "; 0 selects the per-example default\n"
      << "order = " << c.basis_order << '\n'
      << "radius = " << num(c.basis_radius) << '\n'
      << "\n[grid]\n"
      << "n = " << c.grid_n << '\n'
      << "; 0 selects twice the basis radius\n"
      << "half_width = " << num(c.grid_half_width) << '\n'
      << "\n[deformation]\n"
      << "integrator = "
      << (c.deformation.integrator == Integrator::rk4 ? "rk4" : "euler") << '\n'
      << "rebuild_steps = " << c.deformation.rebuild_steps << '\n'
      << "beltrami_tol = " << num(c.deformation.beltrami_tol) << '\n'
      << "solve_mode = "
      << (c.deformation.solve.mode == SolveMode::whole_plane ? "whole_plane"
                                                              : "periodic")
      << '\n'
      << "newton_iters = " << c.deformation.newton_iters << '\n'
      << "newton_tol = " << num(c.deformation.newton_tol) << '\n'
      << "\n[optimizer]\n"
      << "max_step_len = " << num(c.optimizer.max_step_len) << '\n'
      << "hessian_init_diag = " << num(c.optimizer.hessian_init_diag) << '\n'
      << "max_halvings = " << c.optimizer.max_halvings << '\n'
      << "rebuild_every = " << c.optimizer.rebuild_every << '\n'
      << "max_iters = " << c.optimizer.max_iters << '\n'
      << "grad_tol = " << num(c.optimizer.grad_tol) << '\n'
      << "lambda_grid = " << join(c.optimizer.lambda_grid, num) << '\n'
      << "\n[bench]\n"
      << "examples = "
      << join(c.bench_examples, [](Example e) { return to_string(e); }) << '\n'
      << "sizes = "
      << join(c.bench_sizes, [](int s) { return std::to_string(s); }) << '\n';
}

} // namespace qcde
