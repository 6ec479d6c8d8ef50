#include "qcde/data.hpp"

#include "qcde/dilatation.hpp"
#include "qcde/rng.hpp"

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/roots.hpp>

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace qcde {

std::string to_string(Example e)
{
  switch (e) {
    case Example::halfg:
      return "halfg";
    case Example::stroke:
      return "stroke";
    case Example::waffle:
      return "waffle";
  }
  return "?";
}

Example parse_example(const std::string& name)
{
  if (name == "halfg")
    return Example::halfg;
  if (name == "stroke")
    return Example::stroke;
  if (name == "waffle")
    return Example::waffle;
  throw ConfigError("unknown example '" + name +
                    "' (expected halfg, stroke or waffle)");
}

double halfg_edge(double u)
{
  return std::sin(5.0 * u) / 15.0 - u * std::tanh(u) / 3.0;
}

cplx halfg_map(cplx x)
{
  return { x.real() + halfg_edge(x.imag()), x.imag() };
}

cplx stroke_map(cplx x)
{
  const double x1 = x.real(), x2 = x.imag();
  return { x1 / 2.0,
           (3.0 + 2.0 * std::tanh(x1)) * x2 / 20.0 - 0.8 * std::sin(x1) };
}

cplx waffle_map(cplx x)
{
  const double x1 = x.real(), x2 = x.imag();
  return { 2.0 / 3.0 * (x1 + std::sin(2.0 * M_PI * x1) / M_PI),
           2.0 / 3.0 *
             (x2 + std::cos(2.0 * M_PI * x2) / M_PI + (x1 / 3.0) * (x1 / 3.0)) };
}

namespace {

Dataset make(Example e, std::uint64_t seed)
{
  Dataset d;
  d.example = e;
  d.seed = seed;
  return d;
}

} // namespace

Dataset sample_halfg(int n, std::uint64_t seed)
{
  if (n < 1)
    throw InvalidArgument("sample size must be >= 1");
  auto d = make(Example::halfg, seed);
  Rng rng(seed);
  while (static_cast<int>(d.points.size()) < n) {
    const auto [z1, z2] = rng.normal_pair();
    const cplx x(0.5 * z1, 0.5 * z2);
    if (x.real() > 0.0)
      continue;
    d.points.push_back(halfg_map(x));
  }
  return d;
}

Dataset sample_stroke(int n, std::uint64_t seed)
{
  if (n < 1)
    throw InvalidArgument("sample size must be >= 1");
  auto d = make(Example::stroke, seed);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const auto [z1, z2] = rng.normal_pair();
    d.points.push_back(stroke_map({ z1, z2 }));
  }
  return d;
}

Dataset sample_waffle(int n, std::uint64_t seed)
{
  if (n < 1)
    throw InvalidArgument("sample size must be >= 1");
  auto d = make(Example::waffle, seed);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const auto [z1, z2] = rng.normal_pair();
    d.points.push_back(waffle_map({ z1, z2 }));
  }
  return d;
}

Dataset sample(Example e, int n, std::uint64_t seed)
{
  switch (e) {
    case Example::halfg:
      return sample_halfg(n, seed);
    case Example::stroke:
      return sample_stroke(n, seed);
    case Example::waffle:
      return sample_waffle(n, seed);
  }
  throw InvalidArgument("unknown example");
}

// ---------------------------------------------------------------------------

std::vector<double> waffle_roots(WaffleBranch shape, double c, double range)
{
  if (std::abs(c) + 1.0 / M_PI >= range)
    throw BranchSearchIncomplete("waffle preimage search: level " +
                                 format_double(c) +
                                 " may have roots beyond +-" +
                                 format_double(range));
  const bool sine = shape == WaffleBranch::sine;
  auto g = [&](double x) {
    return x + (sine ? std::sin(2.0 * M_PI * x) : std::cos(2.0 * M_PI * x)) /
                 M_PI -
           c;
  };
  // critical points split the line into monotone pieces; roots lie within
  // 1/pi of c
  const double lo = c - 1.0 / M_PI - 1e-9;
  const double hi = c + 1.0 / M_PI + 1e-9;
  std::vector<double> cuts{ lo };
  const double offs[2] = { sine ? -1.0 / 3.0 : 1.0 / 12.0,
                           sine ? 1.0 / 3.0 : 5.0 / 12.0 };
  for (double k = std::floor(lo) - 1.0; k <= std::ceil(hi) + 1.0; k += 1.0)
    for (double o : offs) {
      const double x = k + o;
      if (x > lo && x < hi)
        cuts.push_back(x);
    }
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());

  std::vector<double> roots;
  auto tol = boost::math::tools::eps_tolerance<double>(50);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i], b = cuts[i + 1];
    const double fa = g(a), fb = g(b);
    double root;
    if (fa == 0.0)
      root = a;
    else if (fb == 0.0)
      root = b;
    else if ((fa < 0.0) != (fb < 0.0)) {
      std::uintmax_t iters = 100;
      const auto br =
        boost::math::tools::toms748_solve(g, a, b, fa, fb, tol, iters);
      root = 0.5 * (br.first + br.second);
    } else {
      continue;
    }
    if (roots.empty() || std::abs(root - roots.back()) > 1e-12)
      roots.push_back(root);
  }
  return roots;
}

namespace {

double std_normal(double x)
{
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

} // namespace

double true_density(Example e, cplx y, double range)
{
  const double y1 = y.real(), y2 = y.imag();
  switch (e) {
    case Example::halfg: {
      // N(0, I/4) restricted to x1 <= 0, sheared by the unit-Jacobian map
      const double x1 = y1 - halfg_edge(y2);
      if (x1 > 0.0)
        return 0.0;
      return 4.0 / M_PI * std::exp(-2.0 * (x1 * x1 + y2 * y2));
    }
    case Example::stroke: {
      const double x1 = 2.0 * y1;
      const double s = 3.0 + 2.0 * std::tanh(x1);
      const double x2 = (y2 + 0.8 * std::sin(x1)) * 20.0 / s;
      return std_normal(x1) * std_normal(x2) * 40.0 / s;
    }
    case Example::waffle: {
      double p = 0.0;
      for (double x1 : waffle_roots(WaffleBranch::sine, 1.5 * y1, range)) {
        const double c2 = 1.5 * y2 - (x1 / 3.0) * (x1 / 3.0);
        const double j1 = 1.0 + 2.0 * std::cos(2.0 * M_PI * x1);
        const double w1 = std_normal(x1);
        for (double x2 : waffle_roots(WaffleBranch::cosine, c2, range)) {
          const double j2 = 1.0 - 2.0 * std::sin(2.0 * M_PI * x2);
          const double det = 4.0 / 9.0 * std::abs(j1 * j2);
          if (det > 0.0)
            p += w1 * std_normal(x2) / det;
        }
      }
      return p;
    }
  }
  return 0.0;
}

std::vector<double> true_density(Example e,
                                 std::span<const cplx> pts,
                                 double range)
{
  std::vector<double> out;
  out.reserve(pts.size());
  for (const auto& p : pts)
    out.push_back(true_density(e, p, range));
  return out;
}

GridSpec metric_window(Example e, int n)
{
  GridSpec g{ e == Example::stroke ? 2.0 : 2.5, n };
  g.validate();
  return g;
}

DensityGrid true_density_grid(Example e, const GridSpec& window, double range)
{
  return DensityGrid::sample(
    window, [&](cplx y) { return true_density(e, y, range); });
}

namespace {

using Gauss = boost::math::quadrature::gauss<double, 24>;

// Smooth integrand, pieces no wider than `width`.
template <class F>
double integrate_smooth(F f, double a, double b, double width)
{
  const int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / width)));
  const double d = (b - a) / pieces;
  double s = 0.0;
  for (int i = 0; i < pieces; ++i)
    s += Gauss::integrate(f, a + i * d, a + (i + 1) * d);
  return s;
}

// y = a + (b - a)(1 - cos t)/2 turns (y - a)^(-1/2) and (b - y)^(-1/2)
// endpoint behaviour into a smooth integrand.
template <class F>
double integrate_folded(F f, double a, double b)
{
  return Gauss::integrate(
    [&](double t) {
      return f(a + 0.5 * (b - a) * (1.0 - std::cos(t))) * 0.5 * (b - a) * std::sin(t);
    },
    0.0, M_PI);
}

// Images v of the critical points of x + trig(2 pi x)/pi (offsets o1, o2 in
// the level variable), mapped by y = scale (v + shift), inside (lo, hi).
std::vector<double> fold_cuts(double lo, double hi, double o1, double o2, double scale, double shift)
{
  std::vector<double> s{ lo, hi };
  for (double k = std::floor(lo / scale - shift) - 2.0; k <= std::ceil(hi / scale - shift) + 2.0; k += 1.0)
    for (double o : { o1, o2 }) {
      const double y = scale * (k + o + shift);
      if (y > lo && y < hi)
        s.push_back(y);
    }
  std::sort(s.begin(), s.end());
  return s;
}

double std_cdf(double x)
{
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

} // namespace

double true_mass(Example e, cplx lo, cplx hi, double range)
{
  const double x0 = lo.real(), x1 = hi.real(), y0 = lo.imag(), y1 = hi.imag();
  if (!(x0 < x1) || !(y0 < y1))
    throw InvalidArgument("true_mass: empty box");
  switch (e) {
    case Example::halfg:
      // closed form across y1, including the cut at the edge
      return integrate_smooth(
        [&](double v) {
          const double h = halfg_edge(v);
          const double a = x0 - h, b = std::min(x1 - h, 0.0);
          if (a >= b)
            return 0.0;
          return 4.0 / M_PI * std::exp(-2.0 * v * v) * std::sqrt(M_PI / 8.0) *
                 (std::erf(std::sqrt(2.0) * b) - std::erf(std::sqrt(2.0) * a));
        },
        y0, y1, 0.125);
    case Example::stroke:
      // x1 = 2 y1; x2 is affine in y2 for fixed y1
      return integrate_smooth(
        [&](double u) {
          const double s = 3.0 + 2.0 * std::tanh(u);
          const double a = (y0 + 0.8 * std::sin(u)) * 20.0 / s;
          const double b = (y1 + 0.8 * std::sin(u)) * 20.0 / s;
          return std_normal(u) * (std_cdf(b) - std_cdf(a));
        },
        2.0 * x0, 2.0 * x1, 0.125);
    case Example::waffle: {
      // critical values of x + sin(2 pi x)/pi at x = 1/3, 2/3 and of
      // x + cos(2 pi x)/pi at x = 1/12, 5/12, all mod 1
      const double r3 = std::sqrt(3.0) / (2.0 * M_PI);
      const double s_hi = 1.0 / 3.0 + r3, s_lo = 2.0 / 3.0 - r3;
      const double c_hi = 1.0 / 12.0 + r3, c_lo = 5.0 / 12.0 - r3;
      auto column = [&](double u) {
        std::vector<double> cuts{ y0, y1 };
        for (double r : waffle_roots(WaffleBranch::sine, 1.5 * u, range)) {
          const auto c = fold_cuts(y0, y1, c_hi, c_lo, 2.0 / 3.0, (r / 3.0) * (r / 3.0));
          cuts.insert(cuts.end(), c.begin(), c.end());
        }
        std::sort(cuts.begin(), cuts.end());
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
          if (cuts[i + 1] > cuts[i])
            s += integrate_folded(
              [&](double v) { return true_density(Example::waffle, cplx(u, v), range); },
              cuts[i], cuts[i + 1]);
        return s;
      };
      const auto cuts = fold_cuts(x0, x1, s_hi, s_lo, 2.0 / 3.0, 0.0);
      double s = 0.0;
      for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        s += integrate_folded(column, cuts[i], cuts[i + 1]);
      return s;
    }
  }
  return 0.0;
}

DensityGrid kde(std::span<const cplx> data,
                double bandwidth,
                const GridSpec& window)
{
  if (!(bandwidth > 0.0))
    throw InvalidArgument("KDE bandwidth must be positive");
  if (data.empty())
    throw InvalidArgument("KDE needs at least one point");
  const int n = window.n;
  const auto m = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd Kx(n, m), Ky(n, m);
  const double c = 1.0 / (std::sqrt(2.0 * M_PI) * bandwidth);
  for (int i = 0; i < n; ++i) {
    const double t = window.coord(i);
    for (Eigen::Index k = 0; k < m; ++k) {
      const double dx = (t - data[k].real()) / bandwidth;
      const double dy = (t - data[k].imag()) / bandwidth;
      Kx(i, k) = c * std::exp(-0.5 * dx * dx);
      Ky(i, k) = c * std::exp(-0.5 * dy * dy);
    }
  }
  const Eigen::MatrixXd D = Ky * Kx.transpose() / static_cast<double>(m);
  DensityGrid out(window);
  for (int r = 0; r < n; ++r)
    for (int col = 0; col < n; ++col)
      out(r, col) = D(r, col);
  return out;
}

KdeOracle kde_oracle_ise(std::span<const cplx> data, const DensityGrid& truth)
{
  KdeOracle o;
  o.ise = std::numeric_limits<double>::infinity();
  const int count = 25;
  for (int i = 0; i < count; ++i) {
    const double bw =
      0.005 * std::pow(1.0 / 0.005, static_cast<double>(i) / (count - 1));
    const auto est = kde(data, bw, truth.spec());
    const double ise = metrics(est, truth).ise;
    o.bandwidths.push_back(bw);
    o.ises.push_back(ise);
    if (ise < o.ise) {
      o.ise = ise;
      o.bandwidth = bw;
    }
  }
  return o;
}

Metrics metrics(const DensityGrid& p, const DensityGrid& q)
{
  if (!(p.spec() == q.spec()))
    throw DimensionMismatch("densities live on different windows");
  double ise = 0.0, h2 = 0.0, l1 = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < -1e-12 || q[i] < -1e-12)
      throw NegativeDensity("density value " +
                            format_double(std::min(p[i], q[i])) +
                            " is negative");
    const double a = std::max(p[i], 0.0), b = std::max(q[i], 0.0);
    ise += (a - b) * (a - b);
    const double s = std::sqrt(a) - std::sqrt(b);
    h2 += s * s;
    l1 += std::abs(a - b);
  }
  const double h = p.spec().spacing();
  Metrics m;
  m.ise = ise * h * h;
  m.hellinger2 = 0.5 * h2 * h * h;
  m.hellinger = std::sqrt(m.hellinger2);
  m.l1 = l1 * h * h;
  return m;
}

// ---------------------------------------------------------------------------

void write_csv(std::ostream& out, const Dataset& d)
{
  out << "x,y\n";
  for (const auto& p : d.points)
    out << format_double(p.real()) << ',' << format_double(p.imag()) << '\n';
}

void write_csv(const std::string& path, const Dataset& d)
{
  std::ofstream out(path);
  if (!out)
    throw FormatError("cannot open " + path + " for writing");
  write_csv(out, d);
}

std::vector<cplx> read_csv(std::istream& in)
{
  std::string line;
  if (!std::getline(in, line))
    throw FormatError("empty dataset file");
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
  if (line != "x,y")
    throw FormatError("dataset header must be 'x,y', got '" + line + "'");
  std::vector<cplx> pts;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw FormatError("line " + std::to_string(lineno) + ": expected x,y");
    try {
      std::size_t used1 = 0, used2 = 0;
      const std::string xs = line.substr(0, comma);
      const std::string ys = line.substr(comma + 1);
      const double x = std::stod(xs, &used1);
      const double y = std::stod(ys, &used2);
      if (used1 != xs.size() || used2 != ys.size())
        throw std::invalid_argument("trailing characters");
      pts.emplace_back(x, y);
    } catch (const std::exception&) {
      throw FormatError("line " + std::to_string(lineno) + ": bad number in '" +
                        line + "'");
    }
  }
  return pts;
}

std::vector<cplx> read_csv(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw FormatError("cannot open " + path);
  return read_csv(in);
}

} // namespace qcde
