#include "qcde/dilatation.hpp"

#include <Eigen/Dense>

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace qcde {

void BasisSpec::validate() const
{
  if (N < 0)
    throw InvalidArgument("basis order N must be >= 0");
  if (!(L > 0.0) || !std::isfinite(L))
    throw InvalidArgument("basis radius L must be positive");
}

ParamVector ParamVector::zeros(const BasisSpec& spec)
{
  ParamVector p;
  p.coeffs.assign(static_cast<std::size_t>(spec.count()), 0.0);
  return p;
}

std::vector<double> ParamVector::flat() const
{
  std::vector<double> v{ a.real(), a.imag(), b.real(), b.imag() };
  v.insert(v.end(), coeffs.begin(), coeffs.end());
  return v;
}

ParamVector ParamVector::from_flat(const std::vector<double>& v)
{
  if (v.size() < 4)
    throw DimensionMismatch("flat parameter vector shorter than 4");
  ParamVector p;
  p.a = { v[0], v[1] };
  p.b = { v[2], v[3] };
  p.coeffs.assign(v.begin() + 4, v.end());
  return p;
}

void ParamVector::validate(const BasisSpec& spec) const
{
  if (coeffs.size() != static_cast<std::size_t>(spec.count()))
    throw DimensionMismatch("expected " + std::to_string(spec.count()) +
                            " coefficients, got " +
                            std::to_string(coeffs.size()));
  if (a == cplx(0.0))
    throw InvalidArgument("scale parameter a must be nonzero");
  auto finite = [](double x) { return std::isfinite(x); };
  if (!finite(a.real()) || !finite(a.imag()) || !finite(b.real()) ||
      !finite(b.imag()) || !std::all_of(coeffs.begin(), coeffs.end(), finite))
    throw InvalidArgument("parameter vector holds non-finite values");
}

bool ParamVector::coeffs_zero() const
{
  return std::all_of(coeffs.begin(), coeffs.end(),
                     [](double c) { return c == 0.0; });
}

ParamVector operator+(const ParamVector& x, const ParamVector& y)
{
  if (x.coeffs.size() != y.coeffs.size())
    throw DimensionMismatch("parameter vectors differ in length");
  ParamVector r = x;
  r.a += y.a;
  r.b += y.b;
  for (std::size_t i = 0; i < r.coeffs.size(); ++i)
    r.coeffs[i] += y.coeffs[i];
  return r;
}

ParamVector operator*(double s, const ParamVector& x)
{
  ParamVector r = x;
  r.a *= s;
  r.b *= s;
  for (auto& c : r.coeffs)
    c *= s;
  return r;
}

double bump(double x, double y, double L)
{
  const double r2 = (x * x + y * y) / (L * L);
  if (r2 >= 1.0)
    return 0.0;
  const double r4 = r2 * r2;
  return 1.0 - r4 * r4;
}

namespace {

// e^{i pi k t / L} for k = -N..N
std::vector<cplx> phases(double t, const BasisSpec& spec)
{
  std::vector<cplx> out(static_cast<std::size_t>(spec.side()));
  const cplx step = std::polar(1.0, M_PI * t / spec.L);
  cplx cur = std::polar(1.0, -M_PI * spec.N * t / spec.L);
  for (auto& v : out) {
    v = cur;
    cur *= step;
  }
  return out;
}

// side x side matrix C(k1 + N, k2 + N) of complex mode coefficients
Eigen::MatrixXcd coefficient_matrix(const ParamVector& theta,
                                    const BasisSpec& spec)
{
  const int s = spec.side();
  Eigen::MatrixXcd C(s, s);
  for (int m = 0; m < spec.modes(); ++m)
    C(m / s, m % s) = cplx(theta.coeffs[2 * m], theta.coeffs[2 * m + 1]);
  return C;
}

} // namespace

cplx eval_phi_at(const ParamVector& theta, const BasisSpec& spec, cplx z)
{
  if (theta.coeffs.size() != static_cast<std::size_t>(spec.count()))
    throw DimensionMismatch("coefficient count does not match basis");
  const double T = bump(z.real(), z.imag(), spec.L);
  if (T == 0.0)
    return 0.0;
  const auto ex = phases(z.real(), spec);
  const auto ey = phases(z.imag(), spec);
  const int s = spec.side();
  cplx acc = 0.0;
  for (int i = 0; i < s; ++i) {
    cplx row = 0.0;
    for (int j = 0; j < s; ++j) {
      const int m = i * s + j;
      row += cplx(theta.coeffs[2 * m], theta.coeffs[2 * m + 1]) * ey[j];
    }
    acc += row * ex[i];
  }
  return acc * T;
}

ComplexGrid eval_phi(const ParamVector& theta,
                     const BasisSpec& spec,
                     const GridSpec& grid)
{
  if (theta.coeffs.size() != static_cast<std::size_t>(spec.count()))
    throw DimensionMismatch("coefficient count does not match basis");
  const int n = grid.n;
  const int s = spec.side();
  // E(i, k) = e^{i pi k t_i / L}; the same table serves x and y
  Eigen::MatrixXcd E(n, s);
  for (int i = 0; i < n; ++i) {
    const auto p = phases(grid.coord(i), spec);
    for (int k = 0; k < s; ++k)
      E(i, k) = p[k];
  }
  const Eigen::MatrixXcd C = coefficient_matrix(theta, spec);
  // phi(r, c) = sum_{k1,k2} C(k1,k2) E(c,k1) E(r,k2)
  const Eigen::MatrixXcd A = E * C;                  // A(c, k2)
  const Eigen::MatrixXcd Phi = E * A.transpose();    // Phi(r, c)
  ComplexGrid out(grid);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const double T = bump(grid.coord(c), grid.coord(r), spec.L);
      out(r, c) = T == 0.0 ? cplx(0.0) : Phi(r, c) * T;
    }
  return out;
}

cplx basis_element_at(int j, const BasisSpec& spec, cplx z)
{
  if (j < 0 || j >= spec.count())
    throw InvalidArgument("basis index out of range");
  const double T = bump(z.real(), z.imag(), spec.L);
  if (T == 0.0)
    return 0.0;
  const int m = j / 2;
  const double arg =
    M_PI * (spec.k1(m) * z.real() + spec.k2(m) * z.imag()) / spec.L;
  const cplx e = std::polar(T, arg);
  return j % 2 == 0 ? e : cplx(0.0, 1.0) * e;
}

ComplexGrid basis_element(int j, const BasisSpec& spec, const GridSpec& grid)
{
  return ComplexGrid::sample(
    grid, [&](cplx z) { return basis_element_at(j, spec, z); });
}

cplx phi_to_mu(cplx phi)
{
  return phi / (1.0 + std::abs(phi));
}

ComplexGrid phi_to_mu(const ComplexGrid& phi)
{
  ComplexGrid out(phi.spec());
  for (std::size_t i = 0; i < phi.size(); ++i)
    out[i] = phi_to_mu(phi[i]);
  return out;
}

NuCoefficients nu_coefficients(cplx phi)
{
  const double r = std::abs(phi);
  const double d = (1.0 + r) * (1.0 + r);
  NuCoefficients c;
  c.A = (2.0 + r) / (2.0 * d);
  c.B = r < 1e-14 ? cplx(0.0) : phi * phi / (2.0 * r * d);
  return c;
}

cplx perturb_nu(cplx phi, cplx dphi)
{
  const auto c = nu_coefficients(phi);
  return c.A * dphi - c.B * std::conj(dphi);
}

ComplexGrid perturb_nu(const ComplexGrid& phi, const ComplexGrid& dphi)
{
  if (!(phi.spec() == dphi.spec()))
    throw DimensionMismatch("phi and dphi live on different grids");
  ComplexGrid out(phi.spec());
  for (std::size_t i = 0; i < phi.size(); ++i)
    out[i] = perturb_nu(phi[i], dphi[i]);
  return out;
}

// ---------------------------------------------------------------------------

std::string format_double(double v)
{
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_qtheta(std::ostream& out,
                  const ParamVector& theta,
                  const BasisSpec& spec)
{
  theta.validate(spec);
  out << "QTHETA " << spec.N << ' ' << format_double(spec.L) << '\n';
  for (double v : theta.flat())
    out << format_double(v) << '\n';
}

void write_qtheta(const std::string& path,
                  const ParamVector& theta,
                  const BasisSpec& spec)
{
  std::ofstream out(path);
  if (!out)
    throw FormatError("cannot open " + path + " for writing");
  write_qtheta(out, theta, spec);
}

namespace {

double parse_double(const std::string& s)
{
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw FormatError("not a number: '" + s + "'");
  return v;
}

} // namespace

std::pair<ParamVector, BasisSpec> read_qtheta(std::istream& in)
{
  std::string line;
  if (!std::getline(in, line))
    throw FormatError("missing QTHETA header");
  std::istringstream hs(line);
  std::string magic, lstr;
  BasisSpec spec;
  hs >> magic >> spec.N >> lstr;
  if (magic != "QTHETA" || !hs)
    throw FormatError("malformed QTHETA header: " + line);
  spec.L = parse_double(lstr);
  spec.validate();
  std::vector<double> flat;
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    flat.push_back(parse_double(line));
  }
  if (flat.size() != static_cast<std::size_t>(4 + spec.count()))
    throw FormatError("QTHETA body has " + std::to_string(flat.size()) +
                      " values, expected " + std::to_string(4 + spec.count()));
  auto theta = ParamVector::from_flat(flat);
  theta.validate(spec);
  return { theta, spec };
}

std::pair<ParamVector, BasisSpec> read_qtheta(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw FormatError("cannot open " + path);
  return read_qtheta(in);
}

} // namespace qcde
