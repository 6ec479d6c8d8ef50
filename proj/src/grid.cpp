#include "qcde/grid.hpp"

#include "qcde/fft.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace qcde {

void GridSpec::validate() const
{
  if (!(half_width > 0.0) || !std::isfinite(half_width))
    throw InvalidArgument("grid half-width must be positive and finite");
  if (n < 16 || !std::has_single_bit(static_cast<unsigned>(n)))
    throw InvalidArgument("grid size must be a power of two >= 16, got " +
                          std::to_string(n));
}

double wavenumber(const GridSpec& spec, int index)
{
  const int m = index < spec.n / 2 ? index : index - spec.n;
  return 2.0 * M_PI * m / spec.period();
}

namespace {

// derivative wavenumber: the Nyquist mode has no well-defined derivative
double deriv_wavenumber(const GridSpec& spec, int index)
{
  return index == spec.n / 2 ? 0.0 : wavenumber(spec, index);
}

void require_finite(const ComplexGrid& g, const char* what)
{
  if (!g.all_finite())
    throw NonFiniteGrid(std::string(what) + ": input grid holds NaN or Inf");
}

} // namespace

WirtingerPair wirtinger(const ComplexGrid& g)
{
  require_finite(g, "wirtinger");
  const auto& spec = g.spec();
  const int n = spec.n;
  std::vector<cplx> hat(g.values().begin(), g.values().end());
  fft::forward(hat, n);
  std::vector<cplx> dz(hat.size()), dzbar(hat.size());
  const double norm = 1.0 / static_cast<double>(spec.size());
  for (int r = 0; r < n; ++r) {
    const double ky = deriv_wavenumber(spec, r);
    for (int c = 0; c < n; ++c) {
      const double kx = deriv_wavenumber(spec, c);
      const std::size_t i = static_cast<std::size_t>(r) * n + c;
      // d/dx -> i kx, d/dy -> i ky
      dz[i] = 0.5 * cplx(ky, kx) * hat[i] * norm;
      dzbar[i] = 0.5 * cplx(-ky, kx) * hat[i] * norm;
    }
  }
  fft::backward(dz, n);
  fft::backward(dzbar, n);
  return { ComplexGrid(spec, std::move(dz)), ComplexGrid(spec, std::move(dzbar)) };
}

ComplexGrid poisson_solve(const ComplexGrid& g)
{
  require_finite(g, "poisson_solve");
  const auto& spec = g.spec();
  const int n = spec.n;
  std::vector<cplx> hat(g.values().begin(), g.values().end());
  fft::forward(hat, n);
  const double norm = 1.0 / static_cast<double>(spec.size());
  for (int r = 0; r < n; ++r) {
    const double ky = wavenumber(spec, r);
    for (int c = 0; c < n; ++c) {
      const double kx = wavenumber(spec, c);
      const std::size_t i = static_cast<std::size_t>(r) * n + c;
      const double k2 = kx * kx + ky * ky;
      hat[i] = k2 == 0.0 ? cplx(0.0) : -4.0 * hat[i] / k2 * norm;
    }
  }
  fft::backward(hat, n);
  return ComplexGrid(spec, std::move(hat));
}

// ---------------------------------------------------------------------------

bool inside(const GridSpec& spec, cplx pt, double margin)
{
  const double lo = -spec.half_width + margin * spec.spacing();
  const double hi = spec.half_width - margin * spec.spacing();
  return pt.real() >= lo && pt.real() <= hi && pt.imag() >= lo &&
         pt.imag() <= hi;
}

cplx interp(const ComplexGrid& g, cplx pt)
{
  const auto& spec = g.spec();
  if (!inside(spec, pt, 1.0))
    throw PointOutsideGrid("bilinear interpolation point outside the safe "
                           "margin of the grid");
  const double h = spec.spacing();
  const double fx = (pt.real() + spec.half_width) / h;
  const double fy = (pt.imag() + spec.half_width) / h;
  const int c = std::min(static_cast<int>(std::floor(fx)), spec.n - 2);
  const int r = std::min(static_cast<int>(std::floor(fy)), spec.n - 2);
  const double tx = fx - c;
  const double ty = fy - r;
  return (1 - ty) * ((1 - tx) * g(r, c) + tx * g(r, c + 1)) +
         ty * ((1 - tx) * g(r + 1, c) + tx * g(r + 1, c + 1));
}

std::vector<cplx> interp(const ComplexGrid& g, std::span<const cplx> pts)
{
  std::vector<cplx> out;
  out.reserve(pts.size());
  for (const auto& p : pts)
    out.push_back(interp(g, p));
  return out;
}

namespace {

// Keys cubic convolution kernel, a = -1/2
inline void keys_weights(double t, double w[4])
{
  const double t2 = t * t;
  const double t3 = t2 * t;
  w[0] = -0.5 * t3 + t2 - 0.5 * t;
  w[1] = 1.5 * t3 - 2.5 * t2 + 1.0;
  w[2] = -1.5 * t3 + 2.0 * t2 + 0.5 * t;
  w[3] = 0.5 * t3 - 0.5 * t2;
}

inline void keys_derivative(double t, double w[4])
{
  const double t2 = t * t;
  w[0] = -1.5 * t2 + 2.0 * t - 0.5;
  w[1] = 4.5 * t2 - 5.0 * t;
  w[2] = -4.5 * t2 + 4.0 * t + 0.5;
  w[3] = 1.5 * t2 - t;
}

} // namespace

CubicJet interp_cubic_jet(const ComplexGrid& g, cplx pt, Edge edge)
{
  const auto& spec = g.spec();
  const auto s = cubic_stencil(spec, pt, edge);
  const double h = spec.spacing();
  const double fx = (pt.real() + spec.half_width) / h;
  const double fy = (pt.imag() + spec.half_width) / h;
  double dc[4], dr[4];
  keys_derivative(fx - std::floor(fx), dc);
  keys_derivative(fy - std::floor(fy), dr);
  const int n = g.n();
  CubicJet out{ 0.0, 0.0, 0.0 };
  for (int a = 0; a < 4; ++a) {
    int r = s.row0 + a;
    r = edge == Edge::periodic ? ((r % n) + n) % n : std::clamp(r, 0, n - 1);
    cplx row = 0.0, drow = 0.0;
    for (int b = 0; b < 4; ++b) {
      int c = s.col0 + b;
      c = edge == Edge::periodic ? ((c % n) + n) % n : std::clamp(c, 0, n - 1);
      const cplx v = g(r, c);
      row += s.wc[b] * v;
      drow += dc[b] * v;
    }
    out.value += s.wr[a] * row;
    out.dx += s.wr[a] * drow;
    out.dy += dr[a] * row;
  }
  out.dx /= h;
  out.dy /= h;
  return out;
}

CubicStencil cubic_stencil(const GridSpec& spec, cplx pt, Edge edge)
{
  const double h = spec.spacing();
  double fx = (pt.real() + spec.half_width) / h;
  double fy = (pt.imag() + spec.half_width) / h;
  if (edge == Edge::clamp) {
    const double top = spec.n - 1;
    if (!(fx >= 0.0 && fx <= top && fy >= 0.0 && fy <= top))
      throw PointOutsideGrid("cubic interpolation point outside the grid");
  } else if (!std::isfinite(fx) || !std::isfinite(fy)) {
    throw PointOutsideGrid("non-finite interpolation point");
  }
  const double cx = std::floor(fx);
  const double cy = std::floor(fy);
  CubicStencil s;
  s.col0 = static_cast<int>(cx) - 1;
  s.row0 = static_cast<int>(cy) - 1;
  keys_weights(fx - cx, s.wc);
  keys_weights(fy - cy, s.wr);
  return s;
}

void scatter_cubic(ComplexGrid& target,
                   const CubicStencil& s,
                   Edge edge,
                   cplx weight)
{
  const int n = target.n();
  for (int a = 0; a < 4; ++a) {
    int r = s.row0 + a;
    r = edge == Edge::periodic ? ((r % n) + n) % n : std::clamp(r, 0, n - 1);
    const cplx wr = weight * s.wr[a];
    for (int b = 0; b < 4; ++b) {
      int c = s.col0 + b;
      c = edge == Edge::periodic ? ((c % n) + n) % n : std::clamp(c, 0, n - 1);
      target(r, c) += wr * s.wc[b];
    }
  }
}

double quad(const RealGrid& g)
{
  double sum = 0.0;
  for (double v : g.values())
    sum += v;
  const double h = g.spec().spacing();
  return sum * h * h;
}

// ---------------------------------------------------------------------------

namespace {

std::string shortest(double v)
{
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void put_doubles(std::ostream& out, const double* data, std::size_t count)
{
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(count * sizeof(double)));
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      auto bits = std::bit_cast<std::uint64_t>(data[i]);
      bits = __builtin_bswap64(bits);
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
}

void get_doubles(std::istream& in, double* data, std::size_t count)
{
  in.read(reinterpret_cast<char*>(data),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(double))
    throw FormatError("QGRID payload truncated");
  if constexpr (std::endian::native != std::endian::little) {
    for (std::size_t i = 0; i < count; ++i) {
      auto bits = std::bit_cast<std::uint64_t>(data[i]);
      data[i] = std::bit_cast<double>(__builtin_bswap64(bits));
    }
  }
}

void write_header(std::ostream& out, const GridSpec& spec, const char* kind)
{
  out << "QGRID " << spec.n << ' ' << shortest(spec.half_width) << ' ' << kind
      << '\n';
}

template<class G>
void write_file(const std::string& path, const G& g)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw FormatError("cannot open " + path + " for writing");
  write_qgrid(out, g);
}

} // namespace

void write_qgrid(std::ostream& out, const ComplexGrid& g)
{
  write_header(out, g.spec(), "complex");
  put_doubles(out, reinterpret_cast<const double*>(g.values().data()),
              2 * g.size());
}

void write_qgrid(std::ostream& out, const RealGrid& g)
{
  write_header(out, g.spec(), "real");
  put_doubles(out, g.values().data(), g.size());
}

void write_qgrid(const std::string& path, const ComplexGrid& g)
{
  write_file(path, g);
}

void write_qgrid(const std::string& path, const RealGrid& g)
{
  write_file(path, g);
}

AnyGrid read_qgrid(std::istream& in)
{
  std::string line;
  if (!std::getline(in, line))
    throw FormatError("missing QGRID header");
  std::istringstream hs(line);
  std::string magic, kind, lstr;
  GridSpec spec;
  hs >> magic >> spec.n >> lstr >> kind;
  if (magic != "QGRID" || !hs)
    throw FormatError("malformed QGRID header: " + line);
  auto res = std::from_chars(lstr.data(), lstr.data() + lstr.size(),
                             spec.half_width);
  if (res.ec != std::errc{})
    throw FormatError("bad half-width in QGRID header: " + lstr);
  spec.validate();
  if (kind == "complex") {
    ComplexGrid g(spec);
    get_doubles(in, reinterpret_cast<double*>(g.values().data()), 2 * g.size());
    return g;
  }
  if (kind == "real") {
    RealGrid g(spec);
    get_doubles(in, g.values().data(), g.size());
    return g;
  }
  throw FormatError("unknown QGRID kind: " + kind);
}

AnyGrid read_qgrid(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw FormatError("cannot open " + path);
  return read_qgrid(in);
}

} // namespace qcde
