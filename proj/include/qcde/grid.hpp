#pragma once

#include "qcde/errors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace qcde {

using cplx = std::complex<double>;

//! Uniform square grid over [-half_width, half_width)^2 with n nodes per side.
//! Node (row, col) sits at x = -L + col*h, y = -L + row*h.
struct GridSpec
{
  double half_width = 1.0;
  int n = 16;

  double spacing() const { return 2.0 * half_width / n; }
  double coord(int index) const { return -half_width + index * spacing(); }
  cplx node(int row, int col) const { return { coord(col), coord(row) }; }
  std::size_t size() const { return static_cast<std::size_t>(n) * n; }
  double period() const { return 2.0 * half_width; }

  //! Throws InvalidArgument unless n >= 16 is a power of two and L > 0.
  void validate() const;

  bool operator==(const GridSpec&) const = default;
};

template<class T>
class Grid
{
public:
  using value_type = T;

  Grid() = default;
  explicit Grid(const GridSpec& spec, T fill = T{})
    : spec_(spec)
    , values_(spec.size(), fill)
  {}
  Grid(const GridSpec& spec, std::vector<T> values)
    : spec_(spec)
    , values_(std::move(values))
  {
    if (values_.size() != spec_.size())
      throw DimensionMismatch("grid value count does not match n*n");
  }

  //! Fill a grid by evaluating fn(z) at every node.
  template<class Fn>
  static Grid sample(const GridSpec& spec, Fn&& fn)
  {
    Grid g(spec);
    for (int r = 0; r < spec.n; ++r)
      for (int c = 0; c < spec.n; ++c)
        g(r, c) = fn(spec.node(r, c));
    return g;
  }

  const GridSpec& spec() const { return spec_; }
  int n() const { return spec_.n; }
  std::size_t size() const { return values_.size(); }

  T& operator()(int row, int col)
  {
    return values_[static_cast<std::size_t>(row) * spec_.n + col];
  }
  const T& operator()(int row, int col) const
  {
    return values_[static_cast<std::size_t>(row) * spec_.n + col];
  }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  std::vector<T>& storage() { return values_; }

  bool all_finite() const
  {
    for (const auto& v : values_) {
      if constexpr (std::is_same_v<T, cplx>) {
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
          return false;
      } else if (!std::isfinite(v)) {
        return false;
      }
    }
    return true;
  }

private:
  GridSpec spec_{};
  std::vector<T> values_;
};

using ComplexGrid = Grid<cplx>;
using RealGrid = Grid<double>;

// ---------------------------------------------------------------------------
// spectral calculus (periodic on the grid box)

//! Wirtinger derivatives dg = (g_x - i g_y)/2 and dbar g = (g_x + i g_y)/2.
struct WirtingerPair
{
  ComplexGrid dz;
  ComplexGrid dzbar;
};
WirtingerPair wirtinger(const ComplexGrid& g);

//! Zero-mean periodic solution w of  Laplace(w) = 4 (g - mean g).
//! Throws NonFiniteGrid if g holds NaN/Inf.
ComplexGrid poisson_solve(const ComplexGrid& g);

//! Fourier multipliers shared by the spectral operators. Index i along an
//! axis maps to wavenumber 2*pi*m/period with m in [-n/2, n/2).
double wavenumber(const GridSpec& spec, int index);

// ---------------------------------------------------------------------------
// interpolation

//! Bilinear interpolation; exact on fields affine in (x, y). Points must lie
//! in [-L + h, L - h]^2, otherwise PointOutsideGrid.
std::vector<cplx> interp(const ComplexGrid& g, std::span<const cplx> pts);
cplx interp(const ComplexGrid& g, cplx pt);

enum class Edge
{
  clamp,   //!< non-periodic field; stencil indices are clamped to the grid
  periodic //!< field is periodic over the grid box
};

//! 4x4 Keys cubic-convolution stencil (C1, third order).
struct CubicStencil
{
  int row0 = 0; //!< first stencil row (may be outside [0, n) before wrapping)
  int col0 = 0;
  double wr[4]{};
  double wc[4]{};
};

//! Throws PointOutsideGrid for Edge::clamp points outside [-L, L - h]^2.
CubicStencil cubic_stencil(const GridSpec& spec, cplx pt, Edge edge);

template<class T>
T interp_cubic(const Grid<T>& g, const CubicStencil& s, Edge edge)
{
  const int n = g.n();
  T acc{};
  for (int a = 0; a < 4; ++a) {
    int r = s.row0 + a;
    r = edge == Edge::periodic ? ((r % n) + n) % n : std::clamp(r, 0, n - 1);
    T row_acc{};
    for (int b = 0; b < 4; ++b) {
      int c = s.col0 + b;
      c = edge == Edge::periodic ? ((c % n) + n) % n : std::clamp(c, 0, n - 1);
      row_acc += s.wc[b] * g(r, c);
    }
    acc += s.wr[a] * row_acc;
  }
  return acc;
}

template<class T>
T interp_cubic(const Grid<T>& g, cplx pt, Edge edge)
{
  return interp_cubic(g, cubic_stencil(g.spec(), pt, edge), edge);
}

//! Value and x, y derivatives of the cubic interpolant.
struct CubicJet
{
  cplx value;
  cplx dx;
  cplx dy;
};

CubicJet interp_cubic_jet(const ComplexGrid& g, cplx pt, Edge edge);

//! Transpose of interp_cubic: adds weight * stencil into `target`.
void scatter_cubic(ComplexGrid& target,
                   const CubicStencil& s,
                   Edge edge,
                   cplx weight);

//! True if pt is at least `margin` node spacings inside the grid box.
bool inside(const GridSpec& spec, cplx pt, double margin = 1.0);

// ---------------------------------------------------------------------------
// quadrature

//! Midpoint rule: sum(g) * h^2.
double quad(const RealGrid& g);

// ---------------------------------------------------------------------------
// QGRID files: "QGRID n L kind\n" followed by row-major little-endian doubles

void write_qgrid(std::ostream& out, const ComplexGrid& g);
void write_qgrid(std::ostream& out, const RealGrid& g);
void write_qgrid(const std::string& path, const ComplexGrid& g);
void write_qgrid(const std::string& path, const RealGrid& g);

using AnyGrid = std::variant<RealGrid, ComplexGrid>;
AnyGrid read_qgrid(std::istream& in);
AnyGrid read_qgrid(const std::string& path);

} // namespace qcde
