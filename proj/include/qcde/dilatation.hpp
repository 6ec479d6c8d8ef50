#pragma once

#include "qcde/grid.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace qcde {

//! Truncated Fourier basis of complex dilatations. Frequencies (k1, k2) run
//! over [-N, N]^2 and every frequency carries a real and an imaginary
//! coefficient, so the basis has 2(2N+1)^2 elements.
struct BasisSpec
{
  int N = 0;
  double L = 1.0; //!< support radius of the bump

  int side() const { return 2 * N + 1; }
  int modes() const { return side() * side(); }
  int count() const { return 2 * modes(); }

  //! Frequencies of mode m; modes are ordered lexicographically in (k1, k2).
  int k1(int mode) const { return mode / side() - N; }
  int k2(int mode) const { return mode % side() - N; }

  void validate() const;
  bool operator==(const BasisSpec&) const = default;
};

//! theta = (a, b, coeffs). coeffs[2m] multiplies the real element of mode m,
//! coeffs[2m+1] the imaginary one.
struct ParamVector
{
  cplx a{ 1.0, 0.0 };
  cplx b{ 0.0, 0.0 };
  std::vector<double> coeffs;

  static ParamVector zeros(const BasisSpec& spec);

  //! Flat layout (a1, a2, b1, b2, coeffs...).
  std::size_t size() const { return 4 + coeffs.size(); }
  std::vector<double> flat() const;
  static ParamVector from_flat(const std::vector<double>& v);

  //! Throws InvalidArgument / DimensionMismatch.
  void validate(const BasisSpec& spec) const;
  bool coeffs_zero() const;
};

ParamVector operator+(const ParamVector& x, const ParamVector& y);
ParamVector operator*(double s, const ParamVector& x);

//! T(x, y) = 1 - (r/L)^8 inside the disk of radius L, 0 outside.
double bump(double x, double y, double L);

//! phi(z) at one point.
cplx eval_phi_at(const ParamVector& theta, const BasisSpec& spec, cplx z);
ComplexGrid eval_phi(const ParamVector& theta,
                     const BasisSpec& spec,
                     const GridSpec& grid);

//! Basis element j (index into coeffs) on a grid: e^{i pi (k1 x + k2 y)/L} T
//! for even j and i times that for odd j.
ComplexGrid basis_element(int j, const BasisSpec& spec, const GridSpec& grid);
cplx basis_element_at(int j, const BasisSpec& spec, cplx z);

cplx phi_to_mu(cplx phi);
ComplexGrid phi_to_mu(const ComplexGrid& phi);

//! Derivative of phi -> phi/(1+|phi|): nu = A dphi - B conj(dphi).
struct NuCoefficients
{
  double A;
  cplx B;
};
NuCoefficients nu_coefficients(cplx phi);
cplx perturb_nu(cplx phi, cplx dphi);
ComplexGrid perturb_nu(const ComplexGrid& phi, const ComplexGrid& dphi);

// QTHETA text format: "QTHETA N L", then a1 a2 b1 b2 and the coefficients,
// one number per line.
void write_qtheta(std::ostream& out, const ParamVector& theta, const BasisSpec& spec);
void write_qtheta(const std::string& path, const ParamVector& theta, const BasisSpec& spec);
std::pair<ParamVector, BasisSpec> read_qtheta(std::istream& in);
std::pair<ParamVector, BasisSpec> read_qtheta(const std::string& path);

//! Shortest decimal string that reads back to the same double.
std::string format_double(double v);

} // namespace qcde
