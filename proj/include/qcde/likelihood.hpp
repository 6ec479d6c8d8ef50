#pragma once

#include "qcde/deformation.hpp"

#include <functional>
#include <string>
#include <vector>

namespace qcde {

//! Known target measure with density exp(H).
struct TargetDensity
{
  std::string name;
  std::function<double(cplx)> logpdf;
  //! (dH/dx) + i (dH/dy)
  std::function<cplx(cplx)> grad;
};

TargetDensity gaussian_target(double sigma);

//! Softened half-normal in x1 times N(0, 1/4) in x2.
TargetDensity halfg_target();

//! Gradients use the flat parameter layout (a1, a2, b1, b2, coeffs...).
using GradientVector = std::vector<double>;

double loglike(const DeformationState& state,
               std::span<const cplx> X,
               const TargetDensity& target);

//! Exact gradient of loglike with respect to theta. All basis directions are
//! obtained from one adjoint solve.
GradientVector grad_loglike(const DeformationState& state,
                            std::span<const cplx> X,
                            const TargetDensity& target);

//! Same quantity computed direction by direction from the vector fields u_j.
//! Much slower; kept as a reference.
GradientVector grad_loglike_direct(const DeformationState& state,
                                   std::span<const cplx> X,
                                   const TargetDensity& target);

//! J(theta) = sum (k1^2 + k2^2)^2 (re^2 + im^2) over the basis coefficients.
double penalty(const ParamVector& theta, const BasisSpec& spec);
GradientVector penalty_grad(const ParamVector& theta, const BasisSpec& spec);

} // namespace qcde
