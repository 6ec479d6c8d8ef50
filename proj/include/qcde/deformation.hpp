#pragma once

#include "qcde/beltrami.hpp"
#include "qcde/dilatation.hpp"

#include <vector>

namespace qcde {

enum class Integrator
{
  euler,
  rk4
};

struct DeformationOptions
{
  SolveOptions solve;
  double beltrami_tol = 5e-3;
  int newton_iters = 20;
  double newton_tol = 1e-10; //!< relative to L
  int rebuild_steps = 100;
  Integrator integrator = Integrator::euler;
};

//! Discrete map f = a F + b with F(0) = 0, F(1) = 1 stored on the source
//! grid, together with everything needed to push fields through f^{-1}.
//! The source grid and the solve grid of the normalized target frame
//! W = (zeta - b)/a share one GridSpec, with half-width twice the basis
//! radius by default. Solve-grid node S stands for W = frame_origin +
//! frame_scale S; the frame is the identity unless the image of the bump
//! disk would crowd the grid box.
struct DeformationState
{
  ParamVector theta;
  BasisSpec basis;
  GridSpec grid;
  DeformationOptions opts;

  ComplexGrid phi, mu;
  ComplexGrid F;  //!< (f - b)/a
  ComplexGrid Fz; //!< f_z / a
  int step_count = 0;

  //! F_z / (conj(F_z) (1 - |mu|^2)) on the source grid.
  ComplexGrid kfac;

  //! Target nodes whose preimage lies inside the bump disk, the preimages
  //! and their interpolation stencils on the source grid.
  std::vector<int> support;
  std::vector<cplx> support_pre;
  std::vector<CubicStencil> support_stencil;
  double support_radius = 0.0; //!< in solve-frame units
  //! Target node S stands for W = frame_origin + frame_scale S.
  double frame_scale = 1.0;
  cplx frame_origin = 0.0;

  //! Preimage of every target node inside the image box (NaN elsewhere);
  //! seeds the Newton iteration of the next state.
  std::vector<cplx> preimage;

  SolveOptions solve_options() const;
  ComplexGrid f() const;
  ComplexGrid f_z() const;
  //! log |J| = log(|a|^2 |F_z|^2 (1 - |mu|^2)) on the source grid.
  RealGrid log_jacobian() const;
};

//! Default deformation grid for a basis: half-width 2L.
GridSpec default_grid(const BasisSpec& basis, int n = 256);

//! Throws NonzeroCoefficients unless all basis coefficients vanish.
DeformationState init_affine(const ParamVector& theta,
                             const BasisSpec& basis,
                             const GridSpec& grid,
                             const DeformationOptions& opts = {});

//! f <- f + eps u o f and the matching update of f_z, where u is the vector
//! field of the direction dtheta. Throws OrientationLoss if the updated map
//! folds a grid cell or loses a nonzero f_z.
DeformationState step(const DeformationState& state,
                      const ParamVector& dtheta,
                      double eps);

//! Integrate the path (a, b, t coeffs), t from 0 to 1, in M steps.
//! Throws RebuildDiverged if the Beltrami residual exceeds the tolerance.
DeformationState rebuild(const ParamVector& theta,
                         const BasisSpec& basis,
                         const GridSpec& grid,
                         const DeformationOptions& opts = {});

//! Relative L2 norm of dbar F - mu dF over interior nodes, with fourth order
//! central differences.
double beltrami_residual(const DeformationState& state);

struct Evaluation
{
  std::vector<cplx> Y;
  std::vector<double> logJ;
};

//! f and log|J| at points of the source grid.
Evaluation evaluate(const DeformationState& state, std::span<const cplx> X);

//! Perturbation field u of direction dtheta at the state.
VectorField vector_field(const DeformationState& state,
                         const ParamVector& dtheta);

//! Smallest distance between images of distinct nodes inside the disk of
//! radius `radius` (brute force over a neighbourhood in the image plane).
double min_image_separation(const DeformationState& state, double radius);

} // namespace qcde
