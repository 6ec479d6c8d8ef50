#pragma once

#include "qcde/grid.hpp"

#include <utility>
#include <vector>

namespace qcde {

struct DeformationState;

//! How the dbar-equation is inverted.
//!
//! `periodic`: the zero-mean periodic spectral solution is used as is.
//! `whole_plane` (default): the periodic solution is corrected to the
//! Cauchy transform of g over the plane. The correction restores the mean
//! mode (a conj(W) term) and adds the analytic lattice sum of the periodic
//! kernel; far from the support the multipole expansion is used directly.
enum class SolveMode
{
  periodic,
  whole_plane
};

struct SolveOptions
{
  SolveMode mode = SolveMode::whole_plane;
  double support_radius = 0.0; //!< radius enclosing supp g; 0 means measure it
  int lattice_terms = 12;      //!< number of G_{4k} terms
  int far_moments = 80;        //!< multipole order
  //! Affine solve frame: g is sampled on grid nodes S standing for the
  //! points W = frame_origin + frame_scale S, and the potential is reported
  //! in W. Lets the image of the bump disk fit the grid box however far the
  //! map stretches it. Whole-plane mode only.
  double frame_scale = 1.0;
  cplx frame_origin = 0.0;
};

//! Eisenstein sums G_{4k} = sum' w^{-4k}, k = 1..K, over the lattice Z + iZ.
std::vector<double> square_lattice_eisenstein(int K);

//! V = Cauchy transform of g (or the periodic spectral solution of
//! dbar V = g - mean g in periodic mode), with dV = d V.
class CauchySolution
{
public:
  CauchySolution() = default;
  CauchySolution(const ComplexGrid& g, const SolveOptions& opts);

  //! (V(W), dV(W)).
  std::pair<cplx, cplx> eval(cplx W) const;
  //! Grid point standing for W.
  cplx to_local(cplx W) const { return (W - origin_) / scale_; }

  const ComplexGrid& periodic_part() const { return V_; }
  const ComplexGrid& periodic_derivative() const { return dV_; }
  double near_radius() const { return rho_; }
  double support_radius() const { return support_; }
  bool zero() const { return zero_; }

private:
  std::pair<cplx, cplx> eval_local(cplx S) const;

  SolveMode mode_ = SolveMode::periodic;
  double scale_ = 1.0;
  cplx origin_ = 0.0;
  ComplexGrid V_, dV_;
  bool zero_ = true;
  double P_ = 1.0;
  double rho_ = 0.0;
  double support_ = 0.0;
  cplx gbar_ = 0.0;
  cplx c0_ = 0.0;
  std::vector<cplx> poly_; // coefficients of w^p, w = W/P
  std::vector<cplx> far_;  // scaled multipole moments, t = z/rho
};

//! Perturbation vector field of the map f = a F + b, where F fixes 0 and 1.
//! In the normalized frame W = (zeta - b)/a,
//!   u(zeta) = db + (da/a)(zeta - b) + a U(W),  dbar U = g,  U(0) = U(1) = 0.
class VectorField
{
public:
  VectorField() = default;
  VectorField(cplx a, cplx b, cplx da, cplx db, CauchySolution V);

  //! (U(W), dU(W)) in the normalized frame.
  std::pair<cplx, cplx> normalized(cplx W) const;
  cplx u(cplx zeta) const;
  cplx du(cplx zeta) const;

  cplx a() const { return a_; }
  cplx b() const { return b_; }
  cplx da() const { return da_; }
  cplx db() const { return db_; }
  const CauchySolution& potential() const { return V_; }

private:
  cplx a_{ 1.0 }, b_{ 0.0 }, da_{ 0.0 }, db_{ 0.0 };
  CauchySolution V_;
  cplx V0_{ 0.0 }, slope_{ 0.0 };
};

//! Pulls back the perturbation nu (source grid) to the normalized target
//! frame: g(W) = [nu/(1-|mu|^2) F_z/conj(F_z)](F^{-1}(W)). The field in the
//! zeta frame is (a/conj a) g((zeta-b)/a).
ComplexGrid l_operator(const ComplexGrid& nu, const DeformationState& state);

//! Solve dbar U = g with U(0) = U(1) = 0 and wrap it into u. `g` lives in the
//! normalized frame of the map a F + b.
//! Throws DegeneratePinning for a = 0.
VectorField solve_u(const ComplexGrid& g,
                    cplx a,
                    cplx b,
                    cplx da,
                    cplx db,
                    const SolveOptions& opts = {});

std::vector<double> divergence_at(const VectorField& vf,
                                  std::span<const cplx> pts);

//! Relative L2 residual of dbar U - g on the grid.
double dbar_residual(const VectorField& vf, const ComplexGrid& g);

//! Linear functional g -> sum_p alpha_p V(W_p) + beta_p dV(W_p) of the
//! (unpinned) potential. adjoint_weights returns r with
//! functional(g) = sum_i r_i g[nodes_i] for every g supported on `nodes`.
struct PointFunctional
{
  std::vector<cplx> points;
  std::vector<cplx> alpha;
  std::vector<cplx> beta;
};

std::vector<cplx> adjoint_weights(const GridSpec& spec,
                                  std::span<const int> nodes,
                                  const PointFunctional& fn,
                                  const SolveOptions& opts);

} // namespace qcde
