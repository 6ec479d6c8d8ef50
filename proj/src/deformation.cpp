#include "qcde/deformation.hpp"

#include <cmath>
#include <limits>
#include <optional>

namespace qcde {

SolveOptions DeformationState::solve_options() const
{
  SolveOptions s = opts.solve;
  s.support_radius = support_radius;
  s.frame_scale = frame_scale;
  s.frame_origin = frame_origin;
  return s;
}

ComplexGrid DeformationState::f() const
{
  ComplexGrid out(grid);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = theta.a * F[i] + theta.b;
  return out;
}

ComplexGrid DeformationState::f_z() const
{
  ComplexGrid out(grid);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = theta.a * Fz[i];
  return out;
}

RealGrid DeformationState::log_jacobian() const
{
  RealGrid out(grid);
  const double la = std::log(std::norm(theta.a));
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = la + std::log(std::norm(Fz[i])) + std::log1p(-std::norm(mu[i]));
  return out;
}

GridSpec default_grid(const BasisSpec& basis, int n)
{
  GridSpec g{ 2.0 * basis.L, n };
  g.validate();
  return g;
}

namespace {

constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();
// largest image radius, as a fraction of the grid half-width, that the solve
// grid takes without rescaling
constexpr double frame_fill = 0.6;

struct Newton
{
  const ComplexGrid& F;
  double tol;
  int iters;
  double lo, hi; // admissible box for iterates

  std::optional<cplx> solve(cplx W, cplx z) const { return run(W, z, iters, false); }

  // Slower variant with backtracking on |W - F(z)|, for starts far from
  // the root or nodes where the linearization is poor.
  std::optional<cplx> solve_damped(cplx W, cplx z) const
  {
    return run(W, z, 8 * iters, true);
  }

  bool admissible(cplx z) const
  {
    return z.real() >= lo && z.real() <= hi && z.imag() >= lo && z.imag() <= hi;
  }

  // Newton on the cubic interpolant of F with its exact derivative.
  std::optional<cplx> run(cplx W, cplx z, int max_iters, bool damped) const
  {
    if (!admissible(z))
      return std::nullopt;
    auto jet = interp_cubic_jet(F, z, Edge::clamp);
    cplx r = W - jet.value;
    for (int it = 0; it <= max_iters; ++it) {
      if (std::abs(r) < tol)
        return z;
      if (it == max_iters)
        break;
      const double det = jet.dx.real() * jet.dy.imag() - jet.dy.real() * jet.dx.imag();
      if (!(det > 0.0))
        return std::nullopt;
      const double ddx = (jet.dy.imag() * r.real() - jet.dy.real() * r.imag()) / det;
      const double ddy = (jet.dx.real() * r.imag() - jet.dx.imag() * r.real()) / det;
      const cplx dz(ddx, ddy);
      double t = 1.0;
      for (int k = 0;; ++k) {
        const cplx zn = z + t * dz;
        if (admissible(zn)) {
          const auto jn = interp_cubic_jet(F, zn, Edge::clamp);
          const cplx rn = W - jn.value;
          if (!damped || std::abs(rn) < std::abs(r) || k == 30) {
            z = zn;
            jet = jn;
            r = rn;
            break;
          }
        } else if (!damped || k == 30) {
          return std::nullopt;
        }
        t *= 0.5;
      }
    }
    return std::nullopt;
  }
};

void check_orientation(const ComplexGrid& F, const ComplexGrid& Fz)
{
  for (std::size_t i = 0; i < Fz.size(); ++i) {
    const cplx v = Fz[i];
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()) || v == cplx(0.0))
      throw OrientationLoss("f_z vanished or became non-finite");
    if (!std::isfinite(F[i].real()) || !std::isfinite(F[i].imag()))
      throw OrientationLoss("map became non-finite");
  }
  const int n = F.n();
  for (int r = 0; r + 1 < n; ++r)
    for (int c = 0; c + 1 < n; ++c) {
      const cplx d1 = F(r + 1, c + 1) - F(r, c);
      const cplx d2 = F(r + 1, c) - F(r, c + 1);
      if (!((std::conj(d1) * d2).imag() > 0.0))
        throw OrientationLoss("grid cell folded at row " + std::to_string(r) +
                              ", column " + std::to_string(c));
    }
}

// Assemble a state from (theta, F, Fz) and invert F on the target grid.
DeformationState make_state(const ParamVector& theta,
                            const BasisSpec& basis,
                            const GridSpec& grid,
                            const DeformationOptions& opts,
                            ComplexGrid F,
                            ComplexGrid Fz,
                            int step_count,
                            const DeformationState* prev)
{
  theta.validate(basis);
  check_orientation(F, Fz);
  DeformationState s;
  s.theta = theta;
  s.basis = basis;
  s.grid = grid;
  s.opts = opts;
  s.phi = eval_phi(theta, basis, grid);
  s.mu = phi_to_mu(s.phi);
  s.F = std::move(F);
  s.Fz = std::move(Fz);
  s.step_count = step_count;

  const int n = grid.n;
  const double h = grid.spacing();
  const double L = basis.L;
  s.kfac = ComplexGrid(grid);
  for (std::size_t i = 0; i < s.kfac.size(); ++i)
    s.kfac[i] = s.Fz[i] / (std::conj(s.Fz[i]) * (1.0 - std::norm(s.mu[i])));

  // image box of the bump disk
  double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
  double reach = 0.0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const cplx z = grid.node(r, c);
      if (std::abs(z) > L + 3.0 * h)
        continue;
      const cplx w = s.F(r, c);
      xlo = std::min(xlo, w.real());
      xhi = std::max(xhi, w.real());
      ylo = std::min(ylo, w.imag());
      yhi = std::max(yhi, w.imag());
      reach = std::max(reach, std::abs(w));
    }
  xlo -= 2.0 * h;
  ylo -= 2.0 * h;
  xhi += 2.0 * h;
  yhi += 2.0 * h;

  // Recentre and shrink the solve grid once the image outgrows it.
  const double fit = frame_fill * grid.half_width;
  if (opts.solve.mode == SolveMode::whole_plane && reach > fit) {
    s.frame_origin = cplx(0.5 * (xlo + xhi), 0.5 * (ylo + yhi));
    double ext = 0.0;
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        if (std::abs(grid.node(r, c)) <= L + 3.0 * h)
          ext = std::max(ext, std::abs(s.F(r, c) - s.frame_origin));
    s.frame_scale = std::max(1.0, ext / fit);
  }
  const double fscale = s.frame_scale;
  const cplx forigin = s.frame_origin;

  const Newton newton{ s.F,
                       opts.newton_tol * L,
                       opts.newton_iters,
                       -grid.half_width,
                       grid.half_width - h };
  s.preimage.assign(grid.size(), cplx(nan_value, nan_value));
  const bool use_seeds = prev && prev->preimage.size() == grid.size();
  const bool same_frame = use_seeds && prev->frame_scale == fscale &&
                          prev->frame_origin == forigin;
  auto seed_for = [&](std::size_t idx, cplx W) {
    if (!use_seeds)
      return W;
    if (same_frame) {
      const cplx z = prev->preimage[idx];
      return std::isfinite(z.real()) ? z : W;
    }
    const cplx S = (W - prev->frame_origin) / prev->frame_scale;
    const long c = std::lround((S.real() + grid.half_width) / h);
    const long r = std::lround((S.imag() + grid.half_width) / h);
    if (r < 0 || c < 0 || r >= n || c >= n)
      return W;
    const cplx z = prev->preimage[static_cast<std::size_t>(r * n + c)];
    return std::isfinite(z.real()) ? z : W;
  };
  double support = 0.0;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const cplx S = grid.node(r, c);
      const cplx W = forigin + fscale * S;
      if (W.real() < xlo || W.real() > xhi || W.imag() < ylo || W.imag() > yhi)
        continue;
      const std::size_t idx = static_cast<std::size_t>(r) * n + c;
      auto z = newton.solve(W, seed_for(idx, W));
      if (!z) {
        // restart from the node whose image is closest
        double best = 1e300;
        cplx start = W;
        for (std::size_t k = 0; k < grid.size(); ++k) {
          const double d = std::norm(s.F[k] - W);
          if (d < best) {
            best = d;
            start = grid.node(static_cast<int>(k) / n, static_cast<int>(k) % n);
          }
        }
        z = newton.solve(W, start);
        if (!z)
          z = newton.solve_damped(W, start);
        // corners of the image box can have preimages off the grid; only
        // nodes inside the image of the disk matter
        if (!z && std::abs(start) > L + 3.0 * h)
          continue;
      }
      if (!z)
        throw InverseMapFailure("Newton inversion of f failed at target node (" +
                                std::to_string(r) + ", " + std::to_string(c) +
                                ")");
      s.preimage[idx] = *z;
      if (std::abs(*z) < L) {
        s.support.push_back(static_cast<int>(idx));
        s.support_pre.push_back(*z);
        s.support_stencil.push_back(cubic_stencil(grid, *z, Edge::clamp));
        support = std::max(support, std::abs(S));
      }
    }
  }
  s.support_radius = support + h;
  return s;
}

struct Velocity
{
  ComplexGrid dF;  // U(F)
  ComplexGrid rel; // dU(F) + nu conj(mu)/(1 - |mu|^2)
  bool zero = true;
};

Velocity velocity(const DeformationState& s, const std::vector<double>& dc)
{
  Velocity v;
  v.dF = ComplexGrid(s.grid);
  v.rel = ComplexGrid(s.grid);
  if (std::all_of(dc.begin(), dc.end(), [](double x) { return x == 0.0; }))
    return v;
  v.zero = false;
  ParamVector dir;
  dir.coeffs = dc;
  const auto dphi = eval_phi(dir, s.basis, s.grid);
  const auto nu = perturb_nu(s.phi, dphi);
  const auto g = l_operator(nu, s);
  const VectorField vf(1.0, 0.0, 0.0, 0.0, CauchySolution(g, s.solve_options()));
  for (std::size_t i = 0; i < s.F.size(); ++i) {
    const auto [U, dU] = vf.normalized(s.F[i]);
    v.dF[i] = U;
    const double m2 = std::norm(s.mu[i]);
    v.rel[i] = dU + nu[i] * std::conj(s.mu[i]) / (1.0 - m2);
  }
  return v;
}

DeformationState advance(const DeformationState& s,
                         const ParamVector& dtheta,
                         double eps,
                         const ParamVector& target)
{
  const cplx a = s.theta.a;
  const cplx a_new = a + eps * dtheta.a;
  if (a_new == cplx(0.0))
    throw OrientationLoss("step drives the scale parameter to zero");
  const auto v = velocity(s, dtheta.coeffs);
  const cplx factor = a / a_new;
  const cplx lin = eps * dtheta.a / a;
  ComplexGrid F = s.F, Fz = s.Fz;
  for (std::size_t i = 0; i < F.size(); ++i) {
    F[i] += eps * factor * v.dF[i];
    Fz[i] *= factor * (1.0 + lin + eps * v.rel[i]);
  }
  return make_state(target, s.basis, s.grid, s.opts, std::move(F),
                    std::move(Fz), s.step_count + 1, &s);
}

ParamVector path_point(const ParamVector& theta, double t)
{
  ParamVector p = theta;
  for (auto& c : p.coeffs)
    c *= t;
  return p;
}

} // namespace

DeformationState init_affine(const ParamVector& theta,
                             const BasisSpec& basis,
                             const GridSpec& grid,
                             const DeformationOptions& opts)
{
  basis.validate();
  grid.validate();
  theta.validate(basis);
  if (!theta.coeffs_zero())
    throw NonzeroCoefficients("init_affine needs all basis coefficients zero");
  auto F = ComplexGrid::sample(grid, [](cplx z) { return z; });
  ComplexGrid Fz(grid, cplx(1.0));
  return make_state(theta, basis, grid, opts, std::move(F), std::move(Fz), 0,
                    nullptr);
}

DeformationState step(const DeformationState& state,
                      const ParamVector& dtheta,
                      double eps)
{
  if (dtheta.coeffs.size() != state.theta.coeffs.size())
    throw DimensionMismatch("direction does not match the basis");
  return advance(state, dtheta, eps, state.theta + eps * dtheta);
}

DeformationState rebuild(const ParamVector& theta,
                         const BasisSpec& basis,
                         const GridSpec& grid,
                         const DeformationOptions& opts)
{
  if (opts.rebuild_steps < 1)
    throw InvalidArgument("rebuild needs at least one path step");
  theta.validate(basis);
  auto state = init_affine(path_point(theta, 0.0), basis, grid, opts);
  if (theta.coeffs_zero())
    return state;
  const int M = opts.rebuild_steps;
  const double eps = 1.0 / M;
  ParamVector dir = theta;
  dir.a = 0.0;
  dir.b = 0.0;

  for (int m = 0; m < M; ++m) {
    const ParamVector next = m + 1 == M ? theta : path_point(theta, (m + 1.0) / M);
    if (opts.integrator == Integrator::euler) {
      state = advance(state, dir, eps, next);
      continue;
    }
    // classical Runge-Kutta on (F, F_z)
    const ParamVector mid = path_point(theta, (m + 0.5) / M);
    const auto& s0 = state;
    const auto k1 = velocity(s0, dir.coeffs);
    auto stage = [&](const DeformationState& base_seed,
                     const Velocity& k,
                     const ComplexGrid& Fz_stage,
                     double h,
                     const ParamVector& th) {
      ComplexGrid F = s0.F, Fz = s0.Fz;
      for (std::size_t i = 0; i < F.size(); ++i) {
        F[i] += h * k.dF[i];
        Fz[i] += h * Fz_stage[i] * k.rel[i];
      }
      return make_state(th, basis, grid, opts, std::move(F), std::move(Fz),
                        s0.step_count, &base_seed);
    };
    const auto s1 = stage(s0, k1, s0.Fz, 0.5 * eps, mid);
    const auto k2 = velocity(s1, dir.coeffs);
    const auto s2 = stage(s1, k2, s1.Fz, 0.5 * eps, mid);
    const auto k3 = velocity(s2, dir.coeffs);
    const auto s3 = stage(s2, k3, s2.Fz, eps, next);
    const auto k4 = velocity(s3, dir.coeffs);
    ComplexGrid F = s0.F, Fz = s0.Fz;
    for (std::size_t i = 0; i < F.size(); ++i) {
      F[i] += eps / 6.0 *
              (k1.dF[i] + 2.0 * k2.dF[i] + 2.0 * k3.dF[i] + k4.dF[i]);
      Fz[i] += eps / 6.0 *
               (s0.Fz[i] * k1.rel[i] + 2.0 * s1.Fz[i] * k2.rel[i] +
                2.0 * s2.Fz[i] * k3.rel[i] + s3.Fz[i] * k4.rel[i]);
    }
    state = make_state(next, basis, grid, opts, std::move(F), std::move(Fz),
                       s0.step_count + 1, &s3);
  }
  state.step_count = 0;
  const double res = beltrami_residual(state);
  if (!(res <= opts.beltrami_tol))
    throw RebuildDiverged("Beltrami residual " + format_double(res) +
                          " exceeds tolerance " +
                          format_double(opts.beltrami_tol));
  return state;
}

double beltrami_residual(const DeformationState& state)
{
  const auto& F = state.F;
  const int n = F.n();
  const double h = state.grid.spacing();
  double num = 0.0, den = 0.0;
  for (int r = 2; r < n - 2; ++r)
    for (int c = 2; c < n - 2; ++c) {
      const cplx fx = (-F(r, c + 2) + 8.0 * F(r, c + 1) - 8.0 * F(r, c - 1) +
                       F(r, c - 2)) /
                      (12.0 * h);
      const cplx fy = (-F(r + 2, c) + 8.0 * F(r + 1, c) - 8.0 * F(r - 1, c) +
                       F(r - 2, c)) /
                      (12.0 * h);
      const cplx d = 0.5 * (fx - cplx(0.0, 1.0) * fy);
      const cplx db = 0.5 * (fx + cplx(0.0, 1.0) * fy);
      num += std::norm(db - state.mu(r, c) * d);
      den += std::norm(d);
    }
  return std::sqrt(num / den);
}

Evaluation evaluate(const DeformationState& state, std::span<const cplx> X)
{
  Evaluation ev;
  ev.Y.reserve(X.size());
  ev.logJ.reserve(X.size());
  const double la = std::log(std::norm(state.theta.a));
  for (const auto& x : X) {
    if (!inside(state.grid, x, 2.0))
      throw PointOutsideGrid("evaluation point outside the deformation grid");
    const auto s = cubic_stencil(state.grid, x, Edge::clamp);
    const cplx F = interp_cubic(state.F, s, Edge::clamp);
    const cplx Fz = interp_cubic(state.Fz, s, Edge::clamp);
    const cplx mu = interp_cubic(state.mu, s, Edge::clamp);
    const double jac = std::norm(Fz) * (1.0 - std::norm(mu));
    if (!(jac > 0.0) || !std::isfinite(jac))
      throw NonpositiveJacobian("Jacobian is not positive at an evaluation point");
    ev.Y.push_back(state.theta.a * F + state.theta.b);
    ev.logJ.push_back(la + std::log(jac));
  }
  return ev;
}

VectorField vector_field(const DeformationState& state,
                         const ParamVector& dtheta)
{
  if (dtheta.coeffs.size() != state.theta.coeffs.size())
    throw DimensionMismatch("direction does not match the basis");
  const auto dphi = eval_phi(dtheta, state.basis, state.grid);
  const auto nu = perturb_nu(state.phi, dphi);
  const auto g = l_operator(nu, state);
  return solve_u(g, state.theta.a, state.theta.b, dtheta.a, dtheta.b,
                 state.solve_options());
}

double min_image_separation(const DeformationState& state, double radius)
{
  std::vector<cplx> pts;
  const int n = state.grid.n;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      if (std::abs(state.grid.node(r, c)) <= radius)
        pts.push_back(state.theta.a * state.F(r, c) + state.theta.b);
  std::sort(pts.begin(), pts.end(),
            [](cplx x, cplx y) { return x.real() < y.real(); });
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1;
         j < pts.size() && pts[j].real() - pts[i].real() < best; ++j)
      best = std::min(best, std::abs(pts[j] - pts[i]));
  return best;
}

} // namespace qcde
