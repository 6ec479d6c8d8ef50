#include "qcde/likelihood.hpp"

#include <Eigen/Dense>

namespace qcde {

TargetDensity gaussian_target(double sigma)
{
  if (!(sigma > 0.0))
    throw InvalidArgument("Gaussian target needs sigma > 0");
  const double s2 = sigma * sigma;
  const double lognorm = -std::log(2.0 * M_PI * s2);
  TargetDensity t;
  t.name = "gaussian(" + format_double(sigma) + ")";
  t.logpdf = [=](cplx y) { return lognorm - std::norm(y) / (2.0 * s2); };
  t.grad = [=](cplx y) { return -y / s2; };
  return t;
}

TargetDensity halfg_target()
{
  constexpr double sp = 1.0 / 50.0;
  constexpr double sm = 0.5;
  constexpr double gamma = 1.0 / (1.0 + sm / sp);
  constexpr double s2 = 0.5; // sd of x2
  const double c = 0.5 * std::log(2.0 * M_PI);
  const double log_right = std::log(2.0 * gamma / sp) - c;
  const double log_left = std::log(2.0 * (1.0 - gamma) / sm) - c;
  const double log_y = -std::log(s2) - c;
  TargetDensity t;
  t.name = "halfg";
  t.logpdf = [=](cplx y) {
    const double x1 = y.real(), x2 = y.imag();
    const double h1 = x1 >= 0.0 ? log_right - 0.5 * x1 * x1 / (sp * sp)
                                : log_left - 0.5 * x1 * x1 / (sm * sm);
    return h1 + log_y - 0.5 * x2 * x2 / (s2 * s2);
  };
  t.grad = [=](cplx y) {
    const double x1 = y.real(), x2 = y.imag();
    const double g1 = x1 >= 0.0 ? -x1 / (sp * sp) : -x1 / (sm * sm);
    return cplx(g1, -x2 / (s2 * s2));
  };
  return t;
}

double loglike(const DeformationState& state,
               std::span<const cplx> X,
               const TargetDensity& target)
{
  const auto ev = evaluate(state, X);
  double sum = 0.0;
  for (std::size_t k = 0; k < X.size(); ++k)
    sum += ev.logJ[k] + target.logpdf(ev.Y[k]);
  return sum;
}

namespace {

struct DataTerms
{
  std::vector<cplx> W; // normalized images
  std::vector<cplx> q; // grad H at the images
  GradientVector affine;
};

DataTerms data_terms(const DeformationState& state,
                     std::span<const cplx> X,
                     const TargetDensity& target)
{
  const auto ev = evaluate(state, X);
  const cplx a = state.theta.a, b = state.theta.b;
  DataTerms d;
  d.affine.assign(4, 0.0);
  const cplx I(0.0, 1.0);
  for (std::size_t k = 0; k < X.size(); ++k) {
    const cplx y = ev.Y[k];
    const cplx q = target.grad(y);
    d.W.push_back((y - b) / a);
    d.q.push_back(q);
    const cplx cq = std::conj(q);
    d.affine[0] += 2.0 * (1.0 / a).real() + ((y - b) / a * cq).real();
    d.affine[1] += 2.0 * (I / a).real() + (I * (y - b) / a * cq).real();
    d.affine[2] += cq.real();
    d.affine[3] += (I * cq).real();
  }
  return d;
}

} // namespace

GradientVector grad_loglike(const DeformationState& state,
                            std::span<const cplx> X,
                            const TargetDensity& target)
{
  const auto d = data_terms(state, X, target);
  GradientVector out = d.affine;
  out.resize(4 + state.theta.coeffs.size(), 0.0);
  if (state.support.empty())
    return out;

  // sum_k div u(Y_k) + <u(Y_k), grad H> = Re Lambda(g) with Lambda linear in
  // the unpinned potential V of g
  const cplx a = state.theta.a;
  const double nd = static_cast<double>(X.size());
  PointFunctional fn;
  cplx sum_g = 0.0, sum_gw = 0.0;
  for (std::size_t k = 0; k < X.size(); ++k) {
    const cplx gk = a * std::conj(d.q[k]);
    fn.points.push_back(d.W[k]);
    fn.alpha.push_back(gk);
    fn.beta.push_back(2.0);
    sum_g += gk;
    sum_gw += gk * d.W[k];
  }
  fn.points.push_back(0.0);
  fn.alpha.push_back(2.0 * nd - sum_g + sum_gw);
  fn.beta.push_back(0.0);
  fn.points.push_back(1.0);
  fn.alpha.push_back(-2.0 * nd - sum_gw);
  fn.beta.push_back(0.0);

  const auto r = adjoint_weights(state.grid, state.support, fn,
                                 state.solve_options());
  ComplexGrid rho(state.grid);
  for (std::size_t k = 0; k < r.size(); ++k)
    scatter_cubic(rho, state.support_stencil[k], Edge::clamp, r[k]);

  const auto& grid = state.grid;
  const auto& basis = state.basis;
  const int n = grid.n;
  const int side = basis.side();
  Eigen::MatrixXcd P = Eigen::MatrixXcd::Zero(n, n);
  Eigen::MatrixXcd Q = Eigen::MatrixXcd::Zero(n, n);
  for (int row = 0; row < n; ++row)
    for (int col = 0; col < n; ++col) {
      const cplx rv = rho(row, col);
      if (rv == cplx(0.0))
        continue;
      const double T = bump(grid.coord(col), grid.coord(row), basis.L);
      if (T == 0.0)
        continue;
      const auto c = nu_coefficients(state.phi(row, col));
      const cplx w = rv * state.kfac(row, col) * T;
      P(row, col) = w * c.A;
      Q(row, col) = w * c.B;
    }
  Eigen::MatrixXcd E(n, side);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < side; ++k)
      E(i, k) = std::polar(1.0, M_PI * (k - basis.N) * grid.coord(i) / basis.L);
  // R(k2, k1) = sum_{row,col} P(row,col) E(col,k1) E(row,k2)
  const Eigen::MatrixXcd R1 = E.transpose() * P * E;
  const Eigen::MatrixXcd R2 = E.adjoint() * Q * E.conjugate();
  for (int m = 0; m < basis.modes(); ++m) {
    const int i1 = m / side, i2 = m % side;
    const cplx r1 = R1(i2, i1), r2 = R2(i2, i1);
    out[4 + 2 * m] = (r1 - r2).real();
    out[4 + 2 * m + 1] = -(r1 + r2).imag();
  }
  return out;
}

GradientVector grad_loglike_direct(const DeformationState& state,
                                   std::span<const cplx> X,
                                   const TargetDensity& target)
{
  const auto d = data_terms(state, X, target);
  GradientVector out = d.affine;
  const cplx a = state.theta.a;
  for (std::size_t j = 0; j < state.theta.coeffs.size(); ++j) {
    auto dir = ParamVector::zeros(state.basis);
    dir.a = 0.0;
    dir.coeffs[j] = 1.0;
    const auto vf = vector_field(state, dir);
    double e = 0.0;
    for (std::size_t k = 0; k < X.size(); ++k) {
      const auto [U, dU] = vf.normalized(d.W[k]);
      e += 2.0 * dU.real() + (a * U * std::conj(d.q[k])).real();
    }
    out.push_back(e);
  }
  return out;
}

double penalty(const ParamVector& theta, const BasisSpec& spec)
{
  double s = 0.0;
  for (int m = 0; m < spec.modes(); ++m) {
    const double k2 = spec.k1(m) * spec.k1(m) + spec.k2(m) * spec.k2(m);
    const double re = theta.coeffs[2 * m], im = theta.coeffs[2 * m + 1];
    s += k2 * k2 * (re * re + im * im);
  }
  return s;
}

GradientVector penalty_grad(const ParamVector& theta, const BasisSpec& spec)
{
  GradientVector g(4 + theta.coeffs.size(), 0.0);
  for (int m = 0; m < spec.modes(); ++m) {
    const double k2 = spec.k1(m) * spec.k1(m) + spec.k2(m) * spec.k2(m);
    g[4 + 2 * m] = 2.0 * k2 * k2 * theta.coeffs[2 * m];
    g[4 + 2 * m + 1] = 2.0 * k2 * k2 * theta.coeffs[2 * m + 1];
  }
  return g;
}

} // namespace qcde
