#include "qcde/beltrami.hpp"

#include "qcde/deformation.hpp"
#include "qcde/fft.hpp"

#include <map>
#include <memory>
#include <mutex>

namespace qcde {

std::vector<double> square_lattice_eisenstein(int K)
{
  if (K < 1)
    return {};
  // Laurent coefficients of the Weierstrass p-function of the square
  // lattice: c_k = (2k-1) G_{2k}, with g3 = 0 so that c_3 = 0.
  const double g4 =
    std::pow(std::tgamma(0.25), 8) / (960.0 * M_PI * M_PI);
  const int kmax = 2 * K;
  std::vector<double> c(static_cast<std::size_t>(kmax + 1), 0.0);
  c[2] = 3.0 * g4;
  for (int k = 4; k <= kmax; ++k) {
    double s = 0.0;
    for (int m = 2; m <= k - 2; ++m)
      s += c[m] * c[k - m];
    c[k] = 3.0 * s / ((2.0 * k + 1.0) * (k - 3.0));
  }
  std::vector<double> out;
  for (int k = 1; k <= K; ++k)
    out.push_back(c[2 * k] / (4.0 * k - 1.0));
  return out;
}

namespace {

struct Multipliers
{
  std::vector<cplx> d1; // symbol of d o (Laplace/4)^{-1}
  std::vector<cplx> d2; // symbol of d d o (Laplace/4)^{-1}
};

const Multipliers& multipliers(const GridSpec& spec)
{
  static std::mutex mtx;
  static std::map<std::pair<int, double>, std::unique_ptr<Multipliers>> cache;
  std::lock_guard lock(mtx);
  auto& slot = cache[{ spec.n, spec.half_width }];
  if (!slot) {
    slot = std::make_unique<Multipliers>();
    const int n = spec.n;
    slot->d1.resize(spec.size());
    slot->d2.resize(spec.size());
    for (int r = 0; r < n; ++r) {
      const double ky = wavenumber(spec, r);
      const double kyd = r == n / 2 ? 0.0 : ky;
      for (int c = 0; c < n; ++c) {
        const double kx = wavenumber(spec, c);
        const double kxd = c == n / 2 ? 0.0 : kx;
        const double k2 = kx * kx + ky * ky;
        const std::size_t i = static_cast<std::size_t>(r) * n + c;
        if (k2 == 0.0) {
          slot->d1[i] = slot->d2[i] = 0.0;
          continue;
        }
        const cplx d = 0.5 * cplx(kyd, kxd);
        slot->d1[i] = -4.0 * d / k2;
        slot->d2[i] = -4.0 * d * d / k2;
      }
    }
  }
  return *slot;
}

struct Geometry
{
  double P;
  double h;
  double support;
  double rho;
};

Geometry geometry(const GridSpec& spec, double support)
{
  Geometry g;
  g.P = spec.period();
  g.h = spec.spacing();
  g.support = support;
  const double want = std::max({ 1.35 * support, support + 4.0 * g.h, 1.5 });
  g.rho = std::min(want, 0.48 * g.P);
  return g;
}

const std::vector<double>& binomial_row(int m)
{
  static std::mutex mtx;
  static std::map<int, std::vector<double>> rows;
  std::lock_guard lock(mtx);
  auto& row = rows[m];
  if (row.empty()) {
    row.assign(static_cast<std::size_t>(m + 1), 1.0);
    for (int j = 1; j < m; ++j)
      row[j] = row[j - 1] * (m - j + 1) / j;
  }
  return row;
}

const std::vector<double>& eisenstein_cached(int K)
{
  static std::mutex mtx;
  static std::map<int, std::vector<double>> cache;
  std::lock_guard lock(mtx);
  auto& v = cache[K];
  if (v.empty())
    v = square_lattice_eisenstein(K);
  return v;
}

} // namespace

CauchySolution::CauchySolution(const ComplexGrid& g, const SolveOptions& opts)
  : mode_(opts.mode)
{
  if (!(opts.frame_scale > 0.0) || !std::isfinite(opts.frame_origin.real()) ||
      !std::isfinite(opts.frame_origin.imag()))
    throw InvalidArgument("solve frame needs a positive scale and finite origin");
  if (mode_ == SolveMode::whole_plane) {
    scale_ = opts.frame_scale;
    origin_ = opts.frame_origin;
  }
  if (!g.all_finite())
    throw NonFiniteGrid("dbar solve: input grid holds NaN or Inf");
  const auto& spec = g.spec();
  const int n = spec.n;
  const double h = spec.spacing();
  P_ = spec.period();
  zero_ = std::all_of(g.values().begin(), g.values().end(),
                      [](cplx v) { return v == cplx(0.0); });

  const auto& mult = multipliers(spec);
  std::vector<cplx> hat(g.values().begin(), g.values().end());
  fft::forward(hat, n);
  std::vector<cplx> v(hat.size()), dv(hat.size());
  const double norm = 1.0 / static_cast<double>(spec.size());
  for (std::size_t i = 0; i < hat.size(); ++i) {
    v[i] = mult.d1[i] * hat[i] * norm;
    dv[i] = mult.d2[i] * hat[i] * norm;
  }
  gbar_ = hat[0] * norm;
  fft::backward(v, n);
  fft::backward(dv, n);
  V_ = ComplexGrid(spec, std::move(v));
  dV_ = ComplexGrid(spec, std::move(dv));
  if (mode_ == SolveMode::periodic || zero_)
    return;

  double support = opts.support_radius;
  if (support <= 0.0) {
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        if (g(r, c) != cplx(0.0))
          support = std::max(support, std::abs(spec.node(r, c)));
    support += h;
  }
  const auto geo = geometry(spec, support);
  support_ = support;
  rho_ = geo.rho;

  const int K = opts.lattice_terms;
  const int degree = 4 * K;
  const int M = opts.far_moments;
  std::vector<cplx> mom(static_cast<std::size_t>(degree), 0.0);
  far_.assign(static_cast<std::size_t>(M), 0.0);
  cplx gsum = 0.0, gconj = 0.0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const cplx gv = g(r, c);
      if (gv == cplx(0.0))
        continue;
      const cplx z = spec.node(r, c);
      gsum += gv;
      gconj += gv * std::conj(z);
      const cplx s = z / P_;
      cplx pw = gv;
      for (int j = 0; j < degree; ++j) {
        mom[j] += pw;
        pw *= s;
      }
      const cplx t = z / rho_;
      pw = gv;
      for (int m = 0; m < M; ++m) {
        far_[m] += pw;
        pw *= t;
      }
    }
  const double area = h * h;
  for (auto& x : mom)
    x *= area;
  for (auto& x : far_)
    x *= area;
  gbar_ = gsum * area / (P_ * P_);
  c0_ = -gconj * area / (P_ * P_);

  // (1/pi) sum_k G_{4k} int g (W - z)^{4k-1} as a polynomial in w = W/P
  const auto& G = eisenstein_cached(K);
  poly_.assign(static_cast<std::size_t>(degree), 0.0);
  for (int k = 1; k <= K; ++k) {
    const int m = 4 * k - 1;
    const double coef = G[k - 1] / (M_PI * P_);
    const auto& binom = binomial_row(m);
    for (int j = 0; j <= m; ++j) {
      const double sign = j % 2 == 0 ? 1.0 : -1.0;
      poly_[m - j] += coef * binom[j] * sign * mom[j];
    }
  }

  // drop terms below rounding on |w| < rho / P
  const double wmax = rho_ / P_;
  double big = 0.0, pw = 1.0;
  std::vector<double> term(poly_.size());
  for (std::size_t j = 0; j < poly_.size(); ++j, pw *= wmax)
    big = std::max(big, term[j] = std::abs(poly_[j]) * pw);
  while (!poly_.empty() && term[poly_.size() - 1] <= 1e-18 * big)
    poly_.pop_back();
}

std::pair<cplx, cplx> CauchySolution::eval(cplx W) const
{
  if (zero_)
    return { 0.0, 0.0 };
  if (scale_ == 1.0 && origin_ == cplx(0.0))
    return eval_local(W);
  const auto [v, dv] = eval_local(to_local(W));
  return { scale_ * v, dv };
}

std::pair<cplx, cplx> CauchySolution::eval_local(cplx W) const
{
  if (mode_ == SolveMode::periodic) {
    const auto s = cubic_stencil(V_.spec(), W, Edge::periodic);
    return { interp_cubic(V_, s, Edge::periodic),
             interp_cubic(dV_, s, Edge::periodic) };
  }
  if (std::abs(W) < rho_) {
    const auto s = cubic_stencil(V_.spec(), W, Edge::periodic);
    const cplx w = W / P_;
    cplx p = 0.0, dp = 0.0;
    for (std::size_t j = poly_.size(); j-- > 0;) {
      dp = dp * w + p;
      p = p * w + poly_[j];
    }
    return { interp_cubic(V_, s, Edge::periodic) + gbar_ * std::conj(W) +
               c0_ + p,
             interp_cubic(dV_, s, Edge::periodic) + dp / P_ };
  }
  const cplx q = rho_ / W;
  // moments are bounded by the first few, so |q|^m < 1e-18 ends the series
  std::size_t len = far_.size();
  const double aq = std::abs(q);
  if (aq < 0.99)
    len = std::min(len, static_cast<std::size_t>(std::ceil(-41.5 / std::log(aq))) + 1);
  cplx p = 0.0, dp = 0.0;
  for (std::size_t m = len; m-- > 0;) {
    p = p * q + far_[m];
    dp = dp * q + static_cast<double>(m + 1) * far_[m];
  }
  return { p / (M_PI * W), -dp / (M_PI * W * W) };
}

// ---------------------------------------------------------------------------

VectorField::VectorField(cplx a, cplx b, cplx da, cplx db, CauchySolution V)
  : a_(a)
  , b_(b)
  , da_(da)
  , db_(db)
  , V_(std::move(V))
{
  if (a == cplx(0.0))
    throw DegeneratePinning("cannot pin the vector field for a = 0");
  V0_ = V_.eval(0.0).first;
  slope_ = V0_ - V_.eval(1.0).first;
}

std::pair<cplx, cplx> VectorField::normalized(cplx W) const
{
  if (V_.zero())
    return { 0.0, 0.0 };
  const auto [v, dv] = V_.eval(W);
  return { v - V0_ + slope_ * W, dv + slope_ };
}

cplx VectorField::u(cplx zeta) const
{
  const cplx W = (zeta - b_) / a_;
  return db_ + da_ * W + a_ * normalized(W).first;
}

cplx VectorField::du(cplx zeta) const
{
  const cplx W = (zeta - b_) / a_;
  return da_ / a_ + normalized(W).second;
}

ComplexGrid l_operator(const ComplexGrid& nu, const DeformationState& state)
{
  if (!(nu.spec() == state.grid))
    throw DimensionMismatch("nu must live on the deformation grid");
  ComplexGrid src(state.grid);
  for (std::size_t i = 0; i < src.size(); ++i)
    src[i] = nu[i] * state.kfac[i];
  ComplexGrid g(state.grid);
  for (std::size_t k = 0; k < state.support.size(); ++k)
    g[static_cast<std::size_t>(state.support[k])] =
      interp_cubic(src, state.support_stencil[k], Edge::clamp);
  return g;
}

VectorField solve_u(const ComplexGrid& g,
                    cplx a,
                    cplx b,
                    cplx da,
                    cplx db,
                    const SolveOptions& opts)
{
  if (a == cplx(0.0))
    throw DegeneratePinning("cannot pin the vector field for a = 0");
  return VectorField(a, b, da, db, CauchySolution(g, opts));
}

std::vector<double> divergence_at(const VectorField& vf,
                                  std::span<const cplx> pts)
{
  std::vector<double> out;
  out.reserve(pts.size());
  for (const auto& p : pts)
    out.push_back(2.0 * vf.du(p).real());
  return out;
}

double dbar_residual(const VectorField& vf, const ComplexGrid& g)
{
  const auto& V = vf.potential();
  if (V.zero())
    return 0.0;
  const auto d = wirtinger(V.periodic_part());
  cplx mean = 0.0;
  for (auto v : g.values())
    mean += v;
  mean /= static_cast<double>(g.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    num += std::norm(d.dzbar[i] + mean - g[i]);
    den += std::norm(g[i]);
  }
  return den == 0.0 ? 0.0 : std::sqrt(num / den);
}

// ---------------------------------------------------------------------------

std::vector<cplx> adjoint_weights(const GridSpec& spec,
                                  std::span<const int> nodes,
                                  const PointFunctional& fn,
                                  const SolveOptions& opts)
{
  if (fn.alpha.size() != fn.points.size() || fn.beta.size() != fn.points.size())
    throw DimensionMismatch("point functional arrays differ in length");
  const int n = spec.n;
  const bool whole = opts.mode == SolveMode::whole_plane;
  double support = opts.support_radius;
  if (whole && support <= 0.0) {
    for (int i : nodes)
      support = std::max(support, std::abs(spec.node(i / n, i % n)));
    support += spec.spacing();
  }
  const auto geo = geometry(spec, support);
  const double P = geo.P;
  const int K = opts.lattice_terms;
  const int degree = 4 * K;
  const int M = opts.far_moments;
  const auto& G = eisenstein_cached(K);

  ComplexGrid e1(spec), e2(spec);
  cplx cbar = 0.0, csum = 0.0;
  std::vector<cplx> lam(static_cast<std::size_t>(degree), 0.0);
  std::vector<cplx> kap(static_cast<std::size_t>(M), 0.0);
  std::vector<cplx> wp(static_cast<std::size_t>(degree + 1));
  const double fs = whole ? opts.frame_scale : 1.0;
  const cplx fo = whole ? opts.frame_origin : cplx(0.0);
  for (std::size_t p = 0; p < fn.points.size(); ++p) {
    const cplx W = (fn.points[p] - fo) / fs;
    const cplx al = fn.alpha[p] * fs;
    const cplx be = fn.beta[p];
    if (!whole || std::abs(W) < geo.rho) {
      const auto s = cubic_stencil(spec, W, Edge::periodic);
      scatter_cubic(e1, s, Edge::periodic, al);
      scatter_cubic(e2, s, Edge::periodic, be);
      if (!whole)
        continue;
      cbar += al * std::conj(W);
      csum += al;
      const cplx w = W / P;
      wp[0] = 1.0;
      for (int j = 1; j <= degree; ++j)
        wp[j] = wp[j - 1] * w;
      for (int k = 1; k <= K; ++k) {
        const int m = 4 * k - 1;
        const double coef = G[k - 1] / (M_PI * P);
        const auto& binom = binomial_row(m);
        for (int j = 0; j <= m; ++j) {
          const double c = (j % 2 == 0 ? coef : -coef) * binom[j];
          const int e = m - j;
          cplx term = al * wp[e];
          if (e > 0)
            term += be * (static_cast<double>(e) / P) * wp[e - 1];
          lam[j] += c * term;
        }
      }
    } else {
      const cplx q = geo.rho / W;
      cplx qm = 1.0;
      for (int m = 0; m < M; ++m) {
        kap[m] += qm * (al / (M_PI * W) -
                        be * static_cast<double>(m + 1) / (M_PI * W * W));
        qm *= q;
      }
    }
  }

  const auto& mult = multipliers(spec);
  auto b1 = e1.storage();
  auto b2 = e2.storage();
  fft::backward(b1, n);
  fft::backward(b2, n);
  std::vector<cplx> x(spec.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = mult.d1[i] * b1[i] + mult.d2[i] * b2[i];
  fft::forward(x, n);
  const double norm = 1.0 / static_cast<double>(spec.size());

  const double area = geo.h * geo.h;
  std::vector<cplx> r;
  r.reserve(nodes.size());
  for (int i : nodes) {
    cplx v = x[static_cast<std::size_t>(i)] * norm;
    if (whole) {
      const cplx z = spec.node(i / n, i % n);
      v += area / (P * P) * (cbar - csum * std::conj(z));
      const cplx s = z / P;
      cplx acc = 0.0;
      for (int j = degree; j-- > 0;)
        acc = acc * s + lam[j];
      const cplx t = z / geo.rho;
      cplx acc2 = 0.0;
      for (int m = M; m-- > 0;)
        acc2 = acc2 * t + kap[m];
      v += area * (acc + acc2);
    }
    r.push_back(v);
  }
  return r;
}

} // namespace qcde
