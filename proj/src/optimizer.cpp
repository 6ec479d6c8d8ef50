#include "qcde/optimizer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

namespace qcde {

std::vector<double> OptimizerConfig::default_lambda_grid()
{
  std::vector<double> g;
  for (int i = 0; i <= 18; ++i)
    g.push_back(std::pow(10.0, 1.5 - 0.25 * i));
  return g;
}

void OptimizerConfig::validate() const
{
  if (!(max_step_len > 0.0))
    throw ConfigError("optimizer.max_step_len must be positive");
  if (!(hessian_init_diag > 0.0))
    throw ConfigError("optimizer.hessian_init_diag must be positive");
  if (max_halvings < 1)
    throw ConfigError("optimizer.max_halvings must be >= 1");
  if (rebuild_every < 1)
    throw ConfigError("optimizer.rebuild_every must be >= 1");
  if (max_iters < 1)
    throw ConfigError("optimizer.max_iters must be >= 1");
  if (!(grad_tol > 0.0))
    throw ConfigError("optimizer.grad_tol must be positive");
  if (lambda_grid.empty())
    throw ConfigError("optimizer.lambda_grid must not be empty");
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    if (!(lambda_grid[i] > 0.0))
      throw ConfigError("optimizer.lambda_grid values must be positive");
    if (i > 0 && !(lambda_grid[i] < lambda_grid[i - 1]))
      throw ConfigError("optimizer.lambda_grid must be strictly descending");
  }
}

std::string to_string(TraceEvent e)
{
  switch (e) {
    case TraceEvent::start:
      return "start";
    case TraceEvent::accepted:
      return "accepted";
    case TraceEvent::failed:
      return "failed";
    case TraceEvent::terminated:
      return "terminated";
  }
  return "?";
}

std::string to_string(Termination t)
{
  switch (t) {
    case Termination::converged:
      return "converged";
    case Termination::max_iters:
      return "max_iters";
    case Termination::descent_failed:
      return "descent_failed";
    case Termination::rebuild_diverged:
      return "rebuild_diverged";
  }
  return "?";
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace)
{
  out << "iter,objective,grad_norm,step_len,halvings,rebuilt,event\n";
  for (const auto& r : trace)
    out << r.iter << ',' << format_double(r.objective) << ','
        << format_double(r.grad_norm) << ',' << format_double(r.step_len)
        << ',' << r.halvings << ',' << (r.rebuilt ? "true" : "false") << ','
        << to_string(r.event) << '\n';
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace)
{
  std::ofstream out(path);
  if (!out)
    throw FormatError("cannot open " + path + " for writing");
  write_trace_csv(out, trace);
}

TrustRegionModel::TrustRegionModel(const Eigen::MatrixXd& B, const Eigen::VectorXd& g)
  : eig_(B)
  , lam_(eig_.eigenvalues())
  , gt_(eig_.eigenvectors().transpose() * g)
  , gnorm_(g.norm())
{}

Eigen::VectorXd TrustRegionModel::step(double radius) const
{
  auto norm_at = [&](double tau) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < gt_.size(); ++i) {
      const double v = gt_[i] / (lam_[i] + tau);
      s += v * v;
    }
    return std::sqrt(s);
  };
  auto step_at = [&](double tau) {
    Eigen::VectorXd c(gt_.size());
    for (Eigen::Index i = 0; i < gt_.size(); ++i)
      c[i] = -gt_[i] / (lam_[i] + tau);
    return Eigen::VectorXd(eig_.eigenvectors() * c);
  };
  const double lmin = lam_.minCoeff();
  double lo = std::max(0.0, -lmin) + 1e-12 * (1.0 + std::abs(lmin));
  if (lmin > 0.0) {
    lo = 0.0;
    if (norm_at(0.0) <= radius)
      return step_at(0.0);
  }
  double hi = std::max(lo, 0.0) + gnorm_ / radius + std::abs(lmin);
  while (norm_at(hi) > radius)
    hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double nrm = norm_at(mid);
    if (nrm > radius) {
      lo = mid;
    } else {
      hi = mid;
      if (nrm >= (1.0 - 1e-12) * radius)
        break;
    }
  }
  return step_at(hi);
}

Eigen::VectorXd trust_region_step(const Eigen::MatrixXd& B,
                                  const Eigen::VectorXd& g,
                                  double radius)
{
  return TrustRegionModel(B, g).step(radius);
}

BfgsResult bfgs_minimize(Problem& problem,
                         const Eigen::MatrixXd& hessian_init,
                         const OptimizerConfig& cfg)
{
  cfg.validate();
  BfgsResult res;
  res.hessian_init = hessian_init;
  Eigen::MatrixXd B = hessian_init;
  double f = problem.value();
  Eigen::VectorXd g = problem.gradient();
  res.trace.push_back(
    { 0, f, g.norm(), 0.0, 0, false, TraceEvent::start });

  bool failed_once = false;
  int iter = 0;
  res.reason = Termination::max_iters;
  try {
    while (iter < cfg.max_iters) {
      if (g.norm() < cfg.grad_tol * (1.0 + std::abs(f))) {
        res.reason = Termination::converged;
        break;
      }
      ++iter;
      double radius = cfg.max_step_len;
      Eigen::VectorXd p;
      std::optional<double> fnew;
      int halvings = 0;
      const TrustRegionModel model(B, g);
      for (;;) {
        p = model.step(radius);
        fnew = problem.trial(p);
        if (fnew && *fnew < f)
          break;
        fnew.reset();
        if (halvings == cfg.max_halvings)
          break;
        ++halvings;
        radius = 0.5 * p.norm();
      }

      if (!fnew) {
        if (failed_once) {
          res.trace.push_back({ iter, f, g.norm(), 0.0, halvings, false,
                                TraceEvent::terminated });
          res.reason = Termination::descent_failed;
          break;
        }
        failed_once = true;
        problem.rebuild();
        f = problem.value();
        g = problem.gradient();
        res.trace.push_back(
          { iter, f, g.norm(), 0.0, halvings, true, TraceEvent::failed });
        continue;
      }

      failed_once = false;
      problem.accept();
      ++res.accepted;
      bool rebuilt = false;
      if (res.accepted % cfg.rebuild_every == 0) {
        problem.rebuild();
        rebuilt = true;
      }
      const double f_new = problem.value();
      const Eigen::VectorXd g_new = problem.gradient();
      const Eigen::VectorXd s = p;
      const Eigen::VectorXd y = g_new - g;
      const double sy = s.dot(y);
      if (sy > 1e-12) {
        const Eigen::VectorXd Bs = B * s;
        B += y * y.transpose() / sy - Bs * Bs.transpose() / s.dot(Bs);
        B = 0.5 * (B + B.transpose());
      }
      f = f_new;
      g = g_new;
      res.trace.push_back({ iter, f, g.norm(), p.norm(), halvings, rebuilt,
                            TraceEvent::accepted });
    }
  } catch (const RebuildDiverged& e) {
    res.reason = Termination::rebuild_diverged;
    res.message = e.what();
  }
  res.x = problem.point();
  res.hessian = B;
  res.objective = problem.value();
  res.iterations = iter;
  return res;
}

// ---------------------------------------------------------------------------

DeformationProblem::DeformationProblem(std::vector<cplx> X,
                                       TargetDensity target,
                                       DeformationState state,
                                       double lambda)
  : X_(std::move(X))
  , target_(std::move(target))
  , state_(std::move(state))
  , lambda_(lambda)
{
  value_ = objective(state_);
}

double DeformationProblem::objective(const DeformationState& s) const
{
  return -loglike(s, X_, target_) + lambda_ * penalty(s.theta, s.basis);
}

void DeformationProblem::set_lambda(double lambda)
{
  lambda_ = lambda;
  value_ = objective(state_);
}

Eigen::VectorXd DeformationProblem::point() const
{
  const auto v = state_.theta.flat();
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}

Eigen::VectorXd DeformationProblem::gradient()
{
  const auto gl = grad_loglike(state_, X_, target_);
  const auto gp = penalty_grad(state_.theta, state_.basis);
  Eigen::VectorXd g(static_cast<Eigen::Index>(gl.size()));
  for (std::size_t i = 0; i < gl.size(); ++i)
    g[static_cast<Eigen::Index>(i)] = -gl[i] + lambda_ * gp[i];
  return g;
}

std::optional<double> DeformationProblem::trial(const Eigen::VectorXd& delta)
{
  candidate_.reset();
  const std::vector<double> d(delta.data(), delta.data() + delta.size());
  const auto dir = ParamVector::from_flat(d);
  try {
    auto next = step(state_, dir, 1.0);
    const double v = objective(next);
    if (!std::isfinite(v))
      return std::nullopt;
    candidate_ = std::move(next);
    candidate_delta_ = delta;
    candidate_value_ = v;
    return v;
  } catch (const OrientationLoss&) {
  } catch (const InverseMapFailure&) {
  } catch (const PointOutsideGrid&) {
  } catch (const NonpositiveJacobian&) {
  } catch (const InvalidArgument&) {
  }
  return std::nullopt;
}

void DeformationProblem::accept()
{
  if (!candidate_)
    throw InvalidArgument("accept() without a successful trial");
  if (on_accept)
    on_accept(state_, candidate_delta_);
  state_ = std::move(*candidate_);
  candidate_.reset();
  value_ = candidate_value_;
}

void DeformationProblem::rebuild()
{
  candidate_.reset();
  // check the tolerance here so that rejected rebuilds are recorded too
  auto opts = state_.opts;
  opts.beltrami_tol = std::numeric_limits<double>::infinity();
  auto fresh = qcde::rebuild(state_.theta, state_.basis, state_.grid, opts);
  const double res = beltrami_residual(fresh);
  residuals_.push_back(res);
  if (!(res <= state_.opts.beltrami_tol))
    throw RebuildDiverged("Beltrami residual " + format_double(res) +
                          " exceeds tolerance " +
                          format_double(state_.opts.beltrami_tol));
  fresh.opts = state_.opts;
  state_ = std::move(fresh);
  value_ = objective(state_);
}

// ---------------------------------------------------------------------------

ParamVector moment_matching_init(std::span<const cplx> X,
                                 const TargetDensity& target,
                                 const BasisSpec& basis)
{
  if (X.size() < 2)
    throw InvalidArgument("moment matching needs at least two points");
  cplx mx = 0.0;
  for (const auto& x : X)
    mx += x;
  mx /= static_cast<double>(X.size());
  double vx = 0.0;
  for (const auto& x : X)
    vx += std::norm(x - mx);
  vx /= 2.0 * static_cast<double>(X.size());

  // target moments by quadrature, refining the window to the target scale
  double half = 8.0;
  cplx mt = 0.0;
  double vt = 0.0;
  for (int pass = 0; pass < 4; ++pass) {
    const GridSpec win{ half, 512 };
    const double h = win.spacing();
    double mass = 0.0;
    cplx m1 = 0.0;
    double m2 = 0.0;
    for (int r = 0; r < win.n; ++r)
      for (int c = 0; c < win.n; ++c) {
        const cplx z = win.node(r, c) + mt;
        const double p = std::exp(target.logpdf(z));
        mass += p;
        m1 += p * z;
        m2 += p * std::norm(z);
      }
    mass *= h * h;
    m1 *= h * h;
    m2 *= h * h;
    mt = m1 / mass;
    vt = (m2 / mass - std::norm(mt)) / 2.0;
    const double next = 8.0 * std::sqrt(vt);
    if (std::abs(next - half) < 0.05 * half)
      break;
    half = next;
  }
  auto theta = ParamVector::zeros(basis);
  theta.a = std::sqrt(vt / vx);
  theta.b = mt - theta.a * mx;
  return theta;
}

DensityGrid fitted_density(const DeformationState& state,
                           const TargetDensity& target,
                           const GridSpec& window)
{
  std::vector<cplx> nodes;
  nodes.reserve(window.size());
  for (int r = 0; r < window.n; ++r)
    for (int c = 0; c < window.n; ++c)
      nodes.push_back(window.node(r, c));
  const auto ev = evaluate(state, nodes);
  DensityGrid out(window);
  for (std::size_t i = 0; i < nodes.size(); ++i)
    out[i] = std::exp(ev.logJ[i] + target.logpdf(ev.Y[i]));
  return out;
}

FitResult lambda_sweep(std::span<const cplx> X,
                       const TargetDensity& target,
                       const SweepSetup& setup,
                       const DensityGrid& truth,
                       const std::function<void(const LambdaRun&)>& progress)
{
  setup.optimizer.validate();
  const auto theta0 = moment_matching_init(X, target, setup.basis);
  auto state = qcde::rebuild(theta0, setup.basis, setup.grid, setup.deformation);
  const auto dim = static_cast<Eigen::Index>(theta0.size());
  FitResult result;
  result.hessian_init =
    setup.optimizer.hessian_init_diag * Eigen::MatrixXd::Identity(dim, dim);
  Eigen::MatrixXd B = result.hessian_init;
  DeformationProblem problem(std::vector<cplx>(X.begin(), X.end()), target,
                             std::move(state), setup.optimizer.lambda_grid[0]);
  problem.on_accept = setup.on_accept;

  double best = std::numeric_limits<double>::infinity();
  for (double lambda : setup.optimizer.lambda_grid) {
    LambdaRun run;
    run.lambda = lambda;
    const std::size_t res_before = problem.rebuild_residuals().size();
    try {
      problem.set_lambda(lambda);
      auto res = bfgs_minimize(problem, B, setup.optimizer);
      B = res.hessian;
      run.iterations = res.iterations;
      run.reason = res.reason;
      run.message = res.message;
      run.trace = std::move(res.trace);
      if (res.reason == Termination::rebuild_diverged)
        run.failed = true;
      else
        problem.rebuild();
      const auto& s = problem.state();
      run.theta = s.theta;
      run.objective = problem.value();
      run.penalty = penalty(s.theta, s.basis);
      const auto dens = fitted_density(s, target, truth.spec());
      run.metrics = metrics(dens, truth);
      run.mass = quad(dens);
    } catch (const Error& e) {
      run.failed = true;
      run.message = e.what();
      run.theta = problem.state().theta;
    }
    const auto& all = problem.rebuild_residuals();
    run.rebuild_residuals.assign(all.begin() + static_cast<long>(res_before),
                                 all.end());
    if (!run.failed && run.metrics.ise < best) {
      best = run.metrics.ise;
      result.selected = result.runs.size();
    }
    if (progress)
      progress(run);
    result.runs.push_back(std::move(run));
    if (result.runs.back().failed && result.runs.back().reason ==
                                        Termination::rebuild_diverged) {
      // the state is no longer trustworthy; restart the next lambda from
      // the affine fit
      problem = DeformationProblem(
        std::vector<cplx>(X.begin(), X.end()), target,
        init_affine(moment_matching_init(X, target, setup.basis), setup.basis,
                    setup.grid, setup.deformation),
        lambda);
      problem.on_accept = setup.on_accept;
    }
  }
  return result;
}

} // namespace qcde
