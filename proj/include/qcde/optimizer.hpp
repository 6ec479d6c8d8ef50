#pragma once

#include "qcde/data.hpp"
#include "qcde/likelihood.hpp"

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace qcde {

struct OptimizerConfig
{
  double max_step_len = 0.02;
  double hessian_init_diag = 1000.0;
  int max_halvings = 10;
  int rebuild_every = 10;
  int max_iters = 500;
  double grad_tol = 1e-6; //!< stop when |grad| < grad_tol (1 + |objective|)
  std::vector<double> lambda_grid = default_lambda_grid();

  static std::vector<double> default_lambda_grid();
  //! Throws ConfigError.
  void validate() const;
};

enum class TraceEvent
{
  start,     //!< initial point
  accepted,  //!< step accepted
  failed,    //!< all halvings failed; a rebuild follows
  terminated //!< second consecutive failure
};

std::string to_string(TraceEvent e);

struct TraceRow
{
  int iter = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  double step_len = 0.0;
  int halvings = 0;
  bool rebuilt = false;
  TraceEvent event = TraceEvent::accepted;
};

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);
void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace);

//! Smooth problem driven by the adapted BFGS loop. The point is held by the
//! problem; the optimizer proposes steps and accepts or rejects them.
class Problem
{
public:
  virtual ~Problem() = default;
  virtual Eigen::VectorXd point() const = 0;
  virtual double value() const = 0;
  virtual Eigen::VectorXd gradient() = 0;
  //! Evaluate the objective at point() + delta; nullopt if the step is
  //! infeasible. The candidate is kept until accept() or discarded.
  virtual std::optional<double> trial(const Eigen::VectorXd& delta) = 0;
  virtual void accept() = 0;
  //! Recompute the current point from scratch (no-op for exact problems).
  virtual void rebuild() {}
};

enum class Termination
{
  converged,
  max_iters,
  descent_failed,
  rebuild_diverged
};

std::string to_string(Termination t);

struct BfgsResult
{
  Eigen::VectorXd x;
  Eigen::MatrixXd hessian; //!< final Hessian estimate
  Eigen::MatrixXd hessian_init;
  double objective = 0.0;
  int iterations = 0;
  int accepted = 0;
  Termination reason = Termination::max_iters;
  std::string message;
  std::vector<TraceRow> trace;
};

//! Quadratic model g.p + p.B.p/2 with B eigendecomposed once, so the
//! constrained minimizer can be recomputed cheaply for shrinking radii.
class TrustRegionModel
{
public:
  TrustRegionModel(const Eigen::MatrixXd& B, const Eigen::VectorXd& g);
  //! Minimizer over |p| <= radius.
  Eigen::VectorXd step(double radius) const;

private:
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_;
  Eigen::VectorXd lam_;
  Eigen::VectorXd gt_;
  double gnorm_;
};

//! Minimizer of a quadratic model restricted to the ball of radius `radius`:
//! (B + tau I) p = -g with the smallest tau >= 0 giving |p| <= radius.
Eigen::VectorXd trust_region_step(const Eigen::MatrixXd& B,
                                  const Eigen::VectorXd& g,
                                  double radius);

BfgsResult bfgs_minimize(Problem& problem,
                         const Eigen::MatrixXd& hessian_init,
                         const OptimizerConfig& cfg);

// ---------------------------------------------------------------------------

//! -loglike + lambda J over deformation states.
class DeformationProblem : public Problem
{
public:
  DeformationProblem(std::vector<cplx> X,
                     TargetDensity target,
                     DeformationState state,
                     double lambda);

  Eigen::VectorXd point() const override;
  double value() const override { return value_; }
  Eigen::VectorXd gradient() override;
  std::optional<double> trial(const Eigen::VectorXd& delta) override;
  void accept() override;
  void rebuild() override;

  const DeformationState& state() const { return state_; }
  double lambda() const { return lambda_; }
  void set_lambda(double lambda);
  //! Beltrami residuals of every rebuild so far.
  const std::vector<double>& rebuild_residuals() const { return residuals_; }
  //! Accepted step directions with the state they started from are handed
  //! to this hook (used by diagnostics).
  std::function<void(const DeformationState&, const Eigen::VectorXd&)> on_accept;

private:
  double objective(const DeformationState& s) const;

  std::vector<cplx> X_;
  TargetDensity target_;
  DeformationState state_;
  std::optional<DeformationState> candidate_;
  Eigen::VectorXd candidate_delta_;
  double candidate_value_ = 0.0;
  double lambda_;
  double value_;
  std::vector<double> residuals_;
};

//! Affine map taking the data mean and scale to those of the target.
ParamVector moment_matching_init(std::span<const cplx> X,
                                 const TargetDensity& target,
                                 const BasisSpec& basis);

//! |J_f| exp(H o f) on the window.
DensityGrid fitted_density(const DeformationState& state,
                           const TargetDensity& target,
                           const GridSpec& window);

struct LambdaRun
{
  double lambda = 0.0;
  ParamVector theta;
  double objective = 0.0;
  double penalty = 0.0;
  int iterations = 0;
  Termination reason = Termination::max_iters;
  std::string message;
  Metrics metrics{};
  double mass = 0.0; //!< quad of the fitted density over the window
  std::vector<TraceRow> trace;
  std::vector<double> rebuild_residuals;
  bool failed = false;
};

struct FitResult
{
  std::vector<LambdaRun> runs;
  std::size_t selected = 0; //!< index of the ISE-minimizing run
  Eigen::MatrixXd hessian_init;
};

struct SweepSetup
{
  BasisSpec basis;
  GridSpec grid;
  DeformationOptions deformation;
  OptimizerConfig optimizer;
  //! Called with (state before, step) for every accepted step.
  std::function<void(const DeformationState&, const Eigen::VectorXd&)> on_accept;
};

FitResult lambda_sweep(std::span<const cplx> X,
                       const TargetDensity& target,
                       const SweepSetup& setup,
                       const DensityGrid& truth,
                       const std::function<void(const LambdaRun&)>& progress = {});

} // namespace qcde
