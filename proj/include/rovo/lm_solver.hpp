#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace rovo {

struct LmSettings {
  int max_iterations = 50;
  double initial_damping = 1e-4;
  double damping_up = 10.0;
  double damping_down = 0.25;
  double gradient_tol = 1e-12;     // on the infinity norm of the gradient
  double step_tol = 1e-12;         // on the infinity norm of the step
  double cost_tol = 1e-12;         // on the relative cost decrease
  double baseline_weight = 1e6;    // lambda_b of the inter-camera length penalty
  double obs_cauchy_scale = 0.035; // robust scale on bearing residual norms

  void validate() const;  // throws std::invalid_argument unless all positive
};

enum class LmTermination { Gradient, Step, CostChange, MaxIterations, Stalled };

struct LmReport {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  LmTermination termination = LmTermination::MaxIterations;
  // Cost after each accepted step; non-increasing by construction.
  std::vector<double> accepted_costs;
};

std::string to_string(LmTermination t);

// Problem interface at the normal-equation level so that structured solvers
// (e.g. with eliminated landmark blocks) plug into the same trust-region
// loop as small dense problems.
class LmProblem {
 public:
  virtual ~LmProblem() = default;

  virtual int reduced_dim() const = 0;
  // Total cost at the current state (robustified).
  virtual double current_cost() const = 0;
  // Evaluates residuals/Jacobians at the current state.
  virtual void linearize() = 0;
  // Damped, possibly reduced normal equations H dx = b at the latest
  // linearization point; b is the negative gradient of the reduced system.
  virtual void reduced_system(double damping, Eigen::MatrixXd& H, Eigen::VectorXd& b) = 0;
  // Applies the reduced step (plus any internal back-substitution).
  virtual void apply_step(const Eigen::VectorXd& dx, double damping) = 0;
  virtual void save_state() = 0;
  virtual void restore_state() = 0;
  // Infinity norm of the full (undamped) gradient at the linearization point.
  virtual double gradient_inf_norm() const = 0;
};

// Levenberg-Marquardt with multiplicative damping adjustment. Steps are
// accepted only when the true cost decreases, so accepted costs are
// monotonically non-increasing.
LmReport lm_solve(LmProblem& problem, const LmSettings& settings);

// Adapter for small dense problems defined by residual + Jacobian callbacks.
class DenseLmProblem : public LmProblem {
 public:
  DenseLmProblem(Eigen::VectorXd x0, int residual_dim)
      : x_(std::move(x0)), residuals_(residual_dim), jacobian_(residual_dim, x_.size()) {}

  virtual void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& r,
                        Eigen::MatrixXd* J) const = 0;

  const Eigen::VectorXd& state() const { return x_; }

  int reduced_dim() const override { return static_cast<int>(x_.size()); }
  double current_cost() const override;
  void linearize() override;
  void reduced_system(double damping, Eigen::MatrixXd& H, Eigen::VectorXd& b) override;
  void apply_step(const Eigen::VectorXd& dx, double /*damping*/) override { x_ += dx; }
  void save_state() override { saved_ = x_; }
  void restore_state() override { x_ = saved_; }
  double gradient_inf_norm() const override;

 private:
  Eigen::VectorXd x_, saved_;
  Eigen::VectorXd residuals_;
  Eigen::MatrixXd jacobian_;
};

}  // namespace rovo
