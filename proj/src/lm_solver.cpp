#include "rovo/lm_solver.hpp"

#include <cmath>
#include <stdexcept>

namespace rovo {

void LmSettings::validate() const {
  const bool ok = max_iterations > 0 && initial_damping > 0 && damping_up > 1.0 &&
                  damping_down > 0 && damping_down < 1.0 && gradient_tol > 0 &&
                  step_tol > 0 && cost_tol > 0 && baseline_weight > 0 && obs_cauchy_scale > 0;
  if (!ok) throw std::invalid_argument("LmSettings: all fields must be positive");
}

std::string to_string(LmTermination t) {
  switch (t) {
    case LmTermination::Gradient: return "gradient";
    case LmTermination::Step: return "step";
    case LmTermination::CostChange: return "cost_change";
    case LmTermination::MaxIterations: return "max_iterations";
    case LmTermination::Stalled: return "stalled";
  }
  return "unknown";
}

LmReport lm_solve(LmProblem& problem, const LmSettings& settings) {
  settings.validate();
  LmReport report;
  double cost = problem.current_cost();
  report.initial_cost = cost;
  report.final_cost = cost;
  double damping = settings.initial_damping;

  Eigen::MatrixXd H;
  Eigen::VectorXd b;
  for (int iter = 0; iter < settings.max_iterations; ++iter) {
    report.iterations = iter + 1;
    problem.linearize();
    if (problem.gradient_inf_norm() < settings.gradient_tol) {
      report.termination = LmTermination::Gradient;
      return report;
    }

    bool accepted = false;
    while (!accepted) {
      problem.reduced_system(damping, H, b);
      const Eigen::VectorXd dx = H.ldlt().solve(b);
      if (!dx.allFinite()) {
        damping *= settings.damping_up;
        if (damping > 1e32) {
          report.termination = LmTermination::Stalled;
          return report;
        }
        continue;
      }
      problem.save_state();
      problem.apply_step(dx, damping);
      const double new_cost = problem.current_cost();
      if (std::isfinite(new_cost) && new_cost < cost) {
        accepted = true;
        const double decrease = cost - new_cost;
        cost = new_cost;
        report.final_cost = cost;
        report.accepted_costs.push_back(cost);
        damping = std::max(1e-12, damping * settings.damping_down);
        if (dx.lpNorm<Eigen::Infinity>() < settings.step_tol) {
          report.termination = LmTermination::Step;
          return report;
        }
        if (decrease < settings.cost_tol * std::max(cost, 1e-300)) {
          report.termination = LmTermination::CostChange;
          return report;
        }
      } else {
        problem.restore_state();
        damping *= settings.damping_up;
        if (damping > 1e32) {
          report.termination = LmTermination::Stalled;
          return report;
        }
      }
    }
  }
  report.termination = LmTermination::MaxIterations;
  return report;
}

double DenseLmProblem::current_cost() const {
  Eigen::VectorXd r(residuals_.size());
  evaluate(x_, r, nullptr);
  return 0.5 * r.squaredNorm();
}

void DenseLmProblem::linearize() { evaluate(x_, residuals_, &jacobian_); }

void DenseLmProblem::reduced_system(double damping, Eigen::MatrixXd& H, Eigen::VectorXd& b) {
  H = jacobian_.transpose() * jacobian_;
  b = -jacobian_.transpose() * residuals_;
  for (int i = 0; i < H.rows(); ++i) {
    H(i, i) += damping * std::max(H(i, i), 1e-12);
  }
}

double DenseLmProblem::gradient_inf_norm() const {
  return (jacobian_.transpose() * residuals_).lpNorm<Eigen::Infinity>();
}

}  // namespace rovo
