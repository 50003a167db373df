#pragma once

#include "fairaudit/dataset.hpp"

#include <Eigen/Dense>

namespace fairaudit {

/// Linear moment constraint E_P[phi(Z)] = target over the atoms of an
/// empirical measure; phi_values holds phi evaluated at each atom (n x k).
struct MomentConstraint {
  Eigen::MatrixXd phi_values;
  Eigen::VectorXd target;
};

/// Solution of the dual tilt problem: weights take the Gibbs form
/// exp(<xi, phi_i> - logZ)/n, strictly positive and summing to 1.
struct TiltSolution {
  Eigen::VectorXd xi;
  double log_partition = 0.0;
  Eigen::VectorXd weights;
  double residual = 0.0;  // max-norm of the moment mismatch
  int iterations = 0;
  bool regularized = false;  // a singular Hessian needed a ridge
};

struct LogPartition {
  double value = 0.0;          // log of the empirical mean of exp(<phi,xi>)
  Eigen::VectorXd mean;        // tilted expectation of phi
  Eigen::MatrixXd covariance;  // tilted covariance of phi
};

/// Shifted-exponential evaluation of log Z together with its gradient and
/// Hessian in xi; cannot overflow.
LogPartition log_partition(const Eigen::MatrixXd& phi_values,
                           const Eigen::VectorXd& xi);

/// Minimizes the strictly convex dual H(xi) = logZ(xi) - <xi, target> by
/// damped Newton iterations (Armijo backtracking, beta = 0.5), stopping when
/// the moment residual max-norm falls below tol. Targets outside the convex
/// hull of the phi rows make xi diverge and raise an error.
TiltSolution solve_tilt(const MomentConstraint& constraint, double tol = 1e-9);

/// KL(Q_t, Q_n) of a reweighting in closed form: sum w_i log(n w_i).
double kl_reweighting(const Eigen::VectorXd& weights);

enum class SplitMode { balanced, proportional };

struct DeltaSplit {
  double delta0 = 0.0;  // added to lambda0
  double delta1 = 0.0;  // removed from lambda1
};

/// Splits a requested DI improvement into numerator/denominator mass shifts.
/// Balanced sets delta0 = delta1; proportional sets delta0/n0 = delta1/n1.
DeltaSplit delta_split(const GroupCounts& counts, double delta_di,
                       SplitMode mode);

/// KL-minimal reweighting reaching target_di: moment function
/// phi(s, yhat) = ((1-s) yhat, s yhat, s, 1-s) with targets
/// (lambda0+delta0, lambda1-delta1, n1, n0)/n. The last coordinate is
/// affinely dependent on the third and is dropped before the solve.
WeightedDistribution fairwash_entropic(const Dataset& data, double target_di,
                                       SplitMode mode);

}  // namespace fairaudit
