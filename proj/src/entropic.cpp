#include "fairaudit/entropic.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <stdexcept>
#include <string>

namespace fairaudit {

LogPartition log_partition(const Eigen::MatrixXd& phi_values,
                           const Eigen::VectorXd& xi) {
  const Eigen::Index n = phi_values.rows();
  const Eigen::Index k = phi_values.cols();
  if (n == 0) throw std::invalid_argument("empty support");
  if (xi.size() != k) throw std::invalid_argument("xi dimension mismatch");

  const Eigen::VectorXd a = phi_values * xi;
  const double shift = a.maxCoeff();
  const Eigen::VectorXd e = (a.array() - shift).exp();
  const double total = e.sum();

  LogPartition out;
  out.value = shift + std::log(total / static_cast<double>(n));
  const Eigen::VectorXd w = e / total;  // tilted probabilities
  out.mean = phi_values.transpose() * w;
  out.covariance =
      phi_values.transpose() * w.asDiagonal() * phi_values -
      out.mean * out.mean.transpose();
  return out;
}

TiltSolution solve_tilt(const MomentConstraint& constraint, double tol) {
  const Eigen::MatrixXd& phi = constraint.phi_values;
  const Eigen::VectorXd& t = constraint.target;
  const Eigen::Index n = phi.rows();
  const Eigen::Index k = phi.cols();
  if (t.size() != k) throw std::invalid_argument("target dimension mismatch");

  const double xi_bound = 1e4;
  const int max_iter = 500;

  Eigen::VectorXd xi = Eigen::VectorXd::Zero(k);
  LogPartition lp = log_partition(phi, xi);
  double h = lp.value - xi.dot(t);

  TiltSolution sol;
  for (int iter = 0; iter < max_iter; ++iter) {
    const Eigen::VectorXd grad = lp.mean - t;
    sol.residual = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
    if (sol.residual <= tol) {
      sol.iterations = iter;
      break;
    }
    if (iter == max_iter - 1) {
      throw std::runtime_error(
          "tilt solve did not converge: residual " + std::to_string(sol.residual));
    }

    // Newton direction; a singular tilted covariance gets a ridge and the
    // step stays a descent direction.
    Eigen::VectorXd step;
    double ridge = 0.0;
    for (;;) {
      Eigen::MatrixXd hess = lp.covariance;
      if (ridge > 0.0) hess.diagonal().array() += ridge;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
      step = ldlt.solve(-grad);
      if (ldlt.info() == Eigen::Success && step.allFinite() &&
          grad.dot(step) < 0.0) {
        break;
      }
      ridge = ridge == 0.0 ? 1e-10 : ridge * 100.0;
      sol.regularized = true;
      if (ridge > 1e6) {
        throw std::runtime_error("tilt solve: covariance irreparably singular");
      }
    }

    // Armijo backtracking on H. Near the optimum H flattens to machine
    // precision while the Newton step still contracts the gradient, so a
    // halved moment residual is accepted as progress too.
    double alpha = 1.0;
    const double slope = grad.dot(step);
    bool accepted = false;
    for (int ls = 0; ls < 60 && !accepted; ++ls) {
      const Eigen::VectorXd cand = xi + alpha * step;
      const LogPartition lp_cand = log_partition(phi, cand);
      const double h_cand = lp_cand.value - cand.dot(t);
      const double res_cand = (lp_cand.mean - t).cwiseAbs().maxCoeff();
      if (h_cand <= h + 1e-4 * alpha * slope || res_cand <= 0.5 * sol.residual) {
        xi = cand;
        lp = lp_cand;
        h = h_cand;
        accepted = true;
      } else {
        alpha *= 0.5;
      }
    }
    if (!accepted) {
      throw std::runtime_error("tilt solve: line search stalled");
    }

    if (xi.cwiseAbs().maxCoeff() > xi_bound) {
      throw std::runtime_error(
          "infeasible moment target: outside the convex hull of phi values");
    }
  }

  sol.xi = xi;
  sol.log_partition = lp.value;
  const Eigen::VectorXd a = phi * xi;
  sol.weights =
      ((a.array() - lp.value).exp() / static_cast<double>(n)).matrix();
  sol.weights /= sol.weights.sum();
  return sol;
}

double kl_reweighting(const Eigen::VectorXd& weights) {
  const double n = static_cast<double>(weights.size());
  double kl = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0.0) kl += weights[i] * std::log(n * weights[i]);
  }
  return std::max(0.0, kl);
}

DeltaSplit delta_split(const GroupCounts& c, double delta_di, SplitMode mode) {
  if (!(delta_di > 0.0)) {
    throw std::invalid_argument("DI improvement must be positive");
  }
  if (c.lambda1 <= 0.0) {
    throw std::invalid_argument("delta split needs lambda1 > 0");
  }
  if (c.n0 <= 0.0 || c.n1 <= 0.0) {
    throw std::invalid_argument("delta split needs both groups nonempty");
  }
  DeltaSplit d;
  if (mode == SplitMode::balanced) {
    d.delta1 = c.lambda1 /
               (1.0 + (c.n1 / (c.n0 * delta_di)) * (1.0 + c.lambda0 / c.lambda1));
    d.delta0 = d.delta1;
  } else {
    d.delta1 = c.lambda1 /
               (1.0 + (1.0 / delta_di) *
                          (1.0 + c.n1 * c.lambda0 / (c.n0 * c.lambda1)));
    d.delta0 = d.delta1 * c.n0 / c.n1;
  }
  if (c.lambda0 + d.delta0 > c.n0 + 1e-12) {
    throw std::invalid_argument(
        "infeasible target: required positive mass exceeds group size");
  }
  return d;
}

WeightedDistribution fairwash_entropic(const Dataset& data, double target_di,
                                       SplitMode mode) {
  const GroupCounts c = group_counts(data);
  const double di0 = disparate_impact(c);
  if (target_di < di0 - 1e-12) {
    throw std::invalid_argument("target DI lies below the current DI");
  }
  if (target_di <= di0 + 1e-12) {
    return uniform_weights(data);  // nothing to correct
  }

  const DeltaSplit d = delta_split(c, target_di - di0, mode);
  const double n = static_cast<double>(data.rows());
  if (c.lambda0 + d.delta0 >= c.n0 - 1e-9 || c.lambda1 - d.delta1 <= 1e-9) {
    throw std::invalid_argument(
        "infeasible target: tilted masses leave the hull interior");
  }

  // phi(s, yhat) = ((1-s) yhat, s yhat, s); the fourth coordinate 1-s is
  // affinely dependent and would make the covariance singular.
  MomentConstraint mc;
  mc.phi_values.resize(data.rows(), 3);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const double s = data.S[i];
    const double yhat = data.Yhat[i];
    mc.phi_values(i, 0) = (1.0 - s) * yhat;
    mc.phi_values(i, 1) = s * yhat;
    mc.phi_values(i, 2) = s;
  }
  mc.target.resize(3);
  mc.target << (c.lambda0 + d.delta0) / n, (c.lambda1 - d.delta1) / n, c.n1 / n;

  const TiltSolution sol = solve_tilt(mc, 1e-11);
  WeightedDistribution out;
  out.base = data;
  out.weights = sol.weights;
  return out;
}

}  // namespace fairaudit
