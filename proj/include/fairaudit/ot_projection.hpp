#pragma once

#include "fairaudit/dataset.hpp"
#include "fairaudit/entropic.hpp"
#include "fairaudit/manipulation.hpp"
#include "fairaudit/model.hpp"

#include <Eigen/Dense>

#include <vector>

namespace fairaudit {

/// Knobs of the constrained Wasserstein projection. The dual weight lambda
/// escalates geometrically until the group rate target is met; the inner
/// gradient steps use a decaying rate.
struct ProjectionConfig {
  double target_di = 0.8;
  SplitMode mode = SplitMode::balanced;
  double lambda_init = 0.05;
  double lambda_growth = 1.2;
  double eta_init = 0.05;
  double eta_decay = 1.2;
  int inner_iters = 10;
  bool variant_1d = false;
  double lambda_cap_factor = 1.0995116e12;  // 2^40 escalations past init
  bool trim_excess_flips = true;
};

/// Target positive rates per group implied by a DI improvement split.
struct GroupTargets {
  double p0_target = 0.0;  // floor for the s=0 positive rate
  double p1_target = 0.0;  // ceiling for the s=1 positive rate
};

GroupTargets group_targets(const GroupCounts& counts, double target_di,
                           SplitMode mode);

/// Minimizes |z - x|^2 - direction * lambda * f(x) by gradient descent with
/// step eta decaying by eta_decay each iteration. direction +1 pushes f(x)
/// up (group s=0), -1 pushes it down (group s=1).
Eigen::VectorXd project_point(const Classifier& model,
                              const Eigen::VectorXd& z, double lambda,
                              int direction, double eta, int iters,
                              double eta_decay = 1.2);

/// Per-feature sorted value sets achieved in a dataset, for the 1D snap.
std::vector<std::vector<double>> achievable_values(const Dataset& data);

/// Replaces each coordinate by the nearest achieved value of that feature;
/// equidistant ties take the lower value.
Eigen::VectorXd snap_1d(const Eigen::VectorXd& x,
                        const std::vector<std::vector<double>>& achievable);

/// White-box fair-washing by constrained Wasserstein projection: movable
/// rows (s=0 with yhat=0, s=1 with yhat=1) are pushed across the decision
/// boundary under an escalating dual weight; excess flips are trimmed so
/// the achieved group rates are tight and every untouched row stays
/// bit-identical.
ManipulationResult fairwash_grad(const Dataset& data, const Classifier& model,
                                 const ProjectionConfig& config);

struct SlacknessReport {
  Eigen::VectorXd shortfall;  // max(0, t - achieved) componentwise
  double residual = 0.0;      // |<lambda*, t - achieved>|
  bool feasible = false;
};

/// Complementary-slackness diagnostics for the inequality-constrained
/// projection: feasibility shortfall and the duality residual.
SlacknessReport check_slackness(const Eigen::VectorXd& lambda_star,
                                const Eigen::VectorXd& t,
                                const Eigen::VectorXd& achieved);

}  // namespace fairaudit
