#pragma once

#include "fairaudit/dataset.hpp"
#include "fairaudit/transport.hpp"

#include <Eigen/Dense>

#include <utility>

namespace fairaudit {

/// Gaussian RBF kernel choice. bandwidth <= 0 selects the median heuristic:
/// the median pairwise Euclidean distance over the pooled atoms (fallback 1
/// when every pooled point coincides).
struct KernelSpec {
  double bandwidth = 0.0;

  static KernelSpec median_heuristic() { return {}; }
  static KernelSpec fixed(double sigma) { return {sigma}; }
  bool use_median() const { return bandwidth <= 0.0; }
};

struct WassersteinOptions {
  int atom_cap = 5000;      // reject larger inputs unless allow_large
  bool allow_large = false;
};

/// Exact squared 2-Wasserstein distance between weighted atom clouds in
/// R^m, with the optimal coupling. Ground cost is squared Euclidean.
std::pair<double, TransportPlan> wasserstein_exact(
    const Eigen::MatrixXd& p_atoms, const Eigen::VectorXd& p_weights,
    const Eigen::MatrixXd& q_atoms, const Eigen::VectorXd& q_weights,
    const WassersteinOptions& opts = {});

/// Exact squared Wasserstein distance between two histograms over the four
/// (S,Yhat) bins, ordered (0,0),(0,1),(1,0),(1,1). Ground cost between bins
/// is the squared Euclidean distance in {0,1}^2 (0, 1 or 2).
double wasserstein_sy(const Eigen::Vector4d& p, const Eigen::Vector4d& q);

/// KL divergence between weighted atom clouds matched by exact record
/// equality. Duplicate atoms are aggregated first; +inf when any P atom is
/// absent from Q's support.
double kl_atoms(const Eigen::MatrixXd& p_atoms, const Eigen::VectorXd& p_weights,
                const Eigen::MatrixXd& q_atoms, const Eigen::VectorXd& q_weights);

/// KL over the four (S,Yhat) bins. Smoothing (add 0.5/n pseudo-mass) is a
/// diagnostic aid only; the default keeps the +inf signal intact.
double kl_sy(const Eigen::Vector4d& p, const Eigen::Vector4d& q,
             bool smoothed = false);

/// Biased V-statistic MMD^2 with Gaussian kernel between weighted atoms.
double mmd2(const Eigen::MatrixXd& p_atoms, const Eigen::VectorXd& p_weights,
            const Eigen::MatrixXd& q_atoms, const Eigen::VectorXd& q_weights,
            const KernelSpec& kernel = KernelSpec::median_heuristic());

/// sum_ij wa_i wb_j exp(-|a_i - b_j|^2 / (2 sigma^2)); the building block of
/// mmd2, exposed so repeated comparisons against one fixed sample can cache
/// its self term.
double gaussian_kernel_sum(const Eigen::MatrixXd& a, const Eigen::VectorXd& wa,
                           const Eigen::MatrixXd& b, const Eigen::VectorXd& wb,
                           double sigma);

/// Median pairwise Euclidean distance between rows; 1 when degenerate.
double median_pairwise_distance(const Eigen::MatrixXd& points);

struct KsResult {
  double statistic = 0.0;  // sup |F_u - F_v|
  double p_value = 1.0;    // asymptotic, effective size nm/(n+m)
};

/// Two-sample Kolmogorov-Smirnov test on real-valued samples (here the
/// classifier logits f(X)).
KsResult ks_two_sample(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

/// Per-feature affine standardization fitted on a reference dataset and
/// applied before geometric distances, so no covariate dominates by scale.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  // 1 where the reference feature is constant

  static Standardizer fit(const Dataset& reference);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

/// Embeds records as rows [standardized X | S | Yhat] for the full-space
/// W and MMD statistics.
Eigen::MatrixXd embed_records(const Dataset& data, const Standardizer& std);

/// Mass per (S,Yhat) bin in the fixed order (0,0),(0,1),(1,0),(1,1).
Eigen::Vector4d sy_histogram(const Dataset& data);
Eigen::Vector4d sy_histogram(const WeightedDistribution& dist);
Eigen::Vector4d sy_histogram(const Distribution& dist);

}  // namespace fairaudit
