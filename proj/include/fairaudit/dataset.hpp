#pragma once

#include <Eigen/Dense>

#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace fairaudit {

/// Audited sample: rows of (X covariates, S group, Yhat decision, optional
/// logits in [0,1], optional ground-truth Y). Immutable by convention after
/// construction; copy before modifying.
struct Dataset {
  Eigen::MatrixXd X;                       // n x d covariates
  Eigen::VectorXi S;                       // n, values in {0,1}
  Eigen::VectorXi Yhat;                    // n, values in {0,1}
  std::optional<Eigen::VectorXd> logits;   // n, values in [0,1]
  std::optional<Eigen::VectorXi> Y;        // n, values in {0,1}
  std::vector<std::string> feature_names;  // d entries

  Eigen::Index rows() const { return S.size(); }
  Eigen::Index dim() const { return X.cols(); }

  /// Throws std::invalid_argument on any violated invariant (length
  /// mismatch, non-binary S/Yhat/Y, logits outside [0,1]).
  void validate() const;
};

/// Reweighted empirical measure over the atoms of a base dataset.
/// weights are probabilities: nonnegative, summing to 1 within 1e-10.
struct WeightedDistribution {
  Dataset base;
  Eigen::VectorXd weights;

  void validate() const;
};

/// Either a plain dataset (uniform atoms) or a reweighted one.
using Distribution = std::variant<Dataset, WeightedDistribution>;

const Dataset& base_of(const Distribution& dist);
bool is_weighted(const Distribution& dist);

/// Sufficient statistics for Disparate Impact. For plain datasets these are
/// integer counts; for weighted distributions they are weight masses scaled
/// by n, so an atom carrying weight 1/n contributes exactly 1.
struct GroupCounts {
  double n0 = 0;       // mass with S = 0
  double n1 = 0;       // mass with S = 1
  double lambda0 = 0;  // mass with S = 0 and Yhat = 1
  double lambda1 = 0;  // mass with S = 1 and Yhat = 1
};

GroupCounts group_counts(const Dataset& data);
GroupCounts group_counts(const WeightedDistribution& dist);
GroupCounts group_counts(const Distribution& dist);

/// (lambda0/n0) / (lambda1/n1). Returns +inf when lambda1 = 0 < lambda0 and
/// 1 when lambda0 = lambda1 = 0. Throws std::domain_error when either group
/// is empty (DI undefined).
double disparate_impact(const GroupCounts& c);
double disparate_impact(const Dataset& data);
double disparate_impact(const Distribution& dist);

/// Draws round(fraction * n) rows. With replacement the atoms are drawn
/// multinomially with probability = weights; without replacement is only
/// valid for uniform weights and throws otherwise.
Dataset sample_fraction(const WeightedDistribution& dist, double fraction,
                        std::mt19937_64& rng, bool with_replacement);
Dataset sample_fraction(const Dataset& data, double fraction,
                        std::mt19937_64& rng, bool with_replacement);

/// Row subset in the given order (duplicates allowed).
Dataset take_rows(const Dataset& data, const std::vector<int>& idx);

/// Uniform weights 1/n over the atoms of `data`.
WeightedDistribution uniform_weights(const Dataset& data);

/// Mixes a fixed master seed with tags into an independent stream seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag);

}  // namespace fairaudit
