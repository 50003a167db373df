#pragma once

#include "fairaudit/dataset.hpp"

#include <Eigen/Dense>

#include <random>

namespace fairaudit {

/// Synthetic tabular generator covering all four (S, Yhat) bins:
/// S ~ Bernoulli(p_s), Yhat | S=s ~ Bernoulli(p_s-rate), and
/// X | (S, Yhat) ~ N(bin mean, I_d). The implied DI is p0/p1. Y equals Yhat
/// unless label noise is configured.
struct SyntheticSpec {
  int n = 2000;
  int dim = 2;
  double p_s = 0.5;   // E(S)
  double p0 = 0.12;   // E(Yhat | S = 0)
  double p1 = 0.40;   // E(Yhat | S = 1)
  /// Bin means sit at the corners of a hypercube of this side length in the
  /// first two coordinates (s maps to axis 0, yhat to axis 1); remaining
  /// coordinates are centered.
  double cube_side = 2.0;
  double label_noise = 0.0;  // P(Y != Yhat)

  double implied_di() const { return p0 / p1; }
};

Dataset gen_synthetic(const SyntheticSpec& spec, std::mt19937_64& rng);

}  // namespace fairaudit
