#include <doctest.h>

#include "fairaudit/entropic.hpp"
#include "support/oracles.hpp"

#include <cmath>
#include <random>

using namespace fairaudit;

namespace {

Dataset bins_dataset(int s0y0, int s0y1, int s1y0, int s1y1) {
  const int n = s0y0 + s0y1 + s1y0 + s1y1;
  Dataset d;
  d.X.resize(n, 1);
  d.S.resize(n);
  d.Yhat.resize(n);
  int r = 0;
  auto fill = [&](int count, int s, int y) {
    for (int k = 0; k < count; ++k, ++r) {
      d.X(r, 0) = r;
      d.S[r] = s;
      d.Yhat[r] = y;
    }
  };
  fill(s0y0, 0, 0);
  fill(s0y1, 0, 1);
  fill(s1y0, 1, 0);
  fill(s1y1, 1, 1);
  return d;
}

}  // namespace

TEST_CASE("log_partition basics") {
  Eigen::MatrixXd phi(3, 2);
  phi << 1, 0, 0, 1, 2, 2;

  const LogPartition at_zero = log_partition(phi, Eigen::Vector2d::Zero());
  CHECK(at_zero.value == doctest::Approx(0.0));
  CHECK(at_zero.mean[0] == doctest::Approx(1.0));
  CHECK(at_zero.mean[1] == doctest::Approx(1.0));

  Eigen::MatrixXd single(1, 2);
  single << 3, -4;
  Eigen::Vector2d xi(0.7, 0.1);
  const LogPartition lone = log_partition(single, xi);
  CHECK(lone.mean[0] == doctest::Approx(3.0));
  CHECK(lone.mean[1] == doctest::Approx(-4.0));
  CHECK(lone.covariance.cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  // two atoms at phi=0,1 with xi=log 4: tilted mean e^xi/(1+e^xi) = 0.8
  Eigen::MatrixXd two(2, 1);
  two << 0, 1;
  Eigen::VectorXd xil(1);
  xil << std::log(4.0);
  CHECK(log_partition(two, xil).mean[0] == doctest::Approx(0.8));
}

TEST_CASE("log_partition is overflow-safe by construction") {
  Eigen::MatrixXd phi(2, 1);
  phi << 0, 1;
  Eigen::VectorXd huge(1);
  huge << 5000.0;
  const LogPartition lp = log_partition(phi, huge);
  CHECK(std::isfinite(lp.value));
  CHECK(lp.mean[0] == doctest::Approx(1.0));
}

TEST_CASE("solve_tilt identity and two-atom closed form") {
  Eigen::MatrixXd phi(4, 2);
  phi << 1, 0, 0, 1, 1, 1, 0, 0;
  MomentConstraint c;
  c.phi_values = phi;
  c.target = phi.colwise().mean();
  const TiltSolution sol = solve_tilt(c);
  CHECK(sol.xi.cwiseAbs().maxCoeff() <= 1e-6);
  CHECK((sol.weights.array() - 0.25).abs().maxCoeff() <= 1e-8);

  Eigen::MatrixXd two(2, 1);
  two << 0, 1;
  MomentConstraint c2;
  c2.phi_values = two;
  c2.target = Eigen::VectorXd::Constant(1, 0.8);
  const TiltSolution sol2 = solve_tilt(c2);
  CHECK(sol2.weights[0] == doctest::Approx(0.2).epsilon(1e-8));
  CHECK(sol2.weights[1] == doctest::Approx(0.8).epsilon(1e-8));
}

TEST_CASE("solve_tilt survives an affinely redundant constraint via a ridge") {
  // fourth column 1-s is affinely dependent on the third: the covariance is
  // singular, yet the weights stay well-defined
  Eigen::MatrixXd phi(6, 4);
  int r = 0;
  for (int s : {0, 0, 0, 1, 1, 1}) {
    const int yhat = r % 2;
    phi(r, 0) = (1 - s) * yhat;
    phi(r, 1) = s * yhat;
    phi(r, 2) = s;
    phi(r, 3) = 1 - s;
    ++r;
  }
  MomentConstraint c;
  c.phi_values = phi;
  Eigen::VectorXd mix(6);
  mix << 0.3, 0.1, 0.1, 0.2, 0.1, 0.2;
  c.target = phi.transpose() * mix;
  const TiltSolution sol = solve_tilt(c, 1e-9);
  CHECK(sol.regularized);
  CHECK(sol.residual <= 1e-9);
  CHECK((phi.transpose() * sol.weights - c.target).cwiseAbs().maxCoeff() <=
        1e-8);
}

TEST_CASE("solve_tilt rejects targets outside the hull") {
  Eigen::MatrixXd two(2, 1);
  two << 0, 1;
  MomentConstraint c;
  c.phi_values = two;
  c.target = Eigen::VectorXd::Constant(1, 1.4);
  CHECK_THROWS(solve_tilt(c));
}

TEST_CASE("solve_tilt matches the simplex projected-gradient oracle") {
  std::mt19937_64 rng(2718);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif(0.1, 1.0);
  for (int rep = 0; rep < 12; ++rep) {
    const int n = 6, k = 2;
    Eigen::MatrixXd phi(n, k);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j) phi(i, j) = gauss(rng);
    }
    // targets built as interior convex combinations are always feasible
    Eigen::VectorXd mix(n);
    for (int i = 0; i < n; ++i) mix[i] = unif(rng);
    mix /= mix.sum();
    MomentConstraint c;
    c.phi_values = phi;
    c.target = phi.transpose() * mix;

    const TiltSolution sol = solve_tilt(c, 1e-11);
    CHECK(sol.residual <= 1e-11);
    const double kl_dual = kl_reweighting(sol.weights);
    const auto oracle = oracles::simplex_kl_oracle(phi, c.target);
    CHECK(std::abs(kl_dual - oracle.kl) <= 1e-6);
  }
}

TEST_CASE("closed-form KL equals the dual objective at the optimum") {
  Eigen::MatrixXd phi(5, 1);
  phi << 0, 1, 2, 3, 4;
  MomentConstraint c;
  c.phi_values = phi;
  c.target = Eigen::VectorXd::Constant(1, 2.9);
  const TiltSolution sol = solve_tilt(c, 1e-11);
  const double dual = sol.xi.dot(c.target) - sol.log_partition;
  CHECK(kl_reweighting(sol.weights) == doctest::Approx(dual).epsilon(1e-9));
}

TEST_CASE("delta_split hand case and mode agreement") {
  const GroupCounts c{100, 100, 10, 40};
  const DeltaSplit b = delta_split(c, 0.25, SplitMode::balanced);
  CHECK(b.delta1 == doctest::Approx(40.0 / 6.0).epsilon(1e-12));
  CHECK(b.delta0 == doctest::Approx(b.delta1));
  const double di_after = ((c.lambda0 + b.delta0) / c.n0) /
                          ((c.lambda1 - b.delta1) / c.n1);
  CHECK(di_after == doctest::Approx(0.5).epsilon(1e-12));

  // equal group sizes collapse the two modes onto the same split
  const DeltaSplit p = delta_split(c, 0.25, SplitMode::proportional);
  CHECK(p.delta1 == doctest::Approx(b.delta1).epsilon(1e-12));
  CHECK(p.delta0 == doctest::Approx(b.delta0).epsilon(1e-12));

  // the split vanishes with the requested improvement
  CHECK(delta_split(c, 1e-9, SplitMode::balanced).delta1 <= 1e-7);

  CHECK_THROWS(delta_split(c, 0.0, SplitMode::balanced));
  CHECK_THROWS(delta_split(c, -0.2, SplitMode::balanced));
  CHECK_THROWS(delta_split({100, 100, 95, 40}, 3.0, SplitMode::balanced));
}

TEST_CASE("delta_split reaches the requested DI exactly in both modes") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    GroupCounts c;
    c.n0 = 20 + 400 * unif(rng);
    c.n1 = 20 + 400 * unif(rng);
    c.lambda0 = c.n0 * (0.05 + 0.4 * unif(rng));
    c.lambda1 = c.n1 * (0.3 + 0.6 * unif(rng));
    const double di0 = disparate_impact(c);
    if (di0 >= 1.0) continue;
    const double delta_di = (1.0 - di0) * 0.8 * unif(rng) + 1e-6;

    for (SplitMode mode : {SplitMode::balanced, SplitMode::proportional}) {
      DeltaSplit d{};
      try {
        d = delta_split(c, delta_di, mode);
      } catch (const std::invalid_argument&) {
        continue;  // improvement infeasible for these counts
      }
      const double di_after = ((c.lambda0 + d.delta0) / c.n0) /
                              ((c.lambda1 - d.delta1) / c.n1);
      CHECK(di_after == doctest::Approx(di0 + delta_di).epsilon(1e-10));
      if (mode == SplitMode::proportional) {
        CHECK(d.delta0 / c.n0 == doctest::Approx(d.delta1 / c.n1));
      }
    }
  }
}

TEST_CASE("fairwash_entropic is the identity at the current DI") {
  const Dataset d = bins_dataset(3, 1, 1, 3);
  const double di0 = disparate_impact(d);
  const WeightedDistribution w = fairwash_entropic(d, di0, SplitMode::balanced);
  CHECK((w.weights.array() - 0.125).abs().maxCoeff() <= 1e-12);
  CHECK_THROWS(fairwash_entropic(d, di0 - 0.1, SplitMode::balanced));
}

TEST_CASE("fairwash_entropic hits the target DI and keeps group masses") {
  const Dataset d = bins_dataset(5, 1, 2, 4);
  const GroupCounts before = group_counts(d);
  for (SplitMode mode : {SplitMode::balanced, SplitMode::proportional}) {
    const WeightedDistribution w = fairwash_entropic(d, 0.8, mode);
    CHECK((w.weights.array() > 0.0).all());
    CHECK(w.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
    const GroupCounts after = group_counts(w);
    CHECK(disparate_impact(after) == doctest::Approx(0.8).epsilon(1e-8));
    CHECK(after.n0 == doctest::Approx(before.n0).epsilon(1e-9));
    CHECK(after.n1 == doctest::Approx(before.n1).epsilon(1e-9));
  }
}

TEST_CASE("entropic KL grows with the target DI") {
  const Dataset d = bins_dataset(40, 6, 20, 30);
  const double di0 = disparate_impact(d);
  double last = -1.0;
  for (double target = di0 + 0.05; target < 1.0; target += 0.1) {
    const WeightedDistribution w =
        fairwash_entropic(d, target, SplitMode::proportional);
    const double kl = kl_reweighting(w.weights);
    CHECK(kl >= last - 1e-12);
    last = kl;
  }
}
