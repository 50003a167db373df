#include <doctest.h>

#include "fairaudit/ot_projection.hpp"
#include "fairaudit/divergences.hpp"
#include "fairaudit/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

using namespace fairaudit;

namespace {

Classifier logistic_model(const Eigen::VectorXd& w, double b, double threshold) {
  const std::string path = "/tmp/fairaudit_ot_logistic.txt";
  std::ofstream os(path);
  os << "fairaudit-mlp 1\n2 " << w.size() << " 1\n" << threshold << "\n";
  os.precision(17);
  for (Eigen::Index j = 0; j < w.size(); ++j) os << w[j] << ' ';
  os << b << "\n";
  os.close();
  Classifier m = Classifier::load(path);
  std::remove(path.c_str());
  return m;
}

Dataset trained_synthetic(int n, Classifier& model, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n = n;
  spec.p0 = 0.15;
  spec.p1 = 0.45;
  spec.cube_side = 6.0;  // wide separation so the net recovers yhat
  std::mt19937_64 rng(seed);
  Dataset d = gen_synthetic(spec, rng);
  MlpConfig cfg;
  cfg.hidden = {8};
  cfg.epochs = 60;
  std::mt19937_64 fit_rng(seed + 1);
  model = fit(d, cfg, fit_rng);
  model.set_threshold(
      std::clamp(select_threshold(model.predict_logits(d.X), *d.Y), 1e-6,
                 1.0 - 1e-6));
  d.Yhat = model.predict_labels(d.X);
  d.logits = model.predict_logits(d.X);
  return d;
}

}  // namespace

TEST_CASE("project_point fixed point and logistic direction") {
  Eigen::VectorXd w(2);
  w << 1.0, -2.0;
  const Classifier model = logistic_model(w, 0.1, 0.5);

  Eigen::VectorXd z(2);
  z << 0.4, 0.7;
  const Eigen::VectorXd same = project_point(model, z, 0.0, 1, 0.05, 12);
  CHECK((same - z).cwiseAbs().maxCoeff() <= 1e-14);

  const Eigen::VectorXd moved = project_point(model, z, 2.0, 1, 0.05, 12);
  const Eigen::VectorXd disp = moved - z;
  // displacement stays in span{w} for a logistic score
  const double cross = disp[0] * w[1] - disp[1] * w[0];
  CHECK(std::abs(cross) <= 1e-10 * std::max(1.0, disp.norm()));
  CHECK(model.predict_logits(moved.transpose())[0] >
        model.predict_logits(z.transpose())[0]);

  const Eigen::VectorXd pushed_down = project_point(model, z, 2.0, -1, 0.05, 12);
  CHECK(model.predict_logits(pushed_down.transpose())[0] <
        model.predict_logits(z.transpose())[0]);
}

TEST_CASE("project_point objective is non-increasing along the iterates") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> gauss;
  for (int rep = 0; rep < 10; ++rep) {
    std::mt19937_64 mrng(100 + rep);
    const Classifier model({3, 6, 1}, 0.5, mrng);
    Eigen::VectorXd z(3);
    for (int j = 0; j < 3; ++j) z[j] = gauss(rng);
    const double lambda = 1.5;
    const int direction = rep % 2 == 0 ? 1 : -1;

    auto objective = [&](const Eigen::VectorXd& x) {
      return (x - z).squaredNorm() -
             lambda * direction * model.predict_logits(x.transpose())[0];
    };
    double prev = objective(z);
    for (int it = 1; it <= 8; ++it) {
      const Eigen::VectorXd x = project_point(model, z, lambda, direction,
                                              0.01, it);
      const double now = objective(x);
      CHECK(now <= prev + 1e-10);
      prev = now;
    }
  }
}

TEST_CASE("snap_1d nearest value with lower tie") {
  std::vector<std::vector<double>> achievable = {{0.0, 1.0, 2.0}, {1.0, 2.0}};
  Eigen::VectorXd x(2);
  x << 1.0002, 1.5;
  const Eigen::VectorXd snapped = snap_1d(x, achievable);
  CHECK(snapped[0] == doctest::Approx(1.0));
  CHECK(snapped[1] == doctest::Approx(1.0));  // equidistant tie -> lower

  Eigen::VectorXd inside(2);
  inside << 2.0, 2.0;
  CHECK((snap_1d(inside, achievable) - inside).cwiseAbs().maxCoeff() == 0.0);

  Eigen::VectorXd beyond(2);
  beyond << -7.0, 9.0;
  const Eigen::VectorXd clamped = snap_1d(beyond, achievable);
  CHECK(clamped[0] == doctest::Approx(0.0));
  CHECK(clamped[1] == doctest::Approx(2.0));
}

TEST_CASE("fairwash_grad no-op when the target is already met") {
  Classifier model;
  const Dataset d = trained_synthetic(400, model, 31);
  ProjectionConfig cfg;
  cfg.target_di = disparate_impact(d);
  const ManipulationResult r = fairwash_grad(d, model, cfg);
  CHECK(r.moves.empty());
  CHECK(base_of(r.output).X == d.X);
  CHECK(r.lambda_star.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fairwash_grad meets rate targets tightly and only moves movable rows") {
  Classifier model;
  const Dataset d = trained_synthetic(500, model, 77);
  const double di0 = disparate_impact(d);
  ProjectionConfig cfg;
  cfg.target_di = std::min(0.85, di0 + 0.3);

  for (bool variant_1d : {false, true}) {
    cfg.variant_1d = variant_1d;
    const ManipulationResult r = fairwash_grad(d, model, cfg);
    const Dataset& out = base_of(r.output);
    CHECK(r.achieved_di >= cfg.target_di - 1e-12);

    // achieved rates are the integer-rounded targets exactly
    CHECK(r.rate_achieved[0] == doctest::Approx(r.rate_targets[0]));
    CHECK(r.rate_achieved[1] == doctest::Approx(r.rate_targets[1]));
    CHECK(r.lambda_star.minCoeff() >= 0.0);

    // complementary slackness on the (>= , <=) pair written as >= form
    Eigen::VectorXd t(2), achieved(2);
    t << r.rate_targets[0], -r.rate_targets[1];
    achieved << r.rate_achieved[0], -r.rate_achieved[1];
    const SlacknessReport slack = check_slackness(r.lambda_star, t, achieved);
    CHECK(slack.residual <= 1e-6);
    CHECK(slack.feasible);

    // untouched rows are bit-identical; moved rows are movable-bin rows
    std::vector<bool> moved(static_cast<std::size_t>(d.rows()), false);
    for (const auto& mv : r.moves) moved[static_cast<std::size_t>(mv.row)] = true;
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
      if (moved[static_cast<std::size_t>(i)]) {
        const bool movable = (d.S[i] == 0 && d.Yhat[i] == 0) ||
                             (d.S[i] == 1 && d.Yhat[i] == 1);
        CHECK(movable);
      } else {
        CHECK(out.X.row(i) == d.X.row(i));
      }
    }
  }
}

TEST_CASE("fairwash_grad 1D variant keeps covariates on achieved values") {
  Classifier model;
  const Dataset d = trained_synthetic(400, model, 123);
  ProjectionConfig cfg;
  cfg.target_di = std::min(0.8, disparate_impact(d) + 0.25);
  cfg.variant_1d = true;
  const ManipulationResult r = fairwash_grad(d, model, cfg);
  const Dataset& out = base_of(r.output);
  const auto values = achievable_values(d);
  for (const auto& mv : r.moves) {
    for (Eigen::Index c = 0; c < d.dim(); ++c) {
      const auto& v = values[static_cast<std::size_t>(c)];
      const double x = out.X(mv.row, c);
      CHECK(std::binary_search(v.begin(), v.end(), x));
    }
  }
}

TEST_CASE("fairwash_grad satisfies the mixture upper bound") {
  Classifier model;
  const Dataset d = trained_synthetic(300, model, 207);
  ProjectionConfig cfg;
  cfg.target_di = std::min(0.8, disparate_impact(d) + 0.25);
  const ManipulationResult r = fairwash_grad(d, model, cfg);
  const Dataset& out = base_of(r.output);

  auto group_rows = [&](const Dataset& data, int s) {
    std::vector<int> rows;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      if (data.S[i] == s) rows.push_back(static_cast<int>(i));
    }
    return rows;
  };
  auto uniform = [](Eigen::Index n) {
    return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  };
  auto slice = [&](const Dataset& data, const std::vector<int>& rows) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), data.dim());
    for (std::size_t k = 0; k < rows.size(); ++k) m.row(k) = data.X.row(rows[k]);
    return m;
  };

  const auto rows0 = group_rows(d, 0);
  const auto rows1 = group_rows(d, 1);
  const double pi = static_cast<double>(rows1.size()) / d.rows();
  const double whole =
      wasserstein_exact(d.X, uniform(d.rows()), out.X, uniform(d.rows())).first;
  const double g0 = wasserstein_exact(slice(d, rows0), uniform(rows0.size()),
                                      slice(out, rows0), uniform(rows0.size()))
                        .first;
  const double g1 = wasserstein_exact(slice(d, rows1), uniform(rows1.size()),
                                      slice(out, rows1), uniform(rows1.size()))
                        .first;
  CHECK(whole <= pi * g1 + (1.0 - pi) * g0 + 1e-8);
}

TEST_CASE("fairwash_grad reports unreachable constraints") {
  Classifier model;
  const Dataset d = trained_synthetic(200, model, 404);
  ProjectionConfig cfg;
  cfg.target_di = std::min(0.9, disparate_impact(d) + 0.3);
  cfg.lambda_cap_factor = 1.5;  // almost no escalation room
  cfg.lambda_init = 1e-12;
  CHECK_THROWS_WITH_AS(fairwash_grad(d, model, cfg),
                       doctest::Contains("unreachable"), std::runtime_error);
}

TEST_CASE("check_slackness reports shortfall and residual") {
  Eigen::VectorXd lambda(2), t(2), achieved(2);

  lambda << 0, 0;
  t << 0.3, 0.2;
  achieved << 0.5, 0.2;
  const SlacknessReport inactive = check_slackness(lambda, t, achieved);
  CHECK(inactive.residual == doctest::Approx(0.0));
  CHECK(inactive.feasible);

  lambda << 2.0, 1.0;
  achieved = t;
  const SlacknessReport active = check_slackness(lambda, t, achieved);
  CHECK(active.residual == doctest::Approx(0.0));

  achieved << t[0] + 2e-3, t[1];
  const SlacknessReport overshoot = check_slackness(lambda, t, achieved);
  CHECK(overshoot.residual > 1e-6);  // flags the slack constraint with
                                     // positive multiplier

  achieved << t[0] - 0.05, t[1];
  const SlacknessReport infeasible = check_slackness(lambda, t, achieved);
  CHECK_FALSE(infeasible.feasible);
  CHECK(infeasible.shortfall[0] == doctest::Approx(0.05));
}
