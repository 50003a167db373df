#include "fairaudit/ot_projection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fairaudit {

GroupTargets group_targets(const GroupCounts& c, double target_di,
                           SplitMode mode) {
  const double di0 = disparate_impact(c);
  if (target_di <= di0) {
    return {c.lambda0 / c.n0, c.lambda1 / c.n1};
  }
  const DeltaSplit d = delta_split(c, target_di - di0, mode);
  return {(c.lambda0 + d.delta0) / c.n0, (c.lambda1 - d.delta1) / c.n1};
}

Eigen::VectorXd project_point(const Classifier& model, const Eigen::VectorXd& z,
                              double lambda, int direction, double eta,
                              int iters, double eta_decay) {
  Eigen::VectorXd x = z;
  double step = eta;
  for (int it = 0; it < iters; ++it) {
    const Eigen::VectorXd grad =
        2.0 * (x - z) - direction * lambda * model.grad_input(x);
    x -= step * grad;
    step /= eta_decay;
  }
  return x;
}

std::vector<std::vector<double>> achievable_values(const Dataset& data) {
  std::vector<std::vector<double>> vals(static_cast<std::size_t>(data.dim()));
  for (Eigen::Index c = 0; c < data.dim(); ++c) {
    auto& v = vals[static_cast<std::size_t>(c)];
    v.assign(data.X.col(c).data(), data.X.col(c).data() + data.rows());
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return vals;
}

Eigen::VectorXd snap_1d(const Eigen::VectorXd& x,
                        const std::vector<std::vector<double>>& achievable) {
  if (static_cast<std::size_t>(x.size()) != achievable.size()) {
    throw std::invalid_argument("snap dimension mismatch");
  }
  Eigen::VectorXd out(x.size());
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    const auto& v = achievable[static_cast<std::size_t>(c)];
    if (v.empty()) throw std::invalid_argument("empty achievable set");
    auto hi = std::lower_bound(v.begin(), v.end(), x[c]);
    if (hi == v.end()) {
      out[c] = v.back();
    } else if (hi == v.begin()) {
      out[c] = v.front();
    } else {
      const double above = *hi;
      const double below = *(hi - 1);
      // ties take the lower value
      out[c] = (above - x[c] < x[c] - below) ? above : below;
    }
  }
  return out;
}

namespace {

struct GroupMove {
  std::vector<int> rows;        // movable row indices (original order)
  Eigen::MatrixXd positions;    // their final positions
  std::vector<int> flipped;     // offsets into `rows` whose decision changed
  double lambda_star = 0.0;
};

// Escalates lambda until enough movable rows cross the decision boundary to
// satisfy the group rate target, then trims the excess, keeping the
// smallest-displacement flips.
GroupMove move_group(const Dataset& data, const Classifier& model,
                     const ProjectionConfig& cfg,
                     const std::vector<std::vector<double>>& achievable,
                     int group, int needed_flips) {
  GroupMove gm;
  const int want_label = group == 0 ? 1 : 0;  // movable rows flip toward this
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    if (data.S[i] == group && data.Yhat[i] != want_label) {
      gm.rows.push_back(static_cast<int>(i));
    }
  }
  if (needed_flips == 0) return gm;
  if (needed_flips > static_cast<int>(gm.rows.size())) {
    throw std::runtime_error(
        "constraint unreachable: group " + std::to_string(group) + " needs " +
        std::to_string(needed_flips) + " flips but only " +
        std::to_string(gm.rows.size()) + " rows are movable");
  }

  const int m = static_cast<int>(gm.rows.size());
  Eigen::MatrixXd originals(m, data.dim());
  for (int r = 0; r < m; ++r) originals.row(r) = data.X.row(gm.rows[r]);

  const int direction = group == 0 ? 1 : -1;
  const double lambda_cap = cfg.lambda_init * cfg.lambda_cap_factor;
  double lambda = cfg.lambda_init;
  while (true) {
    Eigen::MatrixXd x = originals;
    double eta = cfg.eta_init;
    for (int it = 0; it < cfg.inner_iters; ++it) {
      for (int r = 0; r < m; ++r) {
        const Eigen::VectorXd grad =
            2.0 * (x.row(r).transpose() - originals.row(r).transpose()) -
            direction * lambda * model.grad_input(x.row(r).transpose());
        x.row(r) -= eta * grad.transpose();
      }
      eta /= cfg.eta_decay;
      if (cfg.variant_1d) {
        for (int r = 0; r < m; ++r) {
          x.row(r) = snap_1d(x.row(r).transpose(), achievable).transpose();
        }
      }
      const Eigen::VectorXi labels = model.predict_labels(x);
      int flips = 0;
      for (int r = 0; r < m; ++r) flips += labels[r] == want_label ? 1 : 0;
      if (flips >= needed_flips) {
        gm.positions = x;
        gm.lambda_star = lambda;
        for (int r = 0; r < m; ++r) {
          if (labels[r] == want_label) gm.flipped.push_back(r);
        }
        if (cfg.trim_excess_flips &&
            static_cast<int>(gm.flipped.size()) > needed_flips) {
          std::stable_sort(gm.flipped.begin(), gm.flipped.end(),
                           [&](int a, int b) {
                             const double da =
                                 (x.row(a) - originals.row(a)).squaredNorm();
                             const double db =
                                 (x.row(b) - originals.row(b)).squaredNorm();
                             return da < db;
                           });
          for (std::size_t r = static_cast<std::size_t>(needed_flips);
               r < gm.flipped.size(); ++r) {
            gm.positions.row(gm.flipped[r]) = originals.row(gm.flipped[r]);
          }
          gm.flipped.resize(static_cast<std::size_t>(needed_flips));
        }
        // Rows that moved without flipping carry pure transport cost for no
        // DI effect; they revert to their originals.
        std::vector<bool> kept(static_cast<std::size_t>(m), false);
        for (int r : gm.flipped) kept[static_cast<std::size_t>(r)] = true;
        for (int r = 0; r < m; ++r) {
          if (!kept[static_cast<std::size_t>(r)]) {
            gm.positions.row(r) = originals.row(r);
          }
        }
        return gm;
      }
    }
    lambda *= cfg.lambda_growth;
    if (lambda > lambda_cap) {
      throw std::runtime_error(
          "constraint unreachable under model geometry: lambda exceeded cap");
    }
  }
}

int flips_needed(double lambda_mass, double group_mass, double target_rate,
                 bool upward) {
  // Smallest integer count whose rate meets the target.
  const double raw = upward ? target_rate * group_mass - lambda_mass
                            : lambda_mass - target_rate * group_mass;
  return std::max(0, static_cast<int>(std::ceil(raw - 1e-9)));
}

}  // namespace

ManipulationResult fairwash_grad(const Dataset& data, const Classifier& model,
                                 const ProjectionConfig& cfg) {
  if (cfg.lambda_growth <= 1.0 || cfg.eta_decay <= 1.0) {
    throw std::invalid_argument("growth and decay factors must exceed 1");
  }
  if (cfg.inner_iters < 1 || cfg.lambda_init <= 0.0 || cfg.eta_init <= 0.0) {
    throw std::invalid_argument("projection schedule must be positive");
  }
  Dataset out = data;
  // The audited decision is the model's; refresh Yhat and logits so the
  // projection and the dataset agree.
  out.logits = model.predict_logits(out.X);
  out.Yhat = model.predict_labels(out.X);

  const GroupCounts c = group_counts(out);
  const double di0 = disparate_impact(c);

  ManipulationResult result;
  result.method = cfg.variant_1d
                      ? (cfg.mode == SplitMode::balanced ? "grad_b_1d" : "grad_p_1d")
                      : (cfg.mode == SplitMode::balanced ? "grad_b" : "grad_p");
  result.lambda_star = Eigen::VectorXd::Zero(2);
  result.rate_targets.resize(2);
  result.rate_achieved.resize(2);

  if (cfg.target_di < di0 - 1e-12) {
    throw std::invalid_argument("target DI lies below the current DI");
  }
  if (cfg.target_di <= di0 + 1e-12) {
    result.output = out;
    result.achieved_di = di0;
    result.rate_targets << c.lambda0 / c.n0, c.lambda1 / c.n1;
    result.rate_achieved = result.rate_targets;
    return result;
  }

  const GroupTargets targets = group_targets(c, cfg.target_di, cfg.mode);
  const int need0 = flips_needed(c.lambda0, c.n0, targets.p0_target, true);
  const int need1 = flips_needed(c.lambda1, c.n1, targets.p1_target, false);
  const auto achievable = cfg.variant_1d
                              ? achievable_values(out)
                              : std::vector<std::vector<double>>();

  for (int group = 0; group < 2; ++group) {
    const int needed = group == 0 ? need0 : need1;
    const GroupMove gm =
        move_group(out, model, cfg, achievable, group, needed);
    result.lambda_star[group] = needed > 0 ? gm.lambda_star : 0.0;
    for (int r : gm.flipped) {
      const int row = gm.rows[static_cast<std::size_t>(r)];
      MoveRecord rec;
      rec.row = row;
      rec.move = group == 0 ? "project s=0 toward positive"
                            : "project s=1 toward negative";
      rec.di_before = di0;
      rec.displacement =
          (gm.positions.row(r) - out.X.row(row)).norm();
      result.moves.push_back(rec);
      out.X.row(row) = gm.positions.row(r);
    }
  }

  out.logits = model.predict_logits(out.X);
  out.Yhat = model.predict_labels(out.X);
  const GroupCounts after = group_counts(out);
  result.achieved_di = disparate_impact(after);
  for (auto& rec : result.moves) rec.di_after = result.achieved_di;
  result.rate_targets << (c.lambda0 + need0) / c.n0, (c.lambda1 - need1) / c.n1;
  result.rate_achieved << after.lambda0 / after.n0, after.lambda1 / after.n1;
  result.output = out;
  return result;
}

SlacknessReport check_slackness(const Eigen::VectorXd& lambda_star,
                                const Eigen::VectorXd& t,
                                const Eigen::VectorXd& achieved) {
  if (lambda_star.size() != t.size() || t.size() != achieved.size()) {
    throw std::invalid_argument("slackness inputs disagree in size");
  }
  SlacknessReport rep;
  rep.shortfall = (t - achieved).cwiseMax(0.0);
  rep.residual = std::abs(lambda_star.dot(t - achieved));
  rep.feasible = rep.shortfall.size() == 0 || rep.shortfall.maxCoeff() <= 1e-9;
  return rep;
}

}  // namespace fairaudit
