#include "fairaudit/rewrites.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <stdexcept>

namespace fairaudit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double bin_di(double n0, double n1, double l0, double l1) {
  if (n0 < 1.0 || n1 < 1.0) return -kInf;  // emptied group: inadmissible
  if (l1 == 0.0) return l0 == 0.0 ? 1.0 : kInf;
  return (l0 / n0) / (l1 / n1);
}

struct BinMove {
  const char* name;
  int from_s, from_y;  // source bin
  int to_s, to_y;      // destination bin
};

// Written as (yhat, s) transitions; see the header.
constexpr BinMove kAdmissible[3] = {
    {"y0s0->y1s0", 0, 0, 0, 1},
    {"y1s1->y1s0", 1, 1, 0, 1},
    {"y0s0->y0s1", 0, 0, 1, 0},
};

}  // namespace

ManipulationResult replace_greedy(const Dataset& data, double t, int speed) {
  if (!(t > 0.0 && t < 1.0)) {
    throw std::invalid_argument("replace target must lie in (0,1)");
  }
  if (speed < 1) throw std::invalid_argument("speed must be >= 1");

  Dataset out = data;
  GroupCounts c = group_counts(out);
  double di = disparate_impact(c);

  // Queue of row indices per (s, yhat) bin, lowest index first.
  std::deque<int> bins[2][2];
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    bins[out.S[i]][out.Yhat[i]].push_back(static_cast<int>(i));
  }

  ManipulationResult result;
  result.method = "replace";

  while (di < t) {
    int best = -1;
    int best_count = 0;
    double best_di = di;
    for (int m = 0; m < 3; ++m) {
      const BinMove& mv = kAdmissible[m];
      int avail = static_cast<int>(bins[mv.from_s][mv.from_y].size());
      if (mv.from_s != mv.to_s) {
        // moving individuals across groups must not empty the source group
        const double group = mv.from_s == 0 ? c.n0 : c.n1;
        avail = std::min(avail, static_cast<int>(group) - 1);
      }
      const int count = std::min(speed, avail);
      if (count < 1) continue;
      GroupCounts cc = c;
      const double dm = count;
      cc.n0 += dm * ((mv.to_s == 0) - (mv.from_s == 0));
      cc.n1 += dm * ((mv.to_s == 1) - (mv.from_s == 1));
      cc.lambda0 += dm * ((mv.to_s == 0 && mv.to_y == 1) -
                          (mv.from_s == 0 && mv.from_y == 1));
      cc.lambda1 += dm * ((mv.to_s == 1 && mv.to_y == 1) -
                          (mv.from_s == 1 && mv.from_y == 1));
      const double cand = bin_di(cc.n0, cc.n1, cc.lambda0, cc.lambda1);
      if (cand > best_di) {
        best_di = cand;
        best = m;
        best_count = count;
      }
    }
    if (best < 0) {
      throw std::runtime_error(
          "stuck below target: no admissible move increases DI (bins "
          "s0y1=" + std::to_string(static_cast<long>(c.lambda0)) +
          " s0y0=" + std::to_string(static_cast<long>(c.n0 - c.lambda0)) +
          " s1y1=" + std::to_string(static_cast<long>(c.lambda1)) +
          " s1y0=" + std::to_string(static_cast<long>(c.n1 - c.lambda1)) + ")");
    }

    const BinMove& mv = kAdmissible[best];
    for (int k = 0; k < best_count; ++k) {
      const int row = bins[mv.from_s][mv.from_y].front();
      bins[mv.from_s][mv.from_y].pop_front();
      bins[mv.to_s][mv.to_y].push_back(row);
      out.S[row] = mv.to_s;
      out.Yhat[row] = mv.to_y;

      MoveRecord rec;
      rec.row = row;
      rec.move = mv.name;
      rec.di_before = di;
      rec.displacement = std::sqrt(static_cast<double>(
          (mv.from_s != mv.to_s) + (mv.from_y != mv.to_y)));
      c.n0 += (mv.to_s == 0) - (mv.from_s == 0);
      c.n1 += (mv.to_s == 1) - (mv.from_s == 1);
      c.lambda0 +=
          (mv.to_s == 0 && mv.to_y == 1) - (mv.from_s == 0 && mv.from_y == 1);
      c.lambda1 +=
          (mv.to_s == 1 && mv.to_y == 1) - (mv.from_s == 1 && mv.from_y == 1);
      di = bin_di(c.n0, c.n1, c.lambda0, c.lambda1);
      rec.di_after = di;
      result.moves.push_back(rec);
    }
  }

  result.output = out;
  result.achieved_di = di;
  return result;
}

namespace {

struct SyYBins {
  // counts indexed by [s][yhat][y]; y collapses to 0 when absent
  double count[2][2][2] = {};

  static SyYBins of(const Dataset& data) {
    SyYBins b;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      const int y = data.Y ? (*data.Y)[i] : 0;
      b.count[data.S[i]][data.Yhat[i]][y] += 1.0;
    }
    return b;
  }

  void transfer(int s_from, int yh_from, int y_from, int s_to, int yh_to,
                int y_to, double m) {
    count[s_from][yh_from][y_from] -= m;
    count[s_to][yh_to][y_to] += m;
  }

  double di() const {
    const double n0 = count[0][0][0] + count[0][0][1] + count[0][1][0] +
                      count[0][1][1];
    const double n1 = count[1][0][0] + count[1][0][1] + count[1][1][0] +
                      count[1][1][1];
    return bin_di(n0, n1, count[0][1][0] + count[0][1][1],
                  count[1][1][0] + count[1][1][1]);
  }

  double eoo() const {
    const double pos1 = count[1][1][1];
    const double neg1 = count[1][0][1];
    const double pos0 = count[0][1][1];
    const double neg0 = count[0][0][1];
    if (pos1 + neg1 <= 0.0 || pos0 + neg0 <= 0.0) return kInf;
    return std::abs(pos1 / (pos1 + neg1) - pos0 / (pos0 + neg0));
  }
};

}  // namespace

double equality_of_odds(const Dataset& data) {
  if (!data.Y) throw std::invalid_argument("EoO needs ground-truth Y");
  const double v = SyYBins::of(data).eoo();
  if (v == kInf) throw std::domain_error("EoO undefined: empty Y=1 stratum");
  return v;
}

ManipulationResult match_greedy(const Dataset& data, double t,
                                MatchObjective objective,
                                const MatchOptions& options) {
  const Eigen::Index n = data.rows();
  if (n < 2) throw std::invalid_argument("matching needs at least two rows");
  if (objective == MatchObjective::equality_of_odds && !data.Y) {
    throw std::invalid_argument("EoO matching needs ground-truth Y");
  }

  Dataset out = data;
  SyYBins bins = SyYBins::of(out);
  // Objective is written as "higher is better": DI itself, or negated EoO.
  const bool doing_di = objective == MatchObjective::disparate_impact;
  auto score = [&]() { return doing_di ? bins.di() : -bins.eoo(); };
  auto done = [&](double s) { return doing_di ? s >= t : -s <= t; };
  double current = score();

  ManipulationResult result;
  result.method = doing_di ? "matching" : "matching_eoo";

  // Records for displacement: (X | S | Yhat). Pairwise distances are cached
  // and only the rewritten row's slice is refreshed after each step.
  Eigen::MatrixXd rec(n, data.dim() + 2);
  rec.leftCols(data.dim()) = out.X;
  rec.col(data.dim()) = out.S.cast<double>();
  rec.col(data.dim() + 1) = out.Yhat.cast<double>();
  const bool cache = n <= 5000;
  Eigen::MatrixXd dist;
  if (cache) {
    dist.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      dist.row(i) =
          (rec.rowwise() - rec.row(i)).rowwise().norm().transpose();
    }
  }
  auto distance = [&](Eigen::Index i, Eigen::Index k) -> double {
    if (cache) return dist(i, k);
    return (rec.row(i) - rec.row(k)).norm();
  };

  std::mt19937_64 rng(options.seed);
  const bool subsample =
      options.subsample_donors > 0 && n > 5000 &&
      options.subsample_donors < static_cast<int>(n);

  while (!done(current)) {
    double best_ratio = 0.0;
    bool best_instant = false;  // zero-displacement positive gain
    Eigen::Index best_i = -1, best_k = -1;
    double best_score = current;

    std::vector<Eigen::Index> donors;
    if (subsample) {
      donors.resize(static_cast<std::size_t>(options.subsample_donors));
      std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
      for (auto& d : donors) d = pick(rng);
      std::sort(donors.begin(), donors.end());
      donors.erase(std::unique(donors.begin(), donors.end()), donors.end());
    } else {
      donors.resize(static_cast<std::size_t>(n));
      for (Eigen::Index k = 0; k < n; ++k) donors[static_cast<std::size_t>(k)] = k;
    }

    for (Eigen::Index i = 0; i < n; ++i) {
      const int yi = out.Y ? (*out.Y)[i] : 0;
      for (Eigen::Index k : donors) {
        if (k == i) continue;
        const int yk = out.Y ? (*out.Y)[k] : 0;
        if (out.S[i] == out.S[k] && out.Yhat[i] == out.Yhat[k] && yi == yk) {
          continue;  // no effect on any objective
        }
        bins.transfer(out.S[i], out.Yhat[i], yi, out.S[k], out.Yhat[k], yk, 1.0);
        const double cand = score();
        bins.transfer(out.S[k], out.Yhat[k], yk, out.S[i], out.Yhat[i], yi, 1.0);
        const double gain = cand - current;
        if (gain <= 0.0) continue;
        const double d = distance(i, k);
        if (d <= 0.0) {
          if (!best_instant || cand > best_score) {
            best_instant = true;
            best_i = i;
            best_k = k;
            best_score = cand;
          }
          continue;
        }
        if (best_instant) continue;
        const double ratio = gain / d;
        if (ratio > best_ratio) {
          best_ratio = ratio;
          best_i = i;
          best_k = k;
          best_score = cand;
        }
      }
    }

    if (best_i < 0) {
      throw std::runtime_error(
          "stuck below target: no record copy improves the objective");
    }

    MoveRecord mv;
    mv.row = static_cast<int>(best_i);
    mv.move = "copy " + std::to_string(best_k) + " -> " + std::to_string(best_i);
    mv.di_before = doing_di ? current : -current;
    mv.displacement = distance(best_i, best_k);

    const int yi = out.Y ? (*out.Y)[best_i] : 0;
    const int yk = out.Y ? (*out.Y)[best_k] : 0;
    bins.transfer(out.S[best_i], out.Yhat[best_i], yi, out.S[best_k],
                  out.Yhat[best_k], yk, 1.0);
    out.X.row(best_i) = out.X.row(best_k);
    out.S[best_i] = out.S[best_k];
    out.Yhat[best_i] = out.Yhat[best_k];
    if (out.Y) (*out.Y)[best_i] = (*out.Y)[best_k];
    if (out.logits) (*out.logits)[best_i] = (*out.logits)[best_k];
    rec.row(best_i) = rec.row(best_k);
    if (cache) {
      dist.row(best_i) =
          (rec.rowwise() - rec.row(best_i)).rowwise().norm().transpose();
      dist.col(best_i) = dist.row(best_i).transpose();
    }

    current = score();
    mv.di_after = doing_di ? current : -current;
    result.moves.push_back(mv);
  }

  result.output = out;
  result.achieved_di = doing_di ? current : disparate_impact(out);
  return result;
}

void save_move_log_csv(const std::string& path,
                       const std::vector<MoveRecord>& moves) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write move log: " + path);
  os << std::setprecision(17);
  os << "row,move,metric_before,metric_after,displacement\n";
  for (const auto& m : moves) {
    os << m.row << ',' << m.move << ',' << m.di_before << ',' << m.di_after
       << ',' << m.displacement << '\n';
  }
}

}  // namespace fairaudit
