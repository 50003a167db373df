#include "fairaudit/divergences.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace fairaudit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Drops zero-weight atoms, keeping the original indices for plan entries.
struct Support {
  Eigen::MatrixXd atoms;
  Eigen::VectorXd weights;
  std::vector<int> index;
};

Support positive_support(const Eigen::MatrixXd& atoms,
                         const Eigen::VectorXd& weights) {
  if (atoms.rows() != weights.size()) {
    throw std::invalid_argument("atom/weight count mismatch");
  }
  Support s;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights[i] < 0.0) throw std::invalid_argument("negative atom weight");
    if (weights[i] > 0.0) s.index.push_back(static_cast<int>(i));
  }
  const Eigen::Index m = static_cast<Eigen::Index>(s.index.size());
  if (m == 0) throw std::invalid_argument("empty distribution");
  s.atoms.resize(m, atoms.cols());
  s.weights.resize(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    s.atoms.row(r) = atoms.row(s.index[static_cast<std::size_t>(r)]);
    s.weights[r] = weights[s.index[static_cast<std::size_t>(r)]];
  }
  return s;
}

// Bitwise record key; exact equality is the absolute-continuity notion here.
std::string atom_key(const Eigen::MatrixXd& atoms, Eigen::Index row) {
  std::string key(static_cast<std::size_t>(atoms.cols()) * sizeof(double), '\0');
  for (Eigen::Index c = 0; c < atoms.cols(); ++c) {
    double v = atoms(row, c);
    if (v == 0.0) v = 0.0;  // collapse -0.0 onto +0.0
    std::memcpy(key.data() + static_cast<std::size_t>(c) * sizeof(double), &v,
                sizeof(double));
  }
  return key;
}

double kolmogorov_sf(double lambda) {
  if (lambda < 1e-8) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += sign * term;
    sign = -sign;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace

std::pair<double, TransportPlan> wasserstein_exact(
    const Eigen::MatrixXd& p_atoms, const Eigen::VectorXd& p_weights,
    const Eigen::MatrixXd& q_atoms, const Eigen::VectorXd& q_weights,
    const WassersteinOptions& opts) {
  if (p_atoms.cols() != q_atoms.cols()) {
    throw std::invalid_argument("atom dimensions differ");
  }
  const Support p = positive_support(p_atoms, p_weights);
  const Support q = positive_support(q_atoms, q_weights);
  const int ns = static_cast<int>(p.atoms.rows());
  const int nt = static_cast<int>(q.atoms.rows());
  if (!opts.allow_large && (ns > opts.atom_cap || nt > opts.atom_cap)) {
    throw std::invalid_argument(
        "transport instance exceeds atom cap (" + std::to_string(opts.atom_cap) +
        "); pass allow_large to override");
  }

  // c_ij = |p_i|^2 + |q_j|^2 - 2 <p_i, q_j>, assembled row by row so the
  // peak footprint is one row-major cost array.
  std::vector<double> cost(static_cast<std::size_t>(ns) *
                           static_cast<std::size_t>(nt));
  const Eigen::VectorXd q_sq = q.atoms.rowwise().squaredNorm();
  Eigen::VectorXd row(nt);
  for (int i = 0; i < ns; ++i) {
    row = q_sq - 2.0 * (q.atoms * p.atoms.row(i).transpose());
    const double p_sq = p.atoms.row(i).squaredNorm();
    double* out = cost.data() + static_cast<std::size_t>(i) * nt;
    for (int j = 0; j < nt; ++j) out[j] = std::max(0.0, row[j] + p_sq);
  }

  TransportPlan plan = solve_transport(cost, ns, nt, p.weights, q.weights);
  for (auto& s : plan.source) s = p.index[static_cast<std::size_t>(s)];
  for (auto& t : plan.target) t = q.index[static_cast<std::size_t>(t)];
  return {plan.cost, std::move(plan)};
}

double wasserstein_sy(const Eigen::Vector4d& p, const Eigen::Vector4d& q) {
  for (int b = 0; b < 4; ++b) {
    if (p[b] < 0.0 || q[b] < 0.0) {
      throw std::invalid_argument("negative bin mass");
    }
  }
  if (std::abs(p.sum() - 1.0) > 1e-8 || std::abs(q.sum() - 1.0) > 1e-8) {
    throw std::invalid_argument("bin histograms must sum to 1");
  }
  // Bins live at the corners of {0,1}^2: (s,yhat) in order 00,01,10,11.
  Eigen::MatrixXd corners(4, 2);
  corners << 0, 0, 0, 1, 1, 0, 1, 1;
  Support sp = positive_support(corners, p);
  Support sq = positive_support(corners, q);
  const int ns = static_cast<int>(sp.atoms.rows());
  const int nt = static_cast<int>(sq.atoms.rows());
  std::vector<double> cost(static_cast<std::size_t>(ns * nt));
  for (int i = 0; i < ns; ++i) {
    for (int j = 0; j < nt; ++j) {
      cost[static_cast<std::size_t>(i * nt + j)] =
          (sp.atoms.row(i) - sq.atoms.row(j)).squaredNorm();
    }
  }
  return solve_transport(cost, ns, nt, sp.weights, sq.weights).cost;
}

double kl_atoms(const Eigen::MatrixXd& p_atoms, const Eigen::VectorXd& p_weights,
                const Eigen::MatrixXd& q_atoms,
                const Eigen::VectorXd& q_weights) {
  if (p_atoms.cols() != q_atoms.cols()) {
    throw std::invalid_argument("atom dimensions differ");
  }
  std::unordered_map<std::string, double> q_mass;
  q_mass.reserve(static_cast<std::size_t>(q_atoms.rows()) * 2);
  for (Eigen::Index r = 0; r < q_atoms.rows(); ++r) {
    if (q_weights[r] > 0.0) q_mass[atom_key(q_atoms, r)] += q_weights[r];
  }
  std::unordered_map<std::string, double> p_mass;
  p_mass.reserve(static_cast<std::size_t>(p_atoms.rows()) * 2);
  for (Eigen::Index r = 0; r < p_atoms.rows(); ++r) {
    if (p_weights[r] > 0.0) p_mass[atom_key(p_atoms, r)] += p_weights[r];
  }
  double kl = 0.0;
  for (const auto& [key, pw] : p_mass) {
    auto it = q_mass.find(key);
    if (it == q_mass.end()) return kInf;
    kl += pw * std::log(pw / it->second);
  }
  return std::max(0.0, kl);
}

double kl_sy(const Eigen::Vector4d& p, const Eigen::Vector4d& q,
             bool smoothed) {
  Eigen::Vector4d ps = p;
  Eigen::Vector4d qs = q;
  if (smoothed) {
    ps = (ps.array() + 0.125).matrix();
    qs = (qs.array() + 0.125).matrix();
    ps /= ps.sum();
    qs /= qs.sum();
  }
  double kl = 0.0;
  for (int b = 0; b < 4; ++b) {
    if (ps[b] <= 0.0) continue;
    if (qs[b] <= 0.0) return kInf;
    kl += ps[b] * std::log(ps[b] / qs[b]);
  }
  return std::max(0.0, kl);
}

double median_pairwise_distance(const Eigen::MatrixXd& pooled) {
  const Eigen::Index n = pooled.rows();
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      dist.push_back((pooled.row(i) - pooled.row(j)).norm());
    }
  }
  if (dist.empty()) return 1.0;
  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid),
                   dist.end());
  const double med = dist[mid];
  return med > 0.0 ? med : 1.0;  // all-identical pooled points
}

double gaussian_kernel_sum(const Eigen::MatrixXd& a, const Eigen::VectorXd& wa,
                           const Eigen::MatrixXd& b, const Eigen::VectorXd& wb,
                           double sigma) {
  const double inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
  const Eigen::VectorXd a_sq = a.rowwise().squaredNorm();
  const Eigen::VectorXd b_sq = b.rowwise().squaredNorm();
  double total = 0.0;
  Eigen::VectorXd row(b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    row = ((b_sq.array() + a_sq[i] - 2.0 * (b * a.row(i).transpose()).array())
               .max(0.0) *
           (-inv_two_sigma_sq))
              .exp();
    total += wa[i] * row.dot(wb);
  }
  return total;
}

double mmd2(const Eigen::MatrixXd& p_atoms, const Eigen::VectorXd& p_weights,
            const Eigen::MatrixXd& q_atoms, const Eigen::VectorXd& q_weights,
            const KernelSpec& kernel) {
  if (p_atoms.rows() == 0 || q_atoms.rows() == 0) {
    throw std::invalid_argument("empty sample");
  }
  if (p_atoms.cols() != q_atoms.cols()) {
    throw std::invalid_argument("atom dimensions differ");
  }
  const Eigen::VectorXd pw = p_weights / p_weights.sum();
  const Eigen::VectorXd qw = q_weights / q_weights.sum();
  double sigma = kernel.bandwidth;
  if (kernel.use_median()) {
    Eigen::MatrixXd pooled(p_atoms.rows() + q_atoms.rows(), p_atoms.cols());
    pooled << p_atoms, q_atoms;
    sigma = median_pairwise_distance(pooled);
  }
  const double pp = gaussian_kernel_sum(p_atoms, pw, p_atoms, pw, sigma);
  const double qq = gaussian_kernel_sum(q_atoms, qw, q_atoms, qw, sigma);
  const double pq = gaussian_kernel_sum(p_atoms, pw, q_atoms, qw, sigma);
  return std::max(0.0, pp + qq - 2.0 * pq);
}

KsResult ks_two_sample(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  const Eigen::Index n = u.size();
  const Eigen::Index m = v.size();
  if (n == 0 || m == 0) throw std::invalid_argument("empty sample");
  std::vector<double> us(u.data(), u.data() + n);
  std::vector<double> vs(v.data(), v.data() + m);
  std::sort(us.begin(), us.end());
  std::sort(vs.begin(), vs.end());

  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < us.size() && j < vs.size()) {
    const double x = std::min(us[i], vs[j]);
    while (i < us.size() && us[i] <= x) ++i;
    while (j < vs.size() && vs[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / static_cast<double>(n) -
                             static_cast<double>(j) / static_cast<double>(m)));
  }

  const double ne = static_cast<double>(n) * static_cast<double>(m) /
                    static_cast<double>(n + m);
  KsResult r;
  r.statistic = d;
  r.p_value = kolmogorov_sf(std::sqrt(ne) * d);
  return r;
}

Standardizer Standardizer::fit(const Dataset& reference) {
  Standardizer s;
  const double n = static_cast<double>(reference.rows());
  s.mean = reference.X.colwise().mean();
  Eigen::VectorXd var =
      (reference.X.rowwise() - s.mean.transpose()).colwise().squaredNorm() / n;
  s.scale = var.array().sqrt();
  for (Eigen::Index c = 0; c < s.scale.size(); ++c) {
    if (s.scale[c] <= 0.0) s.scale[c] = 1.0;
  }
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  return (x.rowwise() - mean.transpose()).array().rowwise() /
         scale.transpose().array();
}

Eigen::MatrixXd embed_records(const Dataset& data, const Standardizer& std) {
  Eigen::MatrixXd out(data.rows(), data.dim() + 2);
  out.leftCols(data.dim()) = std.apply(data.X);
  out.col(data.dim()) = data.S.cast<double>();
  out.col(data.dim() + 1) = data.Yhat.cast<double>();
  return out;
}

Eigen::Vector4d sy_histogram(const Dataset& data) {
  Eigen::Vector4d h = Eigen::Vector4d::Zero();
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    h[2 * data.S[i] + data.Yhat[i]] += 1.0;
  }
  return h / static_cast<double>(data.rows());
}

Eigen::Vector4d sy_histogram(const WeightedDistribution& dist) {
  Eigen::Vector4d h = Eigen::Vector4d::Zero();
  for (Eigen::Index i = 0; i < dist.base.rows(); ++i) {
    h[2 * dist.base.S[i] + dist.base.Yhat[i]] += dist.weights[i];
  }
  return h / h.sum();
}

Eigen::Vector4d sy_histogram(const Distribution& dist) {
  if (const auto* d = std::get_if<Dataset>(&dist)) return sy_histogram(*d);
  return sy_histogram(std::get<WeightedDistribution>(dist));
}

}  // namespace fairaudit
