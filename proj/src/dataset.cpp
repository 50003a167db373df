#include "fairaudit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fairaudit {

namespace {

void check_binary(const Eigen::VectorXi& v, const char* name) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] != 0 && v[i] != 1) {
      throw std::invalid_argument(std::string(name) + " must be binary, row " +
                                  std::to_string(i) + " holds " +
                                  std::to_string(v[i]));
    }
  }
}

}  // namespace

void Dataset::validate() const {
  const Eigen::Index n = S.size();
  if (X.rows() != n || Yhat.size() != n) {
    throw std::invalid_argument("dataset columns disagree on row count");
  }
  if (logits && logits->size() != n) {
    throw std::invalid_argument("logit column length mismatch");
  }
  if (Y && Y->size() != n) {
    throw std::invalid_argument("Y column length mismatch");
  }
  if (!feature_names.empty() &&
      static_cast<Eigen::Index>(feature_names.size()) != X.cols()) {
    throw std::invalid_argument("feature name count != covariate count");
  }
  check_binary(S, "S");
  check_binary(Yhat, "Yhat");
  if (Y) check_binary(*Y, "Y");
  if (logits) {
    for (Eigen::Index i = 0; i < logits->size(); ++i) {
      const double v = (*logits)[i];
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("logit outside [0,1] at row " +
                                    std::to_string(i));
      }
    }
  }
}

void WeightedDistribution::validate() const {
  base.validate();
  if (weights.size() != base.rows()) {
    throw std::invalid_argument("weight vector length != atom count");
  }
  if ((weights.array() < 0.0).any()) {
    throw std::invalid_argument("negative weight");
  }
  if (std::abs(weights.sum() - 1.0) > 1e-10) {
    throw std::invalid_argument("weights do not sum to 1");
  }
}

const Dataset& base_of(const Distribution& dist) {
  if (const auto* d = std::get_if<Dataset>(&dist)) return *d;
  return std::get<WeightedDistribution>(dist).base;
}

bool is_weighted(const Distribution& dist) {
  return std::holds_alternative<WeightedDistribution>(dist);
}

GroupCounts group_counts(const Dataset& data) {
  if (data.rows() == 0) throw std::invalid_argument("empty dataset");
  GroupCounts c;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    if (data.S[i] == 0) {
      c.n0 += 1;
      c.lambda0 += data.Yhat[i];
    } else {
      c.n1 += 1;
      c.lambda1 += data.Yhat[i];
    }
  }
  return c;
}

GroupCounts group_counts(const WeightedDistribution& dist) {
  const Eigen::Index n = dist.base.rows();
  if (n == 0) throw std::invalid_argument("empty distribution");
  GroupCounts c;
  // Masses are scaled by n so the uniform case reproduces plain counts.
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = dist.weights[i] * static_cast<double>(n);
    if (dist.base.S[i] == 0) {
      c.n0 += m;
      c.lambda0 += m * dist.base.Yhat[i];
    } else {
      c.n1 += m;
      c.lambda1 += m * dist.base.Yhat[i];
    }
  }
  return c;
}

GroupCounts group_counts(const Distribution& dist) {
  if (const auto* d = std::get_if<Dataset>(&dist)) return group_counts(*d);
  return group_counts(std::get<WeightedDistribution>(dist));
}

double disparate_impact(const GroupCounts& c) {
  if (c.n0 <= 0.0 || c.n1 <= 0.0) {
    throw std::domain_error("DI undefined: empty group");
  }
  if (c.lambda1 == 0.0) {
    return c.lambda0 == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  }
  return (c.lambda0 / c.n0) / (c.lambda1 / c.n1);
}

double disparate_impact(const Dataset& data) {
  return disparate_impact(group_counts(data));
}

double disparate_impact(const Distribution& dist) {
  return disparate_impact(group_counts(dist));
}

Dataset take_rows(const Dataset& data, const std::vector<int>& idx) {
  Dataset out;
  const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
  out.X.resize(m, data.X.cols());
  out.S.resize(m);
  out.Yhat.resize(m);
  if (data.logits) out.logits = Eigen::VectorXd(m);
  if (data.Y) out.Y = Eigen::VectorXi(m);
  out.feature_names = data.feature_names;
  for (Eigen::Index r = 0; r < m; ++r) {
    const int i = idx[static_cast<std::size_t>(r)];
    out.X.row(r) = data.X.row(i);
    out.S[r] = data.S[i];
    out.Yhat[r] = data.Yhat[i];
    if (data.logits) (*out.logits)[r] = (*data.logits)[i];
    if (data.Y) (*out.Y)[r] = (*data.Y)[i];
  }
  return out;
}

namespace {

bool weights_uniform(const Eigen::VectorXd& w) {
  const double u = 1.0 / static_cast<double>(w.size());
  return (w.array() - u).abs().maxCoeff() <= 1e-12;
}

std::vector<int> draw_without_replacement(Eigen::Index n, Eigen::Index m,
                                          std::mt19937_64& rng) {
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  // Partial Fisher-Yates: only the first m slots are needed.
  for (Eigen::Index i = 0; i < m; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
    std::swap(pool[static_cast<std::size_t>(i)],
              pool[static_cast<std::size_t>(pick(rng))]);
  }
  pool.resize(static_cast<std::size_t>(m));
  return pool;
}

}  // namespace

Dataset sample_fraction(const WeightedDistribution& dist, double fraction,
                        std::mt19937_64& rng, bool with_replacement) {
  const Eigen::Index n = dist.base.rows();
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("fraction must lie in (0,1]");
  }
  const Eigen::Index m = static_cast<Eigen::Index>(
      std::llround(fraction * static_cast<double>(n)));
  if (m < 1) throw std::invalid_argument("fraction*n < 1");

  std::vector<int> idx;
  if (with_replacement) {
    std::discrete_distribution<int> draw(dist.weights.data(),
                                         dist.weights.data() + n);
    idx.reserve(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) idx.push_back(draw(rng));
  } else {
    if (!weights_uniform(dist.weights)) {
      throw std::invalid_argument(
          "sampling without replacement requires uniform weights");
    }
    idx = draw_without_replacement(n, m, rng);
  }
  return take_rows(dist.base, idx);
}

Dataset sample_fraction(const Dataset& data, double fraction,
                        std::mt19937_64& rng, bool with_replacement) {
  return sample_fraction(uniform_weights(data), fraction, rng,
                         with_replacement);
}

WeightedDistribution uniform_weights(const Dataset& data) {
  WeightedDistribution d;
  d.base = data;
  d.weights = Eigen::VectorXd::Constant(
      data.rows(), 1.0 / static_cast<double>(data.rows()));
  return d;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  // splitmix64 finalizer over the combined word
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace fairaudit
