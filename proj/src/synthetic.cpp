#include "fairaudit/synthetic.hpp"

#include <stdexcept>

namespace fairaudit {

Dataset gen_synthetic(const SyntheticSpec& spec, std::mt19937_64& rng) {
  if (spec.n < 1 || spec.dim < 1) {
    throw std::invalid_argument("synthetic spec needs n >= 1, dim >= 1");
  }
  for (double p : {spec.p_s, spec.p0, spec.p1}) {
    if (!(p > 0.0 && p < 1.0)) {
      throw std::invalid_argument("synthetic probabilities must lie in (0,1)");
    }
  }

  std::bernoulli_distribution draw_s(spec.p_s);
  std::bernoulli_distribution noise(spec.label_noise);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Dataset out;
  out.X.resize(spec.n, spec.dim);
  out.S.resize(spec.n);
  out.Yhat.resize(spec.n);
  out.Y = Eigen::VectorXi(spec.n);
  for (int c = 0; c < spec.dim; ++c) {
    out.feature_names.push_back("x" + std::to_string(c));
  }

  const double half = spec.cube_side / 2.0;
  for (int i = 0; i < spec.n; ++i) {
    const int s = draw_s(rng) ? 1 : 0;
    const double rate = s == 0 ? spec.p0 : spec.p1;
    const int yhat = std::bernoulli_distribution(rate)(rng) ? 1 : 0;
    out.S[i] = s;
    out.Yhat[i] = yhat;
    (*out.Y)[i] = (spec.label_noise > 0.0 && noise(rng)) ? 1 - yhat : yhat;
    for (int c = 0; c < spec.dim; ++c) {
      double mean = 0.0;
      if (c == 0) mean = s == 1 ? half : -half;
      if (c == 1) mean = yhat == 1 ? half : -half;
      out.X(i, c) = mean + gauss(rng);
    }
  }
  return out;
}

}  // namespace fairaudit
