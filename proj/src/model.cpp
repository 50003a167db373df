#include "fairaudit/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace fairaudit {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

Classifier::Classifier(std::vector<int> layer_widths, double threshold,
                       std::mt19937_64& rng)
    : widths_(std::move(layer_widths)), threshold_(threshold) {
  if (widths_.size() < 2 || widths_.back() != 1) {
    throw std::invalid_argument("layer widths must end with a single output");
  }
  if (!(threshold_ > 0.0 && threshold_ < 1.0)) {
    throw std::invalid_argument("threshold must lie in (0,1)");
  }
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const int in = widths_[l];
    const int out = widths_[l + 1];
    const double r = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> init(-r, r);
    Eigen::MatrixXd w(out, in);
    for (int i = 0; i < out; ++i) {
      for (int j = 0; j < in; ++j) w(i, j) = init(rng);
    }
    w_.push_back(std::move(w));
    b_.push_back(Eigen::VectorXd::Zero(out));
  }
}

void Classifier::set_threshold(double t) {
  if (!(t > 0.0 && t < 1.0)) {
    throw std::invalid_argument("threshold must lie in (0,1)");
  }
  threshold_ = t;
}

Eigen::VectorXd Classifier::predict_logits(const Eigen::MatrixXd& x) const {
  if (x.cols() != input_dim()) {
    throw std::invalid_argument("input dimension mismatch: got " +
                                std::to_string(x.cols()) + ", model expects " +
                                std::to_string(input_dim()));
  }
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    Eigen::MatrixXd z =
        (a * w_[l].transpose()).rowwise() + b_[l].transpose();
    if (l + 1 < w_.size()) {
      a = z.cwiseMax(0.0);
    } else {
      a = (1.0 + (-z.array()).exp()).inverse().matrix();
    }
  }
  return a.col(0);
}

Eigen::VectorXi Classifier::predict_labels(const Eigen::MatrixXd& x) const {
  const Eigen::VectorXd p = predict_logits(x);
  Eigen::VectorXi out(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) out[i] = p[i] > threshold_ ? 1 : 0;
  return out;
}

Eigen::VectorXd Classifier::grad_input(const Eigen::VectorXd& x) const {
  if (x.size() != input_dim()) {
    throw std::invalid_argument("input dimension mismatch");
  }
  std::vector<Eigen::VectorXd> pre;  // pre-activations per layer
  Eigen::VectorXd a = x;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    pre.push_back(w_[l] * a + b_[l]);
    if (l + 1 < w_.size()) {
      a = pre.back().cwiseMax(0.0);
    }
  }
  const double p = sigmoid(pre.back()[0]);
  Eigen::VectorXd delta = Eigen::VectorXd::Constant(1, p * (1.0 - p));
  for (std::size_t l = w_.size(); l-- > 0;) {
    Eigen::VectorXd g = w_[l].transpose() * delta;
    if (l == 0) return g;
    delta = g.cwiseProduct(
        (pre[l - 1].array() > 0.0).cast<double>().matrix());
  }
  return Eigen::VectorXd::Zero(input_dim());
}

Classifier fit(const Dataset& train, const MlpConfig& config,
               std::mt19937_64& rng, FitReport* report) {
  if (!train.Y) throw std::invalid_argument("training data lacks Y labels");
  const Eigen::Index n = train.rows();
  const int d = static_cast<int>(train.dim());

  std::vector<int> widths;
  widths.push_back(d);
  for (int h : config.hidden) widths.push_back(h);
  widths.push_back(1);
  Classifier model(widths, 0.5, rng);

  const Eigen::VectorXd y = train.Y->cast<double>();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  const int batch = std::max(1, config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index stop = std::min<Eigen::Index>(start + batch, n);
      const Eigen::Index m = stop - start;
      Eigen::MatrixXd xb(m, d);
      Eigen::VectorXd yb(m);
      for (Eigen::Index r = 0; r < m; ++r) {
        const int i = order[static_cast<std::size_t>(start + r)];
        xb.row(r) = train.X.row(i);
        yb[r] = y[i];
      }

      // Forward pass keeping activations for backprop.
      std::vector<Eigen::MatrixXd> acts = {xb};
      std::vector<Eigen::MatrixXd> pre;
      for (std::size_t l = 0; l < model.w_.size(); ++l) {
        pre.push_back((acts.back() * model.w_[l].transpose()).rowwise() +
                      model.b_[l].transpose());
        if (l + 1 < model.w_.size()) {
          acts.push_back(pre.back().cwiseMax(0.0));
        } else {
          acts.push_back(
              (1.0 + (-pre.back().array()).exp()).inverse().matrix());
        }
      }

      // Cross-entropy with sigmoid output: output delta is (p - y)/m.
      Eigen::MatrixXd delta =
          (acts.back().col(0) - yb).matrix() / static_cast<double>(m);
      for (std::size_t l = model.w_.size(); l-- > 0;) {
        const Eigen::MatrixXd grad_w = delta.transpose() * acts[l];
        const Eigen::VectorXd grad_b = delta.colwise().sum().transpose();
        if (l > 0) {
          delta = (delta * model.w_[l]).cwiseProduct(
              (pre[l - 1].array() > 0.0).cast<double>().matrix());
        }
        model.w_[l] -= config.learning_rate * grad_w;
        model.b_[l] -= config.learning_rate * grad_b;
      }
    }
  }

  const Eigen::VectorXd p = model.predict_logits(train.X);
  double loss = 0.0;
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pi = std::clamp(p[i], 1e-12, 1.0 - 1e-12);
    loss -= y[i] * std::log(pi) + (1.0 - y[i]) * std::log(1.0 - pi);
    correct += ((p[i] > 0.5 ? 1.0 : 0.0) == y[i]) ? 1 : 0;
  }
  loss /= static_cast<double>(n);
  if (!std::isfinite(loss)) {
    throw std::runtime_error(
        "training diverged: non-finite loss after " +
        std::to_string(config.epochs) + " epochs (learning_rate=" +
        std::to_string(config.learning_rate) + ")");
  }
  if (report) {
    report->final_loss = loss;
    report->accuracy = static_cast<double>(correct) / static_cast<double>(n);
  }
  return model;
}

double select_threshold(const Eigen::VectorXd& logits, const Eigen::VectorXi& y) {
  const Eigen::Index n = logits.size();
  if (n == 0 || y.size() != n) {
    throw std::invalid_argument("threshold selection needs matched inputs");
  }
  std::vector<double> uniq(logits.data(), logits.data() + n);
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

  std::vector<double> candidates = {0.0, 1.0};
  for (std::size_t i = 0; i + 1 < uniq.size(); ++i) {
    candidates.push_back(0.5 * (uniq[i] + uniq[i + 1]));
  }
  std::sort(candidates.begin(), candidates.end());

  const double target = y.cast<double>().mean();
  double best_l = candidates.front();
  double best_gap = std::numeric_limits<double>::infinity();
  for (double l : candidates) {
    const double rate =
        (logits.array() > l).cast<double>().mean();
    const double gap = std::abs(rate - target);
    if (gap < best_gap - 1e-15) {
      best_gap = gap;
      best_l = l;
    }
  }
  return best_l;
}

namespace {
constexpr const char* kModelMagic = "fairaudit-mlp";
constexpr int kModelVersion = 1;
}  // namespace

void Classifier::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write model file: " + path);
  os.precision(17);
  os << kModelMagic << ' ' << kModelVersion << '\n';
  os << widths_.size();
  for (int w : widths_) os << ' ' << w;
  os << '\n' << threshold_ << '\n';
  for (std::size_t l = 0; l < w_.size(); ++l) {
    for (Eigen::Index i = 0; i < w_[l].rows(); ++i) {
      for (Eigen::Index j = 0; j < w_[l].cols(); ++j) os << w_[l](i, j) << ' ';
    }
    for (Eigen::Index i = 0; i < b_[l].size(); ++i) os << b_[l][i] << ' ';
    os << '\n';
  }
}

Classifier Classifier::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open model file: " + path);
  std::string magic;
  int version = 0;
  is >> magic >> version;
  if (magic != kModelMagic || version != kModelVersion) {
    throw std::runtime_error("unrecognized model file header in " + path);
  }
  std::size_t layers = 0;
  is >> layers;
  Classifier model;
  model.widths_.resize(layers);
  for (auto& w : model.widths_) is >> w;
  is >> model.threshold_;
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    Eigen::MatrixXd w(model.widths_[l + 1], model.widths_[l]);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) is >> w(i, j);
    }
    Eigen::VectorXd b(model.widths_[l + 1]);
    for (Eigen::Index i = 0; i < b.size(); ++i) is >> b[i];
    model.w_.push_back(std::move(w));
    model.b_.push_back(std::move(b));
  }
  if (!is) throw std::runtime_error("truncated model file: " + path);
  return model;
}

}  // namespace fairaudit
