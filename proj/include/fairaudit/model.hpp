#pragma once

#include "fairaudit/dataset.hpp"

#include <Eigen/Dense>

#include <random>
#include <string>
#include <vector>

namespace fairaudit {

/// Training hyperparameters for the in-repo classifier. Architecture is
/// configuration, not contract.
struct MlpConfig {
  std::vector<int> hidden = {8};  // widths of ReLU hidden layers
  int epochs = 60;
  double learning_rate = 0.05;
  int batch_size = 64;
};

struct FitReport {
  double final_loss = 0.0;
  double accuracy = 0.0;
};

/// Feed-forward network with ReLU hidden layers and a sigmoid output,
/// exposing logits in (0,1), hard decisions at a logit threshold, and exact
/// reverse-mode input gradients. Immutable once fitted.
class Classifier {
 public:
  Classifier() = default;
  Classifier(std::vector<int> layer_widths, double threshold,
             std::mt19937_64& rng);

  /// Sigmoid outputs, one per row of x.
  Eigen::VectorXd predict_logits(const Eigen::MatrixXd& x) const;

  /// Yhat_i = 1 iff logit_i > threshold().
  Eigen::VectorXi predict_labels(const Eigen::MatrixXd& x) const;

  /// d f(x) / d x for a single input, via backpropagation. ReLU kinks use
  /// subgradient 0.
  Eigen::VectorXd grad_input(const Eigen::VectorXd& x) const;

  int input_dim() const { return widths_.empty() ? 0 : widths_.front(); }
  double threshold() const { return threshold_; }
  void set_threshold(double t);
  const std::vector<int>& layer_widths() const { return widths_; }

  /// Versioned flat file: architecture header followed by weight arrays.
  void save(const std::string& path) const;
  static Classifier load(const std::string& path);

  friend Classifier fit(const Dataset&, const MlpConfig&, std::mt19937_64&,
                        FitReport*);

 private:
  std::vector<int> widths_;             // input, hidden..., 1
  std::vector<Eigen::MatrixXd> w_;      // layer weights, out x in
  std::vector<Eigen::VectorXd> b_;      // layer biases
  double threshold_ = 0.5;
};

/// Minibatch SGD on binary cross-entropy against Y. Deterministic for a
/// fixed seed; throws on non-finite loss with diagnostics.
Classifier fit(const Dataset& train, const MlpConfig& config,
               std::mt19937_64& rng, FitReport* report = nullptr);

/// Threshold matching the predicted positive rate to mean(Y): candidates
/// are midpoints of consecutive sorted unique logits plus the {0,1}
/// endpoints; ties resolve to the smaller threshold.
double select_threshold(const Eigen::VectorXd& logits, const Eigen::VectorXi& y);

}  // namespace fairaudit
