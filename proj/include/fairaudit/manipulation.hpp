#pragma once

#include "fairaudit/dataset.hpp"

#include <string>
#include <vector>

namespace fairaudit {

/// One applied rewrite, enough to audit the trail afterwards.
struct MoveRecord {
  int row = -1;             // rewritten row (bin-level moves log the chosen row)
  std::string move;         // e.g. "(0,0)->(1,0)" or "copy 17 -> 4"
  double di_before = 0.0;
  double di_after = 0.0;
  double displacement = 0.0;  // L2 record displacement of this move
};

/// Outcome of a fair-washing method: the manipulated distribution, the DI it
/// reaches, and the ordered move log.
struct ManipulationResult {
  std::string method;
  Distribution output;
  double achieved_di = 0.0;
  std::vector<MoveRecord> moves;

  // Dual information for the gradient projection; empty for other methods.
  Eigen::VectorXd lambda_star;
  Eigen::VectorXd rate_targets;   // integer-attainable group rate targets
  Eigen::VectorXd rate_achieved;
};

void save_move_log_csv(const std::string& path,
                       const std::vector<MoveRecord>& moves);

}  // namespace fairaudit
