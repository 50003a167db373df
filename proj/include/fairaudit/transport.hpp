#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace fairaudit {

/// Sparse optimal coupling between two sets of weighted atoms.
/// Entries reference atom indices of the inputs that produced it.
struct TransportPlan {
  std::vector<int> source;
  std::vector<int> target;
  std::vector<double> mass;
  double cost = 0.0;  // total cost under the plan
};

/// Exact minimum-cost transport between supply and demand masses over a
/// dense bipartite cost array (row-major, ns x nt). Supplies and demands
/// must be positive and sum to the same total.
///
/// Primal network simplex with block pivoting; the leaving-arc rule keeps
/// the basis strongly feasible, so the iteration cannot cycle.
TransportPlan solve_transport(const std::vector<double>& cost_row_major,
                              int ns, int nt,
                              const Eigen::VectorXd& supply,
                              const Eigen::VectorXd& demand);

}  // namespace fairaudit
