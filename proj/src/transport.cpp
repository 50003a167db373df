#include "fairaudit/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fairaudit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Bipartite transportation network simplex.
//
// Nodes 0..ns-1 are sources, ns..ns+nt-1 sinks, ns+nt the artificial root.
// Real arc a = i*nt + j runs from source i to sink ns+j with cost C[a];
// artificial arcs connect every node to the root. The basis is a spanning
// tree stored with parent pointers plus children lists; potentials and
// depths are recomputed on the re-rooted subtree after each pivot, directly
// from arc costs, so they never accumulate drift.
class NetworkSimplex {
 public:
  NetworkSimplex(const std::vector<double>& cost, int ns, int nt,
                 const Eigen::VectorXd& supply, const Eigen::VectorXd& demand)
      : cost_(cost), ns_(ns), nt_(nt), n_arcs_(static_cast<std::int64_t>(ns) * nt) {
    const int nodes = ns_ + nt_ + 1;
    root_ = ns_ + nt_;
    parent_.assign(nodes, -1);
    pred_arc_.assign(nodes, -1);
    up_.assign(nodes, true);
    flow_.assign(nodes, 0.0);
    pi_.assign(nodes, 0.0);
    depth_.assign(nodes, 0);
    children_.assign(nodes, {});

    double max_abs = 0.0;
    for (double c : cost_) max_abs = std::max(max_abs, std::abs(c));
    eps_ = 1e-12 * (1.0 + max_abs);
    const double art_cost = (max_abs + 1.0) * nodes;

    // All-artificial strongly feasible initial basis: supply nodes point up
    // to the root, demand nodes hang below it.
    for (int u = 0; u < ns_ + nt_; ++u) {
      const double b = u < ns_ ? supply[u] : -demand[u - ns_];
      parent_[u] = root_;
      pred_arc_[u] = static_cast<std::int64_t>(n_arcs_) + u;
      children_[root_].push_back(u);
      depth_[u] = 1;
      if (b >= 0.0) {
        up_[u] = true;
        flow_[u] = b;
        pi_[u] = 0.0;
      } else {
        up_[u] = false;
        flow_[u] = -b;
        pi_[u] = art_cost;
      }
      art_cost_.push_back(b >= 0.0 ? 0.0 : art_cost);
    }
  }

  void run() {
    const std::int64_t block =
        std::max<std::int64_t>(64, static_cast<std::int64_t>(
                                       std::sqrt(static_cast<double>(n_arcs_))));
    std::int64_t cursor = 0;
    const std::int64_t max_pivots =
        20000000LL + 200LL * static_cast<std::int64_t>(ns_ + nt_);
    std::int64_t pivots = 0;
    while (true) {
      const std::int64_t entering = find_entering(cursor, block);
      if (entering < 0) break;
      pivot(entering);
      if (++pivots > max_pivots) {
        throw std::runtime_error("transport solver exceeded pivot limit");
      }
    }
  }

  TransportPlan extract_plan() const {
    TransportPlan plan;
    for (int u = 0; u < ns_ + nt_; ++u) {
      const std::int64_t a = pred_arc_[u];
      if (a >= n_arcs_) {
        if (flow_[u] > 1e-9) {
          throw std::runtime_error(
              "transport infeasible: unbalanced masses remain");
        }
        continue;
      }
      if (flow_[u] <= 0.0) continue;
      const int i = static_cast<int>(a / nt_);
      const int j = static_cast<int>(a % nt_);
      plan.source.push_back(i);
      plan.target.push_back(j);
      plan.mass.push_back(flow_[u]);
      plan.cost += flow_[u] * cost_[static_cast<std::size_t>(a)];
    }
    return plan;
  }

 private:
  double arc_cost(std::int64_t a) const {
    return a < n_arcs_ ? cost_[static_cast<std::size_t>(a)]
                       : art_cost_[static_cast<std::size_t>(a - n_arcs_)];
  }

  // Reduced cost of real arc i -> sink j.
  double reduced_cost(std::int64_t a) const {
    const int i = static_cast<int>(a / nt_);
    const int j = static_cast<int>(a % nt_);
    return cost_[static_cast<std::size_t>(a)] + pi_[i] - pi_[ns_ + j];
  }

  // Block search: best eligible arc within the first block that has one.
  std::int64_t find_entering(std::int64_t& cursor, std::int64_t block) {
    std::int64_t scanned = 0;
    while (scanned < n_arcs_) {
      std::int64_t best = -1;
      double best_rc = -eps_;
      for (std::int64_t k = 0; k < block && scanned < n_arcs_; ++k, ++scanned) {
        const std::int64_t a = cursor;
        const int i = static_cast<int>(a / nt_);
        const int j = static_cast<int>(a % nt_);
        const double rc =
            cost_[static_cast<std::size_t>(a)] + pi_[i] - pi_[ns_ + j];
        if (rc < best_rc && pred_arc_[i] != a && pred_arc_[ns_ + j] != a) {
          best_rc = rc;
          best = a;
        }
        if (++cursor == n_arcs_) cursor = 0;
      }
      if (best >= 0) return best;
    }
    return -1;
  }

  int join_of(int u, int v) const {
    while (u != v) {
      if (depth_[u] >= depth_[v]) {
        u = parent_[u];
      } else {
        v = parent_[v];
      }
    }
    return u;
  }

  void pivot(std::int64_t entering) {
    const int src = static_cast<int>(entering / nt_);
    const int dst = ns_ + static_cast<int>(entering % nt_);
    const int join = join_of(src, dst);

    // Leaving arc: minimum residual around the cycle. Strict inequality on
    // the source branch and ties-to-last on the target branch keep the
    // basis strongly feasible (no cycling under degeneracy).
    double delta = kInf;
    int out_node = -1;
    bool out_on_src_branch = true;
    for (int u = src; u != join; u = parent_[u]) {
      const double d = up_[u] ? flow_[u] : kInf;
      if (d < delta) {
        delta = d;
        out_node = u;
        out_on_src_branch = true;
      }
    }
    for (int u = dst; u != join; u = parent_[u]) {
      const double d = up_[u] ? kInf : flow_[u];
      if (d <= delta) {
        delta = d;
        out_node = u;
        out_on_src_branch = false;
      }
    }
    if (out_node < 0) {
      throw std::runtime_error("transport solver: unbounded pivot cycle");
    }

    // Push delta around the cycle.
    if (delta > 0.0) {
      for (int u = src; u != join; u = parent_[u]) {
        flow_[u] += up_[u] ? -delta : delta;
      }
      for (int u = dst; u != join; u = parent_[u]) {
        flow_[u] += up_[u] ? delta : -delta;
      }
    }

    // Re-root the detached subtree at the entering arc's endpoint inside it.
    const int sub_anchor = out_on_src_branch ? src : dst;
    const int attach_to = out_on_src_branch ? dst : src;
    detach(out_node);
    reverse_path(sub_anchor, out_node);
    parent_[sub_anchor] = attach_to;
    pred_arc_[sub_anchor] = entering;
    up_[sub_anchor] = (sub_anchor == src);
    flow_[sub_anchor] = delta;
    children_[attach_to].push_back(sub_anchor);
    refresh_subtree(sub_anchor);
  }

  void detach(int child) {
    auto& sib = children_[parent_[child]];
    sib.erase(std::find(sib.begin(), sib.end(), child));
  }

  // Reverses parent pointers along anchor -> ... -> top, so the subtree that
  // `top` used to head becomes rooted at `anchor`.
  void reverse_path(int anchor, int top) {
    int child = anchor;
    int node = parent_[child];
    std::int64_t carry_arc = pred_arc_[child];
    bool carry_up = up_[child];
    double carry_flow = flow_[child];
    while (child != top) {
      const int next = parent_[node];
      const std::int64_t next_arc = pred_arc_[node];
      const bool next_up = up_[node];
      const double next_flow = flow_[node];
      detach_edge(node, child);
      parent_[node] = child;
      pred_arc_[node] = carry_arc;
      up_[node] = !carry_up;
      flow_[node] = carry_flow;
      children_[child].push_back(node);
      child = node;
      node = next;
      carry_arc = next_arc;
      carry_up = next_up;
      carry_flow = next_flow;
    }
  }

  void detach_edge(int parent, int child) {
    auto& sib = children_[parent];
    sib.erase(std::find(sib.begin(), sib.end(), child));
  }

  // Recomputes depth and potential below `start` from its (already correct)
  // parent, walking with an explicit stack.
  void refresh_subtree(int start) {
    stack_.clear();
    stack_.push_back(start);
    while (!stack_.empty()) {
      const int u = stack_.back();
      stack_.pop_back();
      const int p = parent_[u];
      depth_[u] = depth_[p] + 1;
      const double c = arc_cost(pred_arc_[u]);
      pi_[u] = up_[u] ? pi_[p] - c : pi_[p] + c;
      for (int w : children_[u]) stack_.push_back(w);
    }
  }

  const std::vector<double>& cost_;
  std::vector<double> art_cost_;
  int ns_, nt_, root_;
  std::int64_t n_arcs_;
  double eps_ = 0.0;

  std::vector<int> parent_;
  std::vector<std::int64_t> pred_arc_;
  std::vector<bool> up_;  // pred arc directed child -> parent
  std::vector<double> flow_;
  std::vector<double> pi_;
  std::vector<int> depth_;
  std::vector<std::vector<int>> children_;
  std::vector<int> stack_;
};

}  // namespace

TransportPlan solve_transport(const std::vector<double>& cost_row_major,
                              int ns, int nt, const Eigen::VectorXd& supply,
                              const Eigen::VectorXd& demand) {
  if (ns <= 0 || nt <= 0) {
    throw std::invalid_argument("transport requires nonempty marginals");
  }
  if (supply.size() != ns || demand.size() != nt ||
      static_cast<std::int64_t>(cost_row_major.size()) !=
          static_cast<std::int64_t>(ns) * nt) {
    throw std::invalid_argument("transport input sizes disagree");
  }
  if ((supply.array() <= 0.0).any() || (demand.array() <= 0.0).any()) {
    throw std::invalid_argument("transport masses must be positive");
  }
  const double total_s = supply.sum();
  const double total_d = demand.sum();
  if (std::abs(total_s - total_d) > 1e-8 * std::max(total_s, total_d)) {
    throw std::invalid_argument("transport marginals have unequal mass");
  }

  NetworkSimplex simplex(cost_row_major, ns, nt, supply / total_s,
                         demand / total_d);
  simplex.run();
  TransportPlan plan = simplex.extract_plan();
  for (double& m : plan.mass) m *= total_s;
  plan.cost *= total_s;
  return plan;
}

}  // namespace fairaudit
