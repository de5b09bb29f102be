#pragma once

#include <span>
#include <vector>

#include "roadwork/network.hpp"

namespace roadwork {

/// Per-link flow indexed by link id over the network's id space. Closed links
/// carry 0 and are never read.
using FlowVector = std::vector<double>;
using CostVector = std::vector<double>;

struct SolverOptions {
  double gap_tolerance = 1e-4;
  int max_iterations = 5000;
  double line_search_tolerance = 1e-8;
  // > 1 runs the all-or-nothing sweep on an OpenMP team of that size.
  int threads = 1;

  void validate() const;
  bool operator==(const SolverOptions&) const = default;
};

struct Equilibrium {
  FlowVector flows;
  double relative_gap = 0.0;
  int iterations = 0;
  double ttt = 0.0;
  bool converged = false;
  std::vector<double> objective_trace;  // Beckmann objective after each update
};

double bpr_cost(const Link& link, double flow);

// Closed-form integral of the BPR curve from 0 to `flow`.
double bpr_integral(const Link& link, double flow);

CostVector link_costs(const Network& network, std::span<const double> flows);
CostVector free_flow_costs(const Network& network);

double beckmann_objective(const Network& network, std::span<const double> flows);
double total_travel_time(const Network& network, std::span<const double> flows);

struct ShortestPathTree {
  std::vector<double> dist;
  std::vector<int> pred_slot;  // position in Network::links() of the tree link into each node, -1 at root
};

/// Dijkstra from `origin`. Equal-distance labels keep the predecessor link with the
/// lowest id, so trees are reproducible.
ShortestPathTree shortest_path_tree(const Network& network, std::span<const double> costs,
                                    NodeIndex origin);

/// AON load of a single origin's demand onto its shortest-path tree.
FlowVector aon_origin(const Network& network, std::span<const double> costs,
                      const DemandMatrix& demand, NodeIndex origin);

// Serial reference: origins in ascending order, summed in the same order.
FlowVector all_or_nothing_serial(const Network& network, std::span<const double> costs,
                                 const DemandMatrix& demand);

// Origins fan out over `threads` OpenMP threads; per-origin loads are reduced in
// origin order so the result is bit-identical to the serial kernel.
FlowVector all_or_nothing_parallel(const Network& network, std::span<const double> costs,
                                   const DemandMatrix& demand, int threads);

inline FlowVector all_or_nothing(const Network& network, std::span<const double> costs,
                                 const DemandMatrix& demand, int threads = 1) {
  return threads > 1 ? all_or_nothing_parallel(network, costs, demand, threads)
                     : all_or_nothing_serial(network, costs, demand);
}

/// Step in [0,1] minimising the Beckmann objective on the segment current->auxiliary,
/// by bisection on the directional derivative.
double line_search(const Network& network, std::span<const double> current,
                   std::span<const double> auxiliary, double tolerance = 1e-8, int max_halvings = 64);

double relative_gap(const Network& network, std::span<const double> flows, const DemandMatrix& demand,
                    int threads = 1);

/// Link-based Frank-Wolfe user equilibrium.
Equilibrium solve_ue(const Network& network, const DemandMatrix& demand, const SolverOptions& opts = {});

}  // namespace roadwork
