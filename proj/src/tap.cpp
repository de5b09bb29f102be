#include "roadwork/tap.hpp"

#include <omp.h>

#include <cmath>
#include <exception>
#include <limits>
#include <queue>
#include <string>

namespace roadwork {

void SolverOptions::validate() const {
  if (!(gap_tolerance > 0.0)) throw ValidationError("gap_tolerance must be > 0");
  if (!(line_search_tolerance > 0.0)) throw ValidationError("line_search_tolerance must be > 0");
  if (max_iterations < 1) throw ValidationError("max_iterations must be >= 1");
  if (threads < 1) throw ValidationError("threads must be >= 1");
}

namespace {

// x^p with a multiply chain for the common integer exponents.
inline double power(double x, double p) {
  if (p == 4.0) {
    const double x2 = x * x;
    return x2 * x2;
  }
  if (p == 5.0) {
    const double x2 = x * x;
    return x2 * x2 * x;
  }
  if (p == 1.0) return x;
  return std::pow(x, p);
}

}  // namespace

double bpr_cost(const Link& link, double flow) {
  if (flow < 0.0) throw std::domain_error("negative flow on link " + std::to_string(link.id));
  return link.fft * (1.0 + link.alpha * power(flow / link.capacity, link.beta));
}

double bpr_integral(const Link& link, double flow) {
  const double b1 = link.beta + 1.0;
  return link.fft * flow + link.fft * link.alpha * flow * power(flow / link.capacity, link.beta) / b1;
}

CostVector link_costs(const Network& network, std::span<const double> flows) {
  CostVector costs(network.id_space(), 0.0);
  for (const auto& l : network.links()) costs[l.id] = bpr_cost(l, flows[l.id]);
  return costs;
}

CostVector free_flow_costs(const Network& network) {
  CostVector costs(network.id_space(), 0.0);
  for (const auto& l : network.links()) costs[l.id] = l.fft;
  return costs;
}

double beckmann_objective(const Network& network, std::span<const double> flows) {
  double z = 0.0;
  for (const auto& l : network.links()) z += bpr_integral(l, flows[l.id]);
  return z;
}

double total_travel_time(const Network& network, std::span<const double> flows) {
  double t = 0.0;
  for (const auto& l : network.links()) t += flows[l.id] * bpr_cost(l, flows[l.id]);
  return t;
}

ShortestPathTree shortest_path_tree(const Network& network, std::span<const double> costs,
                                    NodeIndex origin) {
  const auto n = network.node_count();
  const auto links = network.links();
  ShortestPathTree tree{std::vector<double>(n, std::numeric_limits<double>::infinity()),
                        std::vector<int>(n, -1)};
  std::vector<char> done(n, 0);
  using Item = std::pair<double, NodeIndex>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  tree.dist[origin] = 0.0;
  heap.emplace(0.0, origin);
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (done[u]) continue;
    done[u] = 1;
    for (int slot : network.out_links(u)) {
      const Link& l = links[slot];
      const double nd = d + costs[l.id];
      const NodeIndex v = l.head;
      if (nd < tree.dist[v]) {
        tree.dist[v] = nd;
        tree.pred_slot[v] = slot;
        heap.emplace(nd, v);
      } else if (nd == tree.dist[v] && v != origin && l.id < links[tree.pred_slot[v]].id) {
        tree.pred_slot[v] = slot;
      }
    }
  }
  return tree;
}

FlowVector aon_origin(const Network& network, std::span<const double> costs, const DemandMatrix& demand,
                      NodeIndex origin) {
  FlowVector flows(network.id_space(), 0.0);
  const auto od = demand.from_origin(origin);
  if (od.empty()) return flows;
  const auto tree = shortest_path_tree(network, costs, origin);
  const auto links = network.links();
  for (const auto& e : od) {
    if (e.demand <= 0.0) continue;
    if (!std::isfinite(tree.dist[e.destination]))
      throw DisconnectedError("no path from node " + std::to_string(network.node_id(e.origin)) +
                              " to node " + std::to_string(network.node_id(e.destination)));
    for (NodeIndex v = e.destination; v != origin;) {
      const Link& l = links[tree.pred_slot[v]];
      flows[l.id] += e.demand;
      v = l.tail;
    }
  }
  return flows;
}

FlowVector all_or_nothing_serial(const Network& network, std::span<const double> costs,
                                 const DemandMatrix& demand) {
  FlowVector total(network.id_space(), 0.0);
  for (NodeIndex o : demand.origins()) {
    const auto part = aon_origin(network, costs, demand, o);
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += part[i];
  }
  return total;
}

FlowVector all_or_nothing_parallel(const Network& network, std::span<const double> costs,
                                   const DemandMatrix& demand, int threads) {
  const auto origins = demand.origins();
  const auto count = static_cast<int>(origins.size());
  std::vector<FlowVector> parts(origins.size());
  std::exception_ptr failure;
#pragma omp parallel for num_threads(threads) schedule(dynamic)
  for (int i = 0; i < count; ++i) {
    try {
      parts[i] = aon_origin(network, costs, demand, origins[i]);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  FlowVector total(network.id_space(), 0.0);
  for (const auto& part : parts)
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += part[i];
  return total;
}

namespace {

// d/dλ of the Beckmann objective along current + λ (auxiliary - current).
double directional_derivative(const Network& network, std::span<const double> current,
                              std::span<const double> auxiliary, double lambda) {
  double g = 0.0;
  for (const auto& l : network.links()) {
    const double dir = auxiliary[l.id] - current[l.id];
    if (dir == 0.0) continue;
    const double f = std::max(0.0, current[l.id] + lambda * dir);
    g += dir * bpr_cost(l, f);
  }
  return g;
}

}  // namespace

double line_search(const Network& network, std::span<const double> current,
                   std::span<const double> auxiliary, double tolerance, int max_halvings) {
  if (directional_derivative(network, current, auxiliary, 0.0) >= 0.0) return 0.0;
  if (directional_derivative(network, current, auxiliary, 1.0) <= 0.0) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < max_halvings && hi - lo > tolerance; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (directional_derivative(network, current, auxiliary, mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

double gap_from(const Network& network, std::span<const double> flows, std::span<const double> costs,
                std::span<const double> aon) {
  double tstt = 0.0, sptt = 0.0;
  for (const auto& l : network.links()) {
    tstt += flows[l.id] * costs[l.id];
    sptt += aon[l.id] * costs[l.id];
  }
  if (sptt <= 0.0) return 0.0;
  return std::max(0.0, (tstt - sptt) / sptt);
}

}  // namespace

double relative_gap(const Network& network, std::span<const double> flows, const DemandMatrix& demand,
                    int threads) {
  const auto costs = link_costs(network, flows);
  const auto aon = all_or_nothing(network, costs, demand, threads);
  return gap_from(network, flows, costs, aon);
}

Equilibrium solve_ue(const Network& network, const DemandMatrix& demand, const SolverOptions& opts) {
  opts.validate();
  Equilibrium eq;
  eq.flows = all_or_nothing(network, free_flow_costs(network), demand, opts.threads);
  double objective = beckmann_objective(network, eq.flows);
  if (!std::isfinite(objective))
    throw SolverError("non-finite Beckmann objective; check link capacities");
  eq.objective_trace.push_back(objective);

  for (int k = 1;; ++k) {
    const auto costs = link_costs(network, eq.flows);
    const auto aux = all_or_nothing(network, costs, demand, opts.threads);
    eq.iterations = k;
    eq.relative_gap = gap_from(network, eq.flows, costs, aux);
    if (eq.relative_gap <= opts.gap_tolerance) {
      eq.converged = true;
      break;
    }
    if (k >= opts.max_iterations) break;

    const double step = line_search(network, eq.flows, aux, opts.line_search_tolerance);
    for (const auto& l : network.links())
      eq.flows[l.id] = step * aux[l.id] + (1.0 - step) * eq.flows[l.id];

    const double next = beckmann_objective(network, eq.flows);
    if (!std::isfinite(next)) throw SolverError("non-finite Beckmann objective during iteration");
    if (next > objective * (1.0 + 1e-12))
      throw SolverError("Beckmann objective increased at iteration " + std::to_string(k));
    objective = next;
    eq.objective_trace.push_back(objective);
  }
  eq.ttt = total_travel_time(network, eq.flows);
  return eq;
}

}  // namespace roadwork
