#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "roadwork/errors.hpp"

namespace roadwork {

using LinkId = int;
using NodeIndex = int;

// A directed road. `tail`/`head` are dense node indices into Network::node_ids.
struct Link {
  LinkId id = 0;
  NodeIndex tail = 0;
  NodeIndex head = 0;
  double fft = 1.0;       // free-flow travel time
  double capacity = 1.0;  // vehicles per period
  double alpha = 0.15;
  double beta = 4.0;

  bool operator==(const Link&) const = default;
};

struct OdDemand {
  NodeIndex origin = 0;
  NodeIndex destination = 0;
  double demand = 0.0;

  bool operator==(const OdDemand&) const = default;
};

/// Directed road network. Immutable once built; closures produce a new value
/// that keeps the surviving links' ids so flow vectors stay comparable.
class Network {
 public:
  Network() = default;
  Network(std::vector<int> node_ids, std::vector<Link> links, std::size_t id_space);

  /// Builds a baseline network from external node ids; link ids follow input order.
  static Network from_records(std::vector<int> node_ids, std::vector<Link> links);

  std::span<const int> node_ids() const { return node_ids_; }
  std::size_t node_count() const { return node_ids_.size(); }
  std::span<const Link> links() const { return links_; }
  std::size_t link_count() const { return links_.size(); }

  // Size of the link-id space of the baseline network (>= link_count()).
  std::size_t id_space() const { return id_space_; }

  bool has_link(LinkId id) const;
  const Link& link(LinkId id) const;

  // Positions in links() of the links leaving `node`, ordered by link id.
  std::span<const int> out_links(NodeIndex node) const { return out_[node]; }

  NodeIndex node_index(int node_id) const;
  bool has_node(int node_id) const { return index_of_node_.contains(node_id); }
  int node_id(NodeIndex index) const { return node_ids_[index]; }

  // Link between two node indices, or -1.
  LinkId find_link(NodeIndex tail, NodeIndex head) const;

  bool operator==(const Network& other) const {
    return node_ids_ == other.node_ids_ && links_ == other.links_ && id_space_ == other.id_space_;
  }

 private:
  std::vector<int> node_ids_;
  std::vector<Link> links_;
  std::size_t id_space_ = 0;
  std::vector<int> slot_of_id_;
  std::vector<std::vector<int>> out_;
  std::map<int, NodeIndex> index_of_node_;
  std::map<std::pair<NodeIndex, NodeIndex>, LinkId> link_index_;
};

class DemandMatrix {
 public:
  DemandMatrix() = default;
  DemandMatrix(std::vector<OdDemand> entries, std::size_t node_count);

  std::span<const OdDemand> entries() const { return entries_; }
  // Entries whose origin is `origin`, sorted by destination.
  std::span<const OdDemand> from_origin(NodeIndex origin) const;
  std::span<const NodeIndex> origins() const { return origins_; }
  double total() const;
  std::size_t positive_count() const;

  bool operator==(const DemandMatrix& other) const { return entries_ == other.entries_; }

 private:
  std::vector<OdDemand> entries_;
  std::vector<NodeIndex> origins_;
  std::vector<std::pair<std::size_t, std::size_t>> origin_range_;
};

/// A set of simultaneously closed links, kept sorted and deduplicated.
class ClosureConfig {
 public:
  ClosureConfig() = default;
  ClosureConfig(std::initializer_list<LinkId> ids) : ClosureConfig(std::vector<LinkId>(ids)) {}
  explicit ClosureConfig(std::vector<LinkId> ids);

  std::span<const LinkId> ids() const { return closed_; }
  std::size_t size() const { return closed_.size(); }
  bool empty() const { return closed_.empty(); }
  bool contains(LinkId id) const;
  bool is_subset_of(const ClosureConfig& other) const;

  ClosureConfig unite(const ClosureConfig& other) const;
  ClosureConfig minus(const ClosureConfig& other) const;

  std::string to_string() const;

  auto operator<=>(const ClosureConfig&) const = default;

 private:
  std::vector<LinkId> closed_;
};

// Partial closure: the link stays open with scaled capacity and free-flow time.
struct LinkAdjustment {
  double capacity_factor = 1.0;
  double fft_factor = 1.0;

  bool operator==(const LinkAdjustment&) const = default;
};

using AdjustmentTable = std::map<LinkId, LinkAdjustment>;

struct TntpData {
  Network network;
  DemandMatrix demand;
};

TntpData load_tntp(std::istream& net_source, std::istream& trips_source);
TntpData load_tntp_files(const std::string& net_path, const std::string& trips_path);

void write_tntp_net(std::ostream& out, const Network& network);
void write_tntp_trips(std::ostream& out, const Network& network, const DemandMatrix& demand);

void validate_closure(const Network& network, const ClosureConfig& config);

/// Removes every closed link, unless `adjustments` lists it, in which case the
/// link is kept with scaled capacity and free-flow time.
Network apply_closures(const Network& network, const ClosureConfig& config,
                       const AdjustmentTable& adjustments = {});

/// OD pairs with positive demand and no directed path.
std::vector<std::pair<NodeIndex, NodeIndex>> connectivity_check(const Network& network,
                                                                const DemandMatrix& demand);

// 64-bit FNV-1a over a canonical text form of links and demand, as hex.
std::string fingerprint(const Network& network, const DemandMatrix& demand);

}  // namespace roadwork
