#include "roadwork/network.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

namespace roadwork {

Network::Network(std::vector<int> node_ids, std::vector<Link> links, std::size_t id_space)
    : node_ids_(std::move(node_ids)), links_(std::move(links)), id_space_(id_space) {
  for (std::size_t i = 0; i < node_ids_.size(); ++i) {
    if (!index_of_node_.emplace(node_ids_[i], static_cast<NodeIndex>(i)).second)
      throw ValidationError("duplicate node id " + std::to_string(node_ids_[i]));
  }
  std::sort(links_.begin(), links_.end(), [](const Link& a, const Link& b) { return a.id < b.id; });
  slot_of_id_.assign(id_space_, -1);
  out_.assign(node_ids_.size(), {});
  const auto n = static_cast<NodeIndex>(node_ids_.size());
  for (std::size_t slot = 0; slot < links_.size(); ++slot) {
    const Link& l = links_[slot];
    if (l.id < 0 || static_cast<std::size_t>(l.id) >= id_space_)
      throw ValidationError("link id " + std::to_string(l.id) + " outside id space");
    if (slot_of_id_[l.id] != -1) throw ValidationError("duplicate link id " + std::to_string(l.id));
    if (l.tail < 0 || l.tail >= n || l.head < 0 || l.head >= n)
      throw ValidationError("link " + std::to_string(l.id) + " references an unknown node");
    if (!(l.fft > 0.0) || !std::isfinite(l.fft))
      throw ValidationError("link " + std::to_string(l.id) + ": free-flow time must be > 0");
    if (!(l.capacity > 0.0) || !std::isfinite(l.capacity))
      throw ValidationError("link " + std::to_string(l.id) + ": capacity must be > 0");
    if (!(l.beta >= 1.0) || !std::isfinite(l.alpha) || l.alpha < 0.0)
      throw ValidationError("link " + std::to_string(l.id) + ": invalid BPR parameters");
    if (!link_index_.emplace(std::pair{l.tail, l.head}, l.id).second)
      throw ValidationError("duplicate link " + std::to_string(node_ids_[l.tail]) + "->" +
                            std::to_string(node_ids_[l.head]));
    slot_of_id_[l.id] = static_cast<int>(slot);
    out_[l.tail].push_back(static_cast<int>(slot));
  }
}

Network Network::from_records(std::vector<int> node_ids, std::vector<Link> links) {
  for (std::size_t i = 0; i < links.size(); ++i) links[i].id = static_cast<LinkId>(i);
  const auto count = links.size();
  return Network(std::move(node_ids), std::move(links), count);
}

bool Network::has_link(LinkId id) const {
  return id >= 0 && static_cast<std::size_t>(id) < id_space_ && slot_of_id_[id] != -1;
}

const Link& Network::link(LinkId id) const {
  if (!has_link(id)) throw std::out_of_range("no link with id " + std::to_string(id));
  return links_[slot_of_id_[id]];
}

NodeIndex Network::node_index(int node_id) const {
  auto it = index_of_node_.find(node_id);
  if (it == index_of_node_.end()) throw ValidationError("unknown node " + std::to_string(node_id));
  return it->second;
}

LinkId Network::find_link(NodeIndex tail, NodeIndex head) const {
  auto it = link_index_.find({tail, head});
  return it == link_index_.end() ? -1 : it->second;
}

DemandMatrix::DemandMatrix(std::vector<OdDemand> entries, std::size_t node_count)
    : entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(), [](const OdDemand& a, const OdDemand& b) {
    return std::pair{a.origin, a.destination} < std::pair{b.origin, b.destination};
  });
  const auto n = static_cast<NodeIndex>(node_count);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.origin < 0 || e.origin >= n || e.destination < 0 || e.destination >= n)
      throw ValidationError("demand references an unknown node");
    if (e.origin == e.destination) throw ValidationError("demand with origin == destination");
    if (!std::isfinite(e.demand) || e.demand < 0.0)
      throw ValidationError("demand must be finite and non-negative");
    if (i > 0 && entries_[i - 1].origin == e.origin && entries_[i - 1].destination == e.destination)
      throw ValidationError("duplicate OD pair");
  }
  origin_range_.assign(node_count, {0, 0});
  for (std::size_t i = 0; i < entries_.size();) {
    std::size_t j = i;
    while (j < entries_.size() && entries_[j].origin == entries_[i].origin) ++j;
    origins_.push_back(entries_[i].origin);
    origin_range_[entries_[i].origin] = {i, j};
    i = j;
  }
}

std::span<const OdDemand> DemandMatrix::from_origin(NodeIndex origin) const {
  if (origin < 0 || static_cast<std::size_t>(origin) >= origin_range_.size()) return {};
  auto [b, e] = origin_range_[origin];
  return std::span<const OdDemand>(entries_).subspan(b, e - b);
}

double DemandMatrix::total() const {
  double s = 0.0;
  for (const auto& e : entries_) s += e.demand;
  return s;
}

std::size_t DemandMatrix::positive_count() const {
  return static_cast<std::size_t>(
      std::count_if(entries_.begin(), entries_.end(), [](const OdDemand& e) { return e.demand > 0.0; }));
}

ClosureConfig::ClosureConfig(std::vector<LinkId> ids) : closed_(std::move(ids)) {
  std::sort(closed_.begin(), closed_.end());
  closed_.erase(std::unique(closed_.begin(), closed_.end()), closed_.end());
}

bool ClosureConfig::contains(LinkId id) const {
  return std::binary_search(closed_.begin(), closed_.end(), id);
}

bool ClosureConfig::is_subset_of(const ClosureConfig& other) const {
  return std::includes(other.closed_.begin(), other.closed_.end(), closed_.begin(), closed_.end());
}

ClosureConfig ClosureConfig::unite(const ClosureConfig& other) const {
  std::vector<LinkId> out;
  std::set_union(closed_.begin(), closed_.end(), other.closed_.begin(), other.closed_.end(),
                 std::back_inserter(out));
  return ClosureConfig(std::move(out));
}

ClosureConfig ClosureConfig::minus(const ClosureConfig& other) const {
  std::vector<LinkId> out;
  std::set_difference(closed_.begin(), closed_.end(), other.closed_.begin(), other.closed_.end(),
                      std::back_inserter(out));
  return ClosureConfig(std::move(out));
}

std::string ClosureConfig::to_string() const {
  std::string s = "{";
  for (std::size_t i = 0; i < closed_.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(closed_[i]);
  }
  return s + "}";
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double parse_number(const std::string& token, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size())
    throw ParseError("expected a number, got '" + token + "'", line);
  return v;
}

int parse_int(const std::string& token, std::size_t line) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size())
    throw ParseError("expected an integer, got '" + token + "'", line);
  return v;
}

// Splits on whitespace and ';', dropping empties.
std::vector<std::string> tokens(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == ';' || c == '\r') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

struct RawLink {
  int tail, head;
  double capacity, fft, alpha, beta;
  std::size_t line;
};

}  // namespace

TntpData load_tntp(std::istream& net_source, std::istream& trips_source) {
  std::vector<RawLink> raw;
  int declared_nodes = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(net_source, line)) {
    ++line_no;
    auto t = trim(line);
    if (t.empty() || t[0] == '~') continue;
    if (t[0] == '<') {
      if (t.rfind("<NUMBER OF NODES>", 0) == 0)
        declared_nodes = parse_int(trim(t.substr(17)), line_no);
      continue;
    }
    auto tok = tokens(t);
    if (tok.empty()) continue;
    if (tok.size() < 5) throw ParseError("link record needs at least 5 columns", line_no);
    RawLink r{};
    r.tail = parse_int(tok[0], line_no);
    r.head = parse_int(tok[1], line_no);
    r.capacity = parse_number(tok[2], line_no);
    r.fft = parse_number(tok[4], line_no);
    r.alpha = tok.size() > 5 ? parse_number(tok[5], line_no) : 0.15;
    r.beta = tok.size() > 6 ? parse_number(tok[6], line_no) : 4.0;
    r.line = line_no;
    raw.push_back(r);
  }
  if (raw.empty()) throw ParseError("no link records");

  std::set<int> ids;
  for (int i = 1; i <= declared_nodes; ++i) ids.insert(i);
  for (const auto& r : raw) {
    ids.insert(r.tail);
    ids.insert(r.head);
  }
  std::vector<int> node_ids(ids.begin(), ids.end());
  std::map<int, NodeIndex> index;
  for (std::size_t i = 0; i < node_ids.size(); ++i) index[node_ids[i]] = static_cast<NodeIndex>(i);

  std::vector<Link> links;
  links.reserve(raw.size());
  for (const auto& r : raw) {
    Link l;
    l.tail = index[r.tail];
    l.head = index[r.head];
    l.capacity = r.capacity;
    l.fft = r.fft;
    l.alpha = r.alpha;
    l.beta = r.beta;
    links.push_back(l);
  }
  Network network;
  try {
    network = Network::from_records(std::move(node_ids), std::move(links));
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("network: ") + e.what());
  }

  std::vector<OdDemand> entries;
  std::set<std::pair<int, int>> seen;
  int origin = -1;
  line_no = 0;
  while (std::getline(trips_source, line)) {
    ++line_no;
    auto t = trim(line);
    if (t.empty() || t[0] == '~' || t[0] == '<') continue;
    if (t.rfind("Origin", 0) == 0) {
      origin = parse_int(trim(t.substr(6)), line_no);
      if (!network.has_node(origin))
        throw ValidationError("trips line " + std::to_string(line_no) + ": unknown origin node " +
                              std::to_string(origin));
      continue;
    }
    if (origin < 0) throw ParseError("destination record before any Origin line", line_no);
    std::stringstream ss(t);
    std::string rec;
    while (std::getline(ss, rec, ';')) {
      auto r = trim(rec);
      if (r.empty()) continue;
      auto colon = r.find(':');
      if (colon == std::string::npos) throw ParseError("expected 'dest : demand'", line_no);
      int dest = parse_int(trim(r.substr(0, colon)), line_no);
      double value = parse_number(trim(r.substr(colon + 1)), line_no);
      if (!network.has_node(dest))
        throw ValidationError("trips line " + std::to_string(line_no) + ": unknown destination node " +
                              std::to_string(dest));
      if (!std::isfinite(value) || value < 0.0)
        throw ValidationError("trips line " + std::to_string(line_no) + ": negative demand");
      if (!seen.insert({origin, dest}).second)
        throw ValidationError("trips line " + std::to_string(line_no) + ": duplicate OD pair");
      if (value == 0.0) continue;
      if (dest == origin)
        throw ValidationError("trips line " + std::to_string(line_no) + ": intrazonal demand");
      entries.push_back({network.node_index(origin), network.node_index(dest), value});
    }
  }
  DemandMatrix demand(std::move(entries), network.node_count());
  return {std::move(network), std::move(demand)};
}

TntpData load_tntp_files(const std::string& net_path, const std::string& trips_path) {
  std::ifstream net(net_path);
  if (!net) throw std::runtime_error("cannot open network file: " + net_path);
  std::ifstream trips(trips_path);
  if (!trips) throw std::runtime_error("cannot open trips file: " + trips_path);
  return load_tntp(net, trips);
}

void write_tntp_net(std::ostream& out, const Network& network) {
  out << "<NUMBER OF ZONES> " << network.node_count() << "\n"
      << "<NUMBER OF NODES> " << network.node_count() << "\n"
      << "<FIRST THRU NODE> 1\n"
      << "<NUMBER OF LINKS> " << network.link_count() << "\n"
      << "<END OF METADATA>\n\n"
      << "~\tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time\tb\tpower\t;\n";
  out << std::setprecision(17);
  for (const auto& l : network.links()) {
    out << '\t' << network.node_id(l.tail) << '\t' << network.node_id(l.head) << '\t' << l.capacity
        << '\t' << l.fft << '\t' << l.fft << '\t' << l.alpha << '\t' << l.beta << "\t;\n";
  }
}

void write_tntp_trips(std::ostream& out, const Network& network, const DemandMatrix& demand) {
  out << "<NUMBER OF ZONES> " << network.node_count() << "\n"
      << "<TOTAL OD FLOW> " << std::setprecision(17) << demand.total() << "\n"
      << "<END OF METADATA>\n\n";
  for (NodeIndex o : demand.origins()) {
    out << "Origin " << network.node_id(o) << "\n";
    for (const auto& e : demand.from_origin(o))
      out << "  " << network.node_id(e.destination) << " : " << e.demand << ";\n";
    out << "\n";
  }
}

void validate_closure(const Network& network, const ClosureConfig& config) {
  for (LinkId id : config.ids()) {
    if (!network.has_link(id)) throw ValidationError("closure references unknown link " + std::to_string(id));
  }
}

Network apply_closures(const Network& network, const ClosureConfig& config,
                       const AdjustmentTable& adjustments) {
  validate_closure(network, config);
  std::vector<Link> kept;
  kept.reserve(network.link_count());
  for (Link l : network.links()) {
    if (config.contains(l.id)) {
      auto adj = adjustments.find(l.id);
      if (adj == adjustments.end()) continue;
      l.capacity *= adj->second.capacity_factor;
      l.fft *= adj->second.fft_factor;
    }
    kept.push_back(l);
  }
  std::vector<int> nodes(network.node_ids().begin(), network.node_ids().end());
  return Network(std::move(nodes), std::move(kept), network.id_space());
}

std::vector<std::pair<NodeIndex, NodeIndex>> connectivity_check(const Network& network,
                                                                const DemandMatrix& demand) {
  std::vector<std::pair<NodeIndex, NodeIndex>> missing;
  std::vector<char> seen(network.node_count());
  std::vector<NodeIndex> stack;
  for (NodeIndex o : demand.origins()) {
    std::fill(seen.begin(), seen.end(), 0);
    stack.assign(1, o);
    seen[o] = 1;
    while (!stack.empty()) {
      NodeIndex u = stack.back();
      stack.pop_back();
      for (int slot : network.out_links(u)) {
        NodeIndex v = network.links()[slot].head;
        if (!seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
      }
    }
    for (const auto& e : demand.from_origin(o))
      if (e.demand > 0.0 && !seen[e.destination]) missing.emplace_back(e.origin, e.destination);
  }
  return missing;
}

std::string fingerprint(const Network& network, const DemandMatrix& demand) {
  std::ostringstream canon;
  canon << std::setprecision(17) << network.id_space() << ';';
  for (const auto& l : network.links())
    canon << l.id << ',' << network.node_id(l.tail) << ',' << network.node_id(l.head) << ','
          << l.fft << ',' << l.capacity << ',' << l.alpha << ',' << l.beta << ';';
  canon << '|';
  for (const auto& e : demand.entries())
    canon << network.node_id(e.origin) << ',' << network.node_id(e.destination) << ',' << e.demand << ';';
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canon.str()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << h;
  return hex.str();
}

}  // namespace roadwork
