// Memory topology model: NUMA nodes with technology labels, snapshot
// ingestion/serialization, and enumeration of profile-addressable memory
// targets (local and remote kinds) for a chosen home socket.
//
// Topologies are loaded from snapshot documents rather than probed live so
// that every downstream result is reproducible on any machine; a sysfs
// reader with the same output type lives in topology_sysfs.hpp.
#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "memwatt/errors.hpp"
#include "memwatt/json_util.hpp"

namespace memwatt {

enum class MemoryTechnology { DRAM, NVM, HBM, CXL, UNKNOWN };

inline std::string_view to_string(MemoryTechnology t) {
  switch (t) {
    case MemoryTechnology::DRAM: return "DRAM";
    case MemoryTechnology::NVM: return "NVM";
    case MemoryTechnology::HBM: return "HBM";
    case MemoryTechnology::CXL: return "CXL";
    case MemoryTechnology::UNKNOWN: return "UNKNOWN";
  }
  return "UNKNOWN";
}

inline MemoryTechnology technology_from_string(std::string_view s) {
  if (s == "DRAM") return MemoryTechnology::DRAM;
  if (s == "NVM") return MemoryTechnology::NVM;
  if (s == "HBM") return MemoryTechnology::HBM;
  if (s == "CXL") return MemoryTechnology::CXL;
  if (s == "UNKNOWN") return MemoryTechnology::UNKNOWN;
  throw schema_error("unknown technology label \"" + std::string(s) + "\"");
}

struct NumaNode {
  int id = 0;
  std::set<int> local_cpus;
  MemoryTechnology technology = MemoryTechnology::UNKNOWN;
  int socket = 0;
  std::optional<std::uint64_t> capacity_bytes;

  // A node with no local CPUs is memory-only (e.g. an NVM-backed node).
  bool memory_only() const { return local_cpus.empty(); }

  bool operator==(const NumaNode&) const = default;
};

struct Topology {
  int sockets = 0;
  std::vector<NumaNode> nodes;
  // distances[i][j] between nodes[i] and nodes[j]; carried for reporting,
  // binding decisions use socket membership only.
  std::vector<std::vector<int>> distances;

  bool operator==(const Topology&) const = default;

  const NumaNode* find_node(int id) const {
    for (const auto& n : nodes)
      if (n.id == id) return &n;
    return nullptr;
  }

  std::set<int> socket_cpus(int socket) const {
    std::set<int> cpus;
    for (const auto& n : nodes)
      if (n.socket == socket) cpus.insert(n.local_cpus.begin(), n.local_cpus.end());
    return cpus;
  }
};

enum class Locality { LOCAL, REMOTE };

inline std::string_view to_string(Locality l) {
  return l == Locality::LOCAL ? "LOCAL" : "REMOTE";
}

// One profile-addressable memory kind: a node viewed from a home socket.
struct MemoryTarget {
  std::string name;  // e.g. "LocalDRAM", "RemoteDRAM", "LocalNVM"
  int node_id = 0;
  int home_socket = 0;
  Locality locality = Locality::LOCAL;
  MemoryTechnology technology = MemoryTechnology::UNKNOWN;

  bool operator==(const MemoryTarget&) const = default;
};

namespace detail {

inline void validate_topology(const Topology& topo) {
  if (topo.sockets < 1) throw invariant_error("sockets: must be >= 1");
  if (topo.nodes.empty()) throw invariant_error("nodes: must not be empty");

  std::set<int> seen_ids;
  std::map<int, int> cpu_owner;
  bool any_cpus = false;
  for (const auto& n : topo.nodes) {
    if (n.id < 0) throw invariant_error("node id " + std::to_string(n.id) + ": must be non-negative");
    if (!seen_ids.insert(n.id).second)
      throw invariant_error("duplicate node id " + std::to_string(n.id));
    if (n.socket < 0 || n.socket >= topo.sockets)
      throw invariant_error("node " + std::to_string(n.id) + ": socket " +
                            std::to_string(n.socket) + " does not exist");
    for (int cpu : n.local_cpus) {
      if (cpu < 0)
        throw invariant_error("node " + std::to_string(n.id) + ": negative cpu index");
      auto [it, inserted] = cpu_owner.emplace(cpu, n.id);
      if (!inserted)
        throw invariant_error("cpu " + std::to_string(cpu) + " appears in nodes " +
                              std::to_string(it->second) + " and " + std::to_string(n.id));
    }
    any_cpus = any_cpus || !n.local_cpus.empty();
  }
  if (!any_cpus) throw invariant_error("nodes: at least one node must have local cpus");

  const std::size_t dim = topo.nodes.size();
  if (topo.distances.size() != dim)
    throw invariant_error("distances: expected " + std::to_string(dim) + " rows, got " +
                          std::to_string(topo.distances.size()));
  for (std::size_t i = 0; i < dim; ++i) {
    if (topo.distances[i].size() != dim)
      throw invariant_error("distances: row " + std::to_string(i) + " has " +
                            std::to_string(topo.distances[i].size()) + " entries, expected " +
                            std::to_string(dim));
    for (std::size_t j = 0; j < dim; ++j)
      if (topo.distances[i][j] <= 0)
        throw invariant_error("distances: entry [" + std::to_string(i) + "][" +
                              std::to_string(j) + "] must be positive");
    for (std::size_t j = 0; j < dim; ++j)
      if (topo.distances[i][i] > topo.distances[i][j])
        throw invariant_error("distances: self-distance of row " + std::to_string(i) +
                              " is not minimal");
  }
}

}  // namespace detail

// Parses and validates a topology snapshot document. Schema: top-level
// {sockets, nodes, distances}; node = {id, socket, cpus, technology,
// capacity_bytes?}. Unknown fields are rejected.
inline Topology load_topology_snapshot(const std::string& text) {
  using detail::json;
  json j = detail::parse_json(text, "topology snapshot");
  detail::check_fields(j, "topology snapshot", {"sockets", "nodes", "distances"}, {});

  Topology topo;
  topo.sockets = detail::get_int(j, "sockets", "topology snapshot");

  const json& nodes = detail::get_array(j, "nodes", "topology snapshot");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string ctx = "nodes[" + std::to_string(i) + "]";
    const json& nj = nodes[i];
    detail::check_fields(nj, ctx, {"id", "socket", "cpus", "technology"}, {"capacity_bytes"});
    NumaNode n;
    n.id = detail::get_int(nj, "id", ctx);
    n.socket = detail::get_int(nj, "socket", ctx);
    n.technology = technology_from_string(detail::get_string(nj, "technology", ctx));
    const json& cpus = detail::get_array(nj, "cpus", ctx);
    for (const auto& c : cpus) {
      if (!c.is_number_integer()) throw schema_error(ctx + ": cpus entries must be integers");
      n.local_cpus.insert(c.get<int>());
    }
    if (nj.contains("capacity_bytes"))
      n.capacity_bytes = detail::get_uint64(nj, "capacity_bytes", ctx);
    topo.nodes.push_back(std::move(n));
  }

  const json& dist = detail::get_array(j, "distances", "topology snapshot");
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (!dist[i].is_array())
      throw schema_error("distances: row " + std::to_string(i) + " must be an array");
    std::vector<int> row;
    for (const auto& d : dist[i]) {
      if (!d.is_number_integer())
        throw schema_error("distances: entries must be integers");
      row.push_back(d.get<int>());
    }
    topo.distances.push_back(std::move(row));
  }

  detail::validate_topology(topo);
  return topo;
}

// Canonical JSON rendering; load_topology_snapshot(serialize_topology(t)) == t.
inline std::string serialize_topology(const Topology& topo) {
  using detail::json;
  json j;
  j["sockets"] = topo.sockets;
  j["nodes"] = json::array();
  for (const auto& n : topo.nodes) {
    json nj;
    nj["id"] = n.id;
    nj["socket"] = n.socket;
    nj["cpus"] = n.local_cpus;
    nj["technology"] = to_string(n.technology);
    if (n.capacity_bytes) nj["capacity_bytes"] = *n.capacity_bytes;
    j["nodes"].push_back(std::move(nj));
  }
  j["distances"] = topo.distances;
  return j.dump(2);
}

// One target per node, viewed from home_socket. Names are the locality
// prefix plus the technology label; when two nodes would collide the node
// id is appended to each. Order: LOCAL before REMOTE, then ascending node id.
inline std::vector<MemoryTarget> enumerate_targets(const Topology& topo, int home_socket) {
  if (home_socket < 0 || home_socket >= topo.sockets)
    throw argument_error("unknown socket " + std::to_string(home_socket));
  if (topo.socket_cpus(home_socket).empty())
    throw argument_error("home socket " + std::to_string(home_socket) + " has no cpus");

  std::vector<MemoryTarget> targets;
  for (const auto& n : topo.nodes) {
    MemoryTarget t;
    t.node_id = n.id;
    t.home_socket = home_socket;
    t.locality = n.socket == home_socket ? Locality::LOCAL : Locality::REMOTE;
    t.technology = n.technology;
    targets.push_back(std::move(t));
  }

  std::sort(targets.begin(), targets.end(), [](const MemoryTarget& a, const MemoryTarget& b) {
    if (a.locality != b.locality) return a.locality == Locality::LOCAL;
    return a.node_id < b.node_id;
  });

  std::map<std::pair<Locality, MemoryTechnology>, int> group_sizes;
  for (const auto& t : targets) group_sizes[{t.locality, t.technology}]++;
  for (auto& t : targets) {
    std::string name = (t.locality == Locality::LOCAL ? "Local" : "Remote");
    name += to_string(t.technology);
    if (group_sizes[{t.locality, t.technology}] > 1) name += std::to_string(t.node_id);
    t.name = std::move(name);
  }
  return targets;
}

// Bundled topology snapshots, addressable by name from the CLI.
inline const std::map<std::string, std::string>& topology_fixtures() {
  // Two-socket machine, one DRAM and one cpuless NVM node per socket.
  // 18 CPUs per socket; distances follow the usual local/remote pattern.
  static const std::map<std::string, std::string> fixtures = {
      {"paper-machine", R"({
  "sockets": 2,
  "nodes": [
    {"id": 0, "socket": 0, "cpus": [0,1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17], "technology": "DRAM"},
    {"id": 1, "socket": 1, "cpus": [18,19,20,21,22,23,24,25,26,27,28,29,30,31,32,33,34,35], "technology": "DRAM"},
    {"id": 2, "socket": 0, "cpus": [], "technology": "NVM"},
    {"id": 3, "socket": 1, "cpus": [], "technology": "NVM"}
  ],
  "distances": [
    [10, 21, 17, 28],
    [21, 10, 28, 17],
    [17, 28, 10, 28],
    [28, 17, 28, 10]
  ]
})"}};
  return fixtures;
}

inline Topology fixture_topology(const std::string& name) {
  const auto& fixtures = topology_fixtures();
  auto it = fixtures.find(name);
  if (it == fixtures.end()) throw argument_error("unknown topology fixture \"" + name + "\"");
  return load_topology_snapshot(it->second);
}

}  // namespace memwatt
