// Live topology reader over the Linux sysfs node tree. Produces the same
// Topology type as snapshot ingestion; technology labels are left UNKNOWN
// because sysfs does not identify the memory medium — relabel via a
// snapshot document when the kinds are known.
#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "memwatt/text.hpp"
#include "memwatt/topology.hpp"

namespace memwatt {

namespace detail {

inline std::optional<std::string> read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string s = ss.str();
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

// "0-17,36-53" -> {0..17, 36..53}; empty string means no CPUs.
inline std::set<int> parse_cpulist(std::string_view s) {
  std::set<int> cpus;
  if (s.empty()) return cpus;
  for (auto part : split(s, ',')) {
    auto dash = part.find('-');
    if (dash == std::string_view::npos) {
      if (auto v = try_parse_int<int>(part)) cpus.insert(*v);
      continue;
    }
    auto lo = try_parse_int<int>(part.substr(0, dash));
    auto hi = try_parse_int<int>(part.substr(dash + 1));
    if (lo && hi)
      for (int c = *lo; c <= *hi; ++c) cpus.insert(c);
  }
  return cpus;
}

}  // namespace detail

// Reads node*/cpulist and node*/distance under `node_root`, and socket ids
// from cpu topology files under `cpu_root`. Returns nullopt when the tree
// is absent. Memory-only nodes are assigned the socket of the nearest
// CPU-bearing node by distance.
inline std::optional<Topology> read_sysfs_topology(
    const std::string& node_root = "/sys/devices/system/node",
    const std::string& cpu_root = "/sys/devices/system/cpu") {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(node_root, ec)) return std::nullopt;

  std::vector<int> node_ids;
  for (const auto& entry : fs::directory_iterator(node_root, ec)) {
    std::string name = entry.path().filename().string();
    if (name.rfind("node", 0) != 0) continue;
    if (auto id = try_parse_int<int>(std::string_view(name).substr(4))) node_ids.push_back(*id);
  }
  if (node_ids.empty()) return std::nullopt;
  std::sort(node_ids.begin(), node_ids.end());

  Topology topo;
  for (int id : node_ids) {
    NumaNode n;
    n.id = id;
    n.technology = MemoryTechnology::UNKNOWN;
    auto cpulist = detail::read_text_file(fs::path(node_root) / ("node" + std::to_string(id)) / "cpulist");
    if (cpulist) n.local_cpus = detail::parse_cpulist(*cpulist);
    topo.nodes.push_back(std::move(n));
  }

  // Socket of each CPU-bearing node: physical_package_id of its first CPU.
  int max_socket = 0;
  for (auto& n : topo.nodes) {
    if (n.local_cpus.empty()) continue;
    auto pkg = detail::read_text_file(fs::path(cpu_root) / ("cpu" + std::to_string(*n.local_cpus.begin())) /
                                      "topology" / "physical_package_id");
    if (pkg) {
      if (auto v = try_parse_int<int>(*pkg)) n.socket = *v;
    }
    max_socket = std::max(max_socket, n.socket);
  }

  for (std::size_t i = 0; i < topo.nodes.size(); ++i) {
    auto dist = detail::read_text_file(fs::path(node_root) /
                                       ("node" + std::to_string(topo.nodes[i].id)) / "distance");
    std::vector<int> row;
    if (dist)
      for (auto tok : split(*dist, ' '))
        if (!tok.empty())
          if (auto v = try_parse_int<int>(tok)) row.push_back(*v);
    if (row.size() != topo.nodes.size()) {
      // distance files missing or inconsistent; synthesize a flat matrix
      row.assign(topo.nodes.size(), 20);
      row[i] = 10;
    }
    topo.distances.push_back(std::move(row));
  }

  // Memory-only nodes attach to the socket of the closest CPU node.
  for (std::size_t i = 0; i < topo.nodes.size(); ++i) {
    if (!topo.nodes[i].memory_only()) continue;
    int best = -1;
    int best_dist = 0;
    for (std::size_t j = 0; j < topo.nodes.size(); ++j) {
      if (topo.nodes[j].memory_only()) continue;
      int d = topo.distances[i][j];
      if (best < 0 || d < best_dist) {
        best = static_cast<int>(j);
        best_dist = d;
      }
    }
    if (best >= 0) topo.nodes[i].socket = topo.nodes[best].socket;
  }

  topo.sockets = max_socket + 1;
  detail::validate_topology(topo);
  return topo;
}

}  // namespace memwatt
