// Powercap (RAPL sysfs) energy sampler. Polls energy_uj on a background
// thread between start and stop. Requires readable
// /sys/class/powercap/intel-rapl:* domains; probed at runtime, never
// assumed in CI.
#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "memwatt/errors.hpp"
#include "memwatt/sampling.hpp"
#include "memwatt/topology_sysfs.hpp"

namespace memwatt {

struct PowercapDomain {
  std::string energy_path;     // .../energy_uj
  CounterDomain domain;
};

// Scans the powercap tree for package/dram zones. `root` is overridable so
// the discovery logic is testable against a fake tree.
inline std::vector<PowercapDomain> discover_powercap_domains(
    const std::string& root = "/sys/class/powercap") {
  namespace fs = std::filesystem;
  std::vector<PowercapDomain> out;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) return out;
  for (const auto& entry : fs::directory_iterator(root, ec)) {
    std::string dir = entry.path().filename().string();
    if (dir.rfind("intel-rapl:", 0) != 0) continue;

    auto name = detail::read_text_file(entry.path() / "name");
    if (!name) continue;

    CounterDomain domain;
    if (name->rfind("package-", 0) == 0) {
      auto skt = try_parse_int<int>(std::string_view(*name).substr(8));
      if (!skt) continue;
      domain.socket = *skt;
      domain.subdomain = CounterSubdomain::PACKAGE;
    } else if (*name == "dram") {
      // dram zones are children "intel-rapl:S:D"; socket comes from parent
      auto parts = split(dir, ':');
      if (parts.size() < 2) continue;
      auto skt = try_parse_int<int>(parts[1]);
      if (!skt) continue;
      domain.socket = *skt;
      domain.subdomain = CounterSubdomain::DRAM;
    } else {
      continue;
    }

    if (auto range = detail::read_text_file(entry.path() / "max_energy_range_uj"))
      if (auto v = try_parse_int<std::uint64_t>(*range)) domain.max_range_uj = *v;

    fs::path energy = entry.path() / "energy_uj";
    if (!fs::exists(energy, ec)) continue;
    out.push_back({energy.string(), domain});

    // nested dram zones live one level down
    for (const auto& child : fs::directory_iterator(entry.path(), ec)) {
      if (!child.is_directory(ec)) continue;
      std::string cdir = child.path().filename().string();
      if (cdir.rfind("intel-rapl:", 0) != 0) continue;
      auto cname = detail::read_text_file(child.path() / "name");
      if (!cname || *cname != "dram") continue;
      CounterDomain cd;
      cd.socket = domain.socket;
      cd.subdomain = CounterSubdomain::DRAM;
      if (auto range = detail::read_text_file(child.path() / "max_energy_range_uj"))
        if (auto v = try_parse_int<std::uint64_t>(*range)) cd.max_range_uj = *v;
      fs::path cenergy = child.path() / "energy_uj";
      if (fs::exists(cenergy, ec)) out.push_back({cenergy.string(), cd});
    }
  }
  return out;
}

// One polling activity over a single powercap domain.
class PowercapActivity {
 public:
  PowercapActivity(PowercapDomain domain, double period_s)
      : domain_(std::move(domain)), period_s_(period_s), stop_flag_(false) {
    trace_.domain = domain_.domain;
    trace_.meta["backend"] = "powercap";
    start_ = std::chrono::steady_clock::now();
    poll_once();
    worker_ = std::thread([this] {
      while (!stop_flag_.load()) {
        std::this_thread::sleep_for(std::chrono::duration<double>(period_s_));
        poll_once();
      }
    });
  }

  EnergyTrace stop() {
    stop_flag_.store(true);
    if (worker_.joinable()) worker_.join();
    poll_once();
    return std::move(trace_);
  }

  ~PowercapActivity() {
    stop_flag_.store(true);
    if (worker_.joinable()) worker_.join();
  }

 private:
  void poll_once() {
    auto text = detail::read_text_file(domain_.energy_path);
    if (!text) return;
    auto uj = try_parse_int<std::uint64_t>(*text);
    if (!uj) return;
    double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    if (!trace_.samples.empty() && t <= trace_.samples.back().t_s) return;
    if (*uj > trace_.domain.max_range_uj) return;
    trace_.samples.push_back({t, *uj});
  }

  PowercapDomain domain_;
  double period_s_;
  std::atomic<bool> stop_flag_;
  std::thread worker_;
  EnergyTrace trace_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace memwatt
