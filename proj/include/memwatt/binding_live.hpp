// Live whole-process launcher: fork, pin CPUs with sched_setaffinity, bind
// pages with set_mempolicy(MPOL_BIND), export the thread count, then exec
// the command (or run a builtin kernel in-process). Linux only; guarded by
// a capability probe so the rest of the toolkit works anywhere.
#pragma once

#include <chrono>
#include <cstring>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "memwatt/binding.hpp"
#include "memwatt/errors.hpp"

#if defined(__linux__)
#include <sched.h>
#include <sys/syscall.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>
#endif

namespace memwatt {

// Builtin synthetic kernels, so matrices can run without external binaries.
//   noop                 exit immediately
//   spin:<seconds>       busy loop
//   stream:<mib>:<seconds>  stride through a buffer to generate memory traffic
// Returns the exit code.
inline int run_builtin_kernel(const std::string& id) {
  auto parts = split(id, ':');
  const std::string_view kind = parts.empty() ? std::string_view() : parts[0];
  if (kind == "noop") return 0;
  if (kind == "spin") {
    double seconds = 1.0;
    if (parts.size() > 1)
      if (auto v = try_parse_double(parts[1])) seconds = *v;
    auto end = std::chrono::steady_clock::now() + std::chrono::duration<double>(seconds);
    volatile std::uint64_t sink = 0;
    while (std::chrono::steady_clock::now() < end) sink += 1;
    return 0;
  }
  if (kind == "stream") {
    std::size_t mib = 64;
    double seconds = 1.0;
    if (parts.size() > 1)
      if (auto v = try_parse_int<std::size_t>(parts[1])) mib = *v;
    if (parts.size() > 2)
      if (auto v = try_parse_double(parts[2])) seconds = *v;
    std::vector<std::uint64_t> buf(mib * 1024 * 1024 / sizeof(std::uint64_t), 1);
    auto end = std::chrono::steady_clock::now() + std::chrono::duration<double>(seconds);
    std::uint64_t sink = 0;
    while (std::chrono::steady_clock::now() < end) {
      for (std::size_t i = 0; i < buf.size(); i += 8) sink += buf[i]++;
    }
    return sink == 0xdeadbeef ? 1 : 0;  // keep the loop observable
  }
  return 127;  // unknown builtin
}

// Launches commands confined per plan. CI never exercises the launch path;
// correctness there is asserted structurally via the rendered directive.
class ProcessAdapter final : public ExecutionAdapter {
 public:
  explicit ProcessAdapter(std::string threads_env = kDefaultThreadsEnv,
                          std::string node_probe_path = "/sys/devices/system/node")
      : threads_env_(std::move(threads_env)), node_probe_path_(std::move(node_probe_path)) {}

  std::string name() const override { return "process"; }

  bool supported() const {
#if defined(__linux__)
    std::error_code ec;
    return std::filesystem::is_directory(node_probe_path_, ec);
#else
    return false;
#endif
  }

  RunHandle execute(const BindingPlan& plan) override {
    if (!supported())
      throw exec_error("adapter unavailable: no NUMA node tree at " + node_probe_path_);
#if !defined(__linux__)
    throw exec_error("adapter unavailable: requires Linux");
#else
    RunHandle handle;
    handle.directive = render_plan(plan);
    auto wall_start = std::chrono::steady_clock::now();
    handle.start_s = std::chrono::duration<double>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();

    pid_t pid = ::fork();
    if (pid < 0) throw exec_error(std::string("fork failed: ") + std::strerror(errno));
    if (pid == 0) {
      apply_confinement_and_run(plan);  // never returns
    }

    int status = 0;
    if (::waitpid(pid, &status, 0) < 0)
      throw exec_error(std::string("waitpid failed: ") + std::strerror(errno));
    handle.duration_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    if (WIFEXITED(status)) {
      handle.exit_code = WEXITSTATUS(status);
      if (handle.exit_code != 0)
        handle.error = "workload exited with status " + std::to_string(handle.exit_code);
    } else {
      handle.exit_code = 128;
      handle.error = "workload terminated abnormally";
    }
    return handle;
#endif
  }

 private:
#if defined(__linux__)
  [[noreturn]] void apply_confinement_and_run(const BindingPlan& plan) const {
    cpu_set_t cpus;
    CPU_ZERO(&cpus);
    for (int c : plan.cpu_set) CPU_SET(c, &cpus);
    if (::sched_setaffinity(0, sizeof(cpus), &cpus) != 0) ::_exit(125);

    // MPOL_BIND over the plan's node mask; long-word bitmask as the kernel
    // expects. 2 == MPOL_BIND (sys/mman.h does not export it everywhere).
    constexpr int kMpolBind = 2;
    unsigned long maxnode = 0;
    for (int n : plan.memory_nodes) maxnode = std::max<unsigned long>(maxnode, n + 1);
    std::vector<unsigned long> mask((maxnode + 8 * sizeof(unsigned long) - 1) /
                                        (8 * sizeof(unsigned long)),
                                    0);
    for (int n : plan.memory_nodes)
      mask[n / (8 * sizeof(unsigned long))] |= 1ul << (n % (8 * sizeof(unsigned long)));
    if (::syscall(SYS_set_mempolicy, kMpolBind, mask.data(), maxnode + 1) != 0) ::_exit(124);

    ::setenv(threads_env_.c_str(), std::to_string(plan.workload.threads).c_str(), 1);
    for (const auto& [k, v] : plan.workload.env) ::setenv(k.c_str(), v.c_str(), 1);

    if (!plan.workload.command.empty()) {
      std::vector<char*> argv;
      for (const auto& arg : plan.workload.command) argv.push_back(const_cast<char*>(arg.c_str()));
      argv.push_back(nullptr);
      ::execvp(argv[0], argv.data());
      ::_exit(126);  // exec failed
    }
    ::_exit(run_builtin_kernel(plan.workload.builtin));
  }
#endif

  std::string threads_env_;
  std::string node_probe_path_;
};

}  // namespace memwatt
