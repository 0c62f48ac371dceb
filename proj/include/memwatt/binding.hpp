// Binding plans: confine a whole process's CPUs and memory pages so one
// memory kind receives all of its traffic. CPUs always stay on the target's
// home socket while the memory node set follows the target — placing memory
// on another socket's node is what emulates a remote memory kind.
#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "memwatt/errors.hpp"
#include "memwatt/text.hpp"
#include "memwatt/topology.hpp"

namespace memwatt {

// Environment variable used to hand the thread count to the workload.
// Overridable on adapters that launch real processes.
inline constexpr const char* kDefaultThreadsEnv = "OMP_NUM_THREADS";

struct WorkloadSpec {
  std::string name;        // e.g. "FT"
  std::string size_label;  // e.g. "A", "400", "large"
  int threads = 1;
  std::vector<std::string> command;  // external argv; empty when builtin is used
  std::string builtin;               // builtin kernel id; empty when command is used
  std::map<std::string, std::string> env;

  std::string qualified_name() const {
    return size_label.empty() ? name : name + "." + size_label;
  }

  void validate() const {
    if (threads < 1) throw argument_error("workload " + name + ": threads must be >= 1");
    if (command.empty() == builtin.empty())
      throw argument_error("workload " + name +
                           ": exactly one of command / builtin must be set");
  }
};

enum class BindPolicy { STRICT_BIND };

struct BindingPlan {
  WorkloadSpec workload;
  MemoryTarget target;
  std::set<int> cpu_set;
  std::set<int> memory_nodes;
  BindPolicy policy = BindPolicy::STRICT_BIND;
};

// cpu_set is every CPU local to the target's home socket regardless of the
// target's locality; memory_nodes is exactly the target node.
inline BindingPlan plan_binding(const Topology& topo, const MemoryTarget& target,
                                const WorkloadSpec& workload) {
  workload.validate();
  if (topo.find_node(target.node_id) == nullptr)
    throw argument_error("target node " + std::to_string(target.node_id) + " unknown");
  std::set<int> cpus = topo.socket_cpus(target.home_socket);
  if (cpus.empty())
    throw argument_error("home socket " + std::to_string(target.home_socket) + " has no cpus");

  BindingPlan plan;
  plan.workload = workload;
  plan.target = target;
  plan.cpu_set = std::move(cpus);
  plan.memory_nodes = {target.node_id};
  plan.policy = BindPolicy::STRICT_BIND;
  return plan;
}

// Canonical launcher directive; byte-stable for a given plan. Used verbatim
// in golden tests and by the dry-run adapter.
inline std::string render_plan(const BindingPlan& plan) {
  std::string cmd;
  if (!plan.workload.command.empty())
    cmd = join(plan.workload.command, " ");
  else
    cmd = "builtin:" + plan.workload.builtin;

  std::set<int> nodes = plan.memory_nodes;
  std::vector<std::string> node_strs;
  for (int n : nodes) node_strs.push_back(std::to_string(n));

  return "policy=STRICT_BIND cpus=" + compress_ranges(plan.cpu_set) +
         " membind=" + join(node_strs, ",") +
         " threads=" + std::to_string(plan.workload.threads) + " cmd=" + cmd;
}

struct RunHandle {
  std::string directive;
  double start_s = 0.0;     // epoch seconds; 0 for simulated runs
  double duration_s = 0.0;  // wall-clock runtime
  int exit_code = 0;
  std::string error;  // empty on success

  bool ok() const { return exit_code == 0 && error.empty(); }
};

class ExecutionAdapter {
 public:
  virtual ~ExecutionAdapter() = default;
  virtual std::string name() const = 0;
  // Nonzero exit status is surfaced in the handle, not thrown; launch
  // failures throw exec_error.
  virtual RunHandle execute(const BindingPlan& plan) = 0;
};

// Records directives and simulates runs of a configurable duration. The
// whole test suite runs on this adapter.
class DryRunAdapter final : public ExecutionAdapter {
 public:
  explicit DryRunAdapter(double duration_s = 1.0) : duration_s_(duration_s) {}

  std::string name() const override { return "dry-run"; }

  void inject_failure(int exit_code, std::string message) {
    inject_exit_ = exit_code;
    inject_message_ = std::move(message);
  }

  RunHandle execute(const BindingPlan& plan) override {
    RunHandle handle;
    handle.directive = render_plan(plan);
    handle.start_s = 0.0;
    handle.duration_s = duration_s_;
    handle.exit_code = inject_exit_;
    if (inject_exit_ != 0)
      handle.error = inject_message_.empty() ? "injected failure" : inject_message_;
    directives_.push_back(handle.directive);
    return handle;
  }

  const std::vector<std::string>& directives() const { return directives_; }

 private:
  double duration_s_;
  int inject_exit_ = 0;
  std::string inject_message_;
  std::vector<std::string> directives_;
};

}  // namespace memwatt
