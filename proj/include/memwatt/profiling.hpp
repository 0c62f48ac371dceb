// Measurement matrix orchestration: for each (workload, target, threads,
// rep) cell — plan the binding, start a sampling activity, execute, stop,
// reduce to a ProfileRecord. Cells are strictly serialized; the method
// attributes the whole memory-plane counter to the one bound workload, so
// two concurrent cells would contaminate each other.
#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "memwatt/binding.hpp"
#include "memwatt/errors.hpp"
#include "memwatt/sampling.hpp"
#include "memwatt/sampling_live.hpp"
#include "memwatt/text.hpp"
#include "memwatt/topology.hpp"

namespace memwatt {

struct ProfileRecord {
  std::string app;
  std::string size_label;
  std::string kind;  // MemoryTarget name
  int threads = 1;
  int rep = 0;
  double duration_s = 0.0;
  double energy_j = 0.0;
  double avg_power_w = 0.0;
  int socket = 0;
  CounterSubdomain subdomain = CounterSubdomain::DRAM;

  bool operator==(const ProfileRecord&) const = default;

  std::string qualified_app() const {
    return size_label.empty() ? app : app + "." + size_label;
  }

  void validate() const {
    if (duration_s <= 0) throw invariant_error(cell_label() + ": duration_s must be positive");
    if (energy_j < 0) throw invariant_error(cell_label() + ": energy_j must be >= 0");
    if (avg_power_w < 0) throw invariant_error(cell_label() + ": avg_power_w must be >= 0");
    double expected = energy_j / duration_s;
    double scale = std::max(std::abs(expected), std::abs(avg_power_w));
    if (std::abs(avg_power_w - expected) > 1e-9 * std::max(scale, 1e-300))
      throw invariant_error(cell_label() + ": avg_power_w inconsistent with energy/duration");
  }

  std::string cell_label() const {
    return qualified_app() + "/" + kind + "/t" + std::to_string(threads) + "/r" +
           std::to_string(rep);
  }
};

struct ResultSet {
  std::vector<ProfileRecord> records;
  // Run metadata: backend, seed, topology id, model hash, failed cells
  // ("failed.<cell>" -> message), aggregation spread ("stddev.<group>").
  std::map<std::string, std::string> provenance;

  bool operator==(const ResultSet&) const = default;
};

// Failed cells recorded by run_matrix, recovered from provenance.
inline std::vector<std::pair<std::string, std::string>> failed_cells(const ResultSet& rs) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [k, v] : rs.provenance)
    if (k.rfind("failed.", 0) == 0) out.emplace_back(k.substr(7), v);
  return out;
}

// --- sampler backends -------------------------------------------------------

// A sampling activity brackets exactly one cell execution.
class SamplingActivity {
 public:
  virtual ~SamplingActivity() = default;
  // Finish sampling; the run handle supplies the simulated duration for
  // backends that have no clock of their own.
  virtual EnergyTrace stop(const RunHandle& run) = 0;
};

class SamplerBackend {
 public:
  virtual ~SamplerBackend() = default;
  virtual std::string name() const = 0;
  virtual std::unique_ptr<SamplingActivity> start(const BindingPlan& plan,
                                                  std::uint64_t cell_seed) = 0;
};

// Generates traces from a SyntheticPowerModel. The model key is the
// application-qualified kind when the model pins that cell, otherwise the
// plain kind name.
class SyntheticSampler final : public SamplerBackend {
 public:
  explicit SyntheticSampler(SyntheticPowerModel model) : model_(std::move(model)) {}

  std::string name() const override { return "synthetic"; }

  const SyntheticPowerModel& model() const { return model_; }

  std::unique_ptr<SamplingActivity> start(const BindingPlan& plan,
                                          std::uint64_t cell_seed) override {
    class Activity final : public SamplingActivity {
     public:
      Activity(const SyntheticPowerModel& model, BindingPlan plan, std::uint64_t seed)
          : model_(model), plan_(std::move(plan)), seed_(seed) {}

      EnergyTrace stop(const RunHandle& run) override {
        const std::string app = plan_.workload.qualified_name();
        const std::string& kind = plan_.target.name;
        std::string key = model_.find(app + ":" + kind) ? app + ":" + kind : kind;
        double duration = run.duration_s > 0 ? run.duration_s : model_.duration_s;
        EnergyTrace trace = synthetic_trace(model_, key, plan_.workload.threads, duration,
                                            model_.period_s, seed_);
        trace.domain.socket = plan_.target.home_socket;
        trace.meta["workload"] = app;
        trace.meta["target"] = kind;
        return trace;
      }

     private:
      const SyntheticPowerModel& model_;
      BindingPlan plan_;
      std::uint64_t seed_;
    };
    return std::make_unique<Activity>(model_, plan, cell_seed);
  }

 private:
  SyntheticPowerModel model_;
};

// Replays a recorded counter CSV: every cell observes the recorded trace,
// preferring the DRAM subdomain on the plan's home socket. Meant for
// single-cell runs and for pushing recorded data through the pipeline.
class CsvReplaySampler final : public SamplerBackend {
 public:
  explicit CsvReplaySampler(const std::string& csv_text)
      : traces_(parse_counter_csv(csv_text)) {
    if (traces_.empty()) throw error("counter CSV contains no samples");
  }

  std::string name() const override { return "counter-csv"; }

  std::unique_ptr<SamplingActivity> start(const BindingPlan& plan, std::uint64_t) override {
    const EnergyTrace* best = nullptr;
    for (const auto& t : traces_) {
      if (t.domain.subdomain != CounterSubdomain::DRAM) continue;
      if (t.domain.socket == plan.target.home_socket) {
        best = &t;
        break;
      }
      if (!best) best = &t;
    }
    if (!best) best = &traces_.front();

    class Activity final : public SamplingActivity {
     public:
      Activity(EnergyTrace trace, BindingPlan plan) : trace_(std::move(trace)), plan_(std::move(plan)) {}
      EnergyTrace stop(const RunHandle&) override {
        trace_.meta["backend"] = "counter-csv";
        trace_.meta["workload"] = plan_.workload.qualified_name();
        trace_.meta["target"] = plan_.target.name;
        return std::move(trace_);
      }

     private:
      EnergyTrace trace_;
      BindingPlan plan_;
    };
    return std::make_unique<Activity>(*best, plan);
  }

 private:
  std::vector<EnergyTrace> traces_;
};

// Live RAPL-backed sampler over the powercap tree.
class PowercapSampler final : public SamplerBackend {
 public:
  explicit PowercapSampler(double period_s = 0.1, const std::string& root = "/sys/class/powercap")
      : period_s_(period_s), domains_(discover_powercap_domains(root)) {}

  std::string name() const override { return "powercap"; }

  bool supported() const { return !domains_.empty(); }

  std::unique_ptr<SamplingActivity> start(const BindingPlan& plan, std::uint64_t) override {
    const PowercapDomain* best = nullptr;
    for (const auto& d : domains_) {
      if (d.domain.socket != plan.target.home_socket) continue;
      if (d.domain.subdomain == CounterSubdomain::DRAM) {
        best = &d;
        break;
      }
      if (!best) best = &d;  // PACKAGE fallback when no dram zone exists
    }
    if (!best) throw exec_error("no powercap domain for socket " +
                                std::to_string(plan.target.home_socket));

    class Activity final : public SamplingActivity {
     public:
      Activity(const PowercapDomain& domain, double period_s, BindingPlan plan)
          : inner_(domain, period_s), plan_(std::move(plan)) {}
      EnergyTrace stop(const RunHandle&) override {
        EnergyTrace trace = inner_.stop();
        trace.meta["workload"] = plan_.workload.qualified_name();
        trace.meta["target"] = plan_.target.name;
        return trace;
      }

     private:
      PowercapActivity inner_;
      BindingPlan plan_;
    };
    return std::make_unique<Activity>(*best, period_s_, plan);
  }

 private:
  double period_s_;
  std::vector<PowercapDomain> domains_;
};

// --- matrix ----------------------------------------------------------------

// One record per (workload, target, threads, rep) in that iteration order.
// A failed cell is excluded from the records and retained in provenance;
// it never aborts the rest of the matrix.
inline ResultSet run_matrix(const Topology& topo, std::span<const MemoryTarget> targets,
                            std::span<const WorkloadSpec> workloads,
                            std::span<const int> thread_counts, int reps,
                            ExecutionAdapter& adapter, SamplerBackend& sampler,
                            std::uint64_t seed) {
  if (targets.empty()) throw argument_error("run_matrix: no targets");
  if (workloads.empty()) throw argument_error("run_matrix: no workloads");
  if (thread_counts.empty()) throw argument_error("run_matrix: no thread counts");
  if (reps < 1) throw argument_error("run_matrix: reps must be >= 1");

  ResultSet rs;
  rs.provenance["backend"] = sampler.name();
  rs.provenance["adapter"] = adapter.name();
  rs.provenance["seed"] = std::to_string(seed);

  int failures = 0;
  for (const auto& workload : workloads) {
    for (const auto& target : targets) {
      for (int threads : thread_counts) {
        for (int rep = 0; rep < reps; ++rep) {
          WorkloadSpec cell_workload = workload;
          cell_workload.threads = threads;

          ProfileRecord record;
          record.app = workload.name;
          record.size_label = workload.size_label;
          record.kind = target.name;
          record.threads = threads;
          record.rep = rep;

          std::uint64_t cell_seed =
              mix_seed(seed, fnv1a(record.cell_label()));
          try {
            BindingPlan plan = plan_binding(topo, target, cell_workload);
            auto activity = sampler.start(plan, cell_seed);
            RunHandle run = adapter.execute(plan);
            EnergyTrace trace = activity->stop(run);
            if (!run.ok())
              throw exec_error(run.error.empty()
                                   ? "exit status " + std::to_string(run.exit_code)
                                   : run.error);
            if (trace.samples.size() < 2)
              throw exec_error("trace too short (" + std::to_string(trace.samples.size()) +
                               " samples)");
            record.duration_s = trace_duration_s(trace);
            record.energy_j = trace_energy_joules(trace);
            record.avg_power_w = average_power(trace);
            record.socket = trace.domain.socket;
            record.subdomain = trace.domain.subdomain;
            record.validate();
            rs.records.push_back(std::move(record));
          } catch (const error& e) {
            ++failures;
            std::string msg = e.what();
            for (auto& c : msg)
              if (c == '\n') c = ' ';
            rs.provenance["failed." + record.cell_label()] = msg;
          }
        }
      }
    }
  }
  rs.provenance["cells"] =
      std::to_string(workloads.size() * targets.size() * thread_counts.size() *
                     static_cast<std::size_t>(reps));
  rs.provenance["failures"] = std::to_string(failures);
  return rs;
}

// Collapses repetitions: per (app, size, kind, threads) the mean power and
// mean duration, rep index 0, energy re-derived so the power invariant
// stays exact. Sample standard deviation of the power lands in provenance.
inline ResultSet aggregate_reps(const ResultSet& rs) {
  ResultSet out;
  out.provenance = rs.provenance;

  struct Group {
    ProfileRecord base;
    std::vector<double> powers;
    std::vector<double> durations;
  };
  std::vector<Group> groups;  // stable first-appearance order
  std::map<std::string, std::size_t> index;

  for (const auto& r : rs.records) {
    std::string key = r.qualified_app() + "/" + r.kind + "/t" + std::to_string(r.threads);
    auto [it, inserted] = index.emplace(key, groups.size());
    if (inserted) {
      Group g;
      g.base = r;
      groups.push_back(std::move(g));
    }
    Group& g = groups[it->second];
    g.powers.push_back(r.avg_power_w);
    g.durations.push_back(r.duration_s);
  }

  for (const auto& g : groups) {
    ProfileRecord r = g.base;
    r.rep = 0;
    double n = static_cast<double>(g.powers.size());
    double mean_power = 0;
    for (double p : g.powers) mean_power += p;
    mean_power /= n;
    double mean_duration = 0;
    for (double d : g.durations) mean_duration += d;
    mean_duration /= n;
    r.avg_power_w = mean_power;
    r.duration_s = mean_duration;
    r.energy_j = mean_power * mean_duration;
    out.records.push_back(r);

    if (g.powers.size() > 1) {
      double ss = 0;
      for (double p : g.powers) ss += (p - mean_power) * (p - mean_power);
      double sd = std::sqrt(ss / (n - 1));
      out.provenance["stddev." + r.qualified_app() + "/" + r.kind + "/t" +
                     std::to_string(r.threads)] = format_double(sd);
    }
  }
  return out;
}

// --- results file ----------------------------------------------------------
//
//   #memwatt.results v1
//   #provenance <key>=<value>          (sorted by key)
//   app,size,kind,threads,rep,duration_s,energy_j,avg_power_w,socket,subdomain
//   <one CSV record per line>
//
// Floats use the shortest round-trip form, so load/save is byte-stable.

inline constexpr const char* kResultsVersionLine = "#memwatt.results v1";
inline constexpr const char* kResultsColumnsLine =
    "app,size,kind,threads,rep,duration_s,energy_j,avg_power_w,socket,subdomain";

namespace detail {

inline void check_field_text(const std::string& value, const char* field) {
  if (value.find(',') != std::string::npos || value.find('\n') != std::string::npos)
    throw error(std::string("results: field ") + field + " must not contain ',' or newline");
}

}  // namespace detail

inline std::string save_results(const ResultSet& rs) {
  std::string out = kResultsVersionLine;
  out += '\n';
  for (const auto& [k, v] : rs.provenance) {
    if (k.find('\n') != std::string::npos || v.find('\n') != std::string::npos)
      throw error("results: provenance entries must not contain newlines");
    if (k.find('=') != std::string::npos)
      throw error("results: provenance keys must not contain '='");
    out += "#provenance " + k + "=" + v + "\n";
  }
  out += kResultsColumnsLine;
  out += '\n';
  for (const auto& r : rs.records) {
    detail::check_field_text(r.app, "app");
    detail::check_field_text(r.size_label, "size");
    detail::check_field_text(r.kind, "kind");
    out += r.app + ',' + r.size_label + ',' + r.kind + ',' + std::to_string(r.threads) + ',' +
           std::to_string(r.rep) + ',' + format_double(r.duration_s) + ',' +
           format_double(r.energy_j) + ',' + format_double(r.avg_power_w) + ',' +
           std::to_string(r.socket) + ',' + std::string(to_string(r.subdomain)) + '\n';
  }
  return out;
}

inline ResultSet load_results(const std::string& text) {
  ResultSet rs;
  auto lines = split_lines(text);
  if (lines.empty()) return rs;  // empty document -> empty set

  std::size_t i = 0;
  if (lines[i] != kResultsVersionLine)
    throw parse_error(1, std::string("expected version line \"") + kResultsVersionLine + "\"");
  ++i;
  for (; i < lines.size() && lines[i].rfind("#provenance ", 0) == 0; ++i) {
    std::string_view body = lines[i].substr(12);
    auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw parse_error(i + 1, "provenance line missing '='");
    rs.provenance.emplace(std::string(body.substr(0, eq)), std::string(body.substr(eq + 1)));
  }
  if (i >= lines.size() || lines[i] != kResultsColumnsLine)
    throw parse_error(i + 1, std::string("expected column header \"") + kResultsColumnsLine + "\"");
  ++i;

  std::map<std::string, std::size_t> seen;
  for (; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    auto fields = split(lines[i], ',');
    if (fields.size() != 10) throw parse_error(lineno, "expected 10 fields");
    ProfileRecord r;
    r.app = std::string(fields[0]);
    r.size_label = std::string(fields[1]);
    r.kind = std::string(fields[2]);
    auto threads = try_parse_int<int>(fields[3]);
    auto rep = try_parse_int<int>(fields[4]);
    auto duration = try_parse_double(fields[5]);
    auto energy = try_parse_double(fields[6]);
    auto power = try_parse_double(fields[7]);
    auto socket = try_parse_int<int>(fields[8]);
    if (!threads || !rep || !duration || !energy || !power || !socket)
      throw parse_error(lineno, "malformed record");
    r.threads = *threads;
    r.rep = *rep;
    r.duration_s = *duration;
    r.energy_j = *energy;
    r.avg_power_w = *power;
    r.socket = *socket;
    try {
      r.subdomain = subdomain_from_string(fields[9]);
      r.validate();
    } catch (const error& e) {
      throw parse_error(lineno, e.what());
    }
    std::string key = r.cell_label();
    auto [it, inserted] = seen.emplace(key, lineno);
    if (!inserted)
      throw parse_error(lineno, "duplicate record " + key + " (first at line " +
                                    std::to_string(it->second) + ")");
    rs.records.push_back(std::move(r));
  }
  return rs;
}

}  // namespace memwatt
