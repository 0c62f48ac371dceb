// Energy counter sampling: cumulative-counter traces, wrap-aware delta
// accumulation, energy-to-power conversion, and the backend formats
// (counter CSV, perf text, synthetic model).
//
// All backends normalize to microjoules at ingestion; nothing downstream
// ever sees a native unit. At most one counter wrap is assumed between
// consecutive samples — a violation is undetectable by construction, so the
// sampling period must stay well below max_range_uj / peak watts.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "memwatt/errors.hpp"
#include "memwatt/json_util.hpp"
#include "memwatt/text.hpp"

namespace memwatt {

// Width of the common 32-bit energy-status counters.
inline constexpr std::uint64_t kDefaultEnergyRangeUj = 4294967295ull;  // 2^32 - 1

enum class CounterSubdomain { PACKAGE, DRAM };

inline std::string_view to_string(CounterSubdomain s) {
  return s == CounterSubdomain::PACKAGE ? "PACKAGE" : "DRAM";
}

inline CounterSubdomain subdomain_from_string(std::string_view s) {
  if (s == "PACKAGE") return CounterSubdomain::PACKAGE;
  if (s == "DRAM") return CounterSubdomain::DRAM;
  throw schema_error("unknown counter subdomain \"" + std::string(s) + "\"");
}

struct CounterDomain {
  int socket = 0;
  CounterSubdomain subdomain = CounterSubdomain::DRAM;
  // Raw counter value at which the counter wraps to 0 (inclusive).
  std::uint64_t max_range_uj = kDefaultEnergyRangeUj;

  bool operator==(const CounterDomain&) const = default;
};

struct EnergySample {
  double t_s = 0.0;            // monotonic seconds
  std::uint64_t raw_uj = 0;    // cumulative microjoules, in [0, max_range_uj]

  bool operator==(const EnergySample&) const = default;
};

struct EnergyTrace {
  CounterDomain domain;
  std::vector<EnergySample> samples;
  std::map<std::string, std::string> meta;  // backend, workload, target, ...

  bool operator==(const EnergyTrace&) const = default;

  // Enforces strictly increasing timestamps and the raw range on append.
  void append(double t_s, std::uint64_t raw_uj) {
    if (!samples.empty() && t_s <= samples.back().t_s)
      throw invariant_error("trace timestamps must strictly increase");
    if (raw_uj > domain.max_range_uj)
      throw argument_error("raw sample exceeds counter range");
    samples.push_back({t_s, raw_uj});
  }
};

// Delta between consecutive raw readings of a counter that wraps from
// max_range_uj to 0. Assumes at most one wrap occurred.
inline std::uint64_t unwrap_delta(std::uint64_t prev_raw, std::uint64_t cur_raw,
                                  std::uint64_t max_range_uj) {
  if (max_range_uj == 0) throw argument_error("max_range_uj must be positive");
  if (prev_raw > max_range_uj || cur_raw > max_range_uj)
    throw argument_error("raw counter value out of range");
  if (cur_raw >= prev_raw) return cur_raw - prev_raw;
  return (max_range_uj - prev_raw) + cur_raw + 1;
}

// Total unwrapped energy of a trace, in joules.
inline double trace_energy_joules(const EnergyTrace& trace) {
  std::uint64_t total_uj = 0;
  for (std::size_t i = 1; i < trace.samples.size(); ++i)
    total_uj += unwrap_delta(trace.samples[i - 1].raw_uj, trace.samples[i].raw_uj,
                             trace.domain.max_range_uj);
  // Division (not multiplication by 1e-6) keeps integral microjoule totals
  // exact in binary floating point.
  return static_cast<double>(total_uj) / 1e6;
}

inline double trace_duration_s(const EnergyTrace& trace) {
  if (trace.samples.size() < 2) return 0.0;
  return trace.samples.back().t_s - trace.samples.front().t_s;
}

// Average watts over the whole trace: unwrapped joules / elapsed seconds.
inline double average_power(const EnergyTrace& trace) {
  if (trace.samples.size() < 2)
    throw argument_error("average_power requires at least 2 samples");
  double dt = trace_duration_s(trace);
  if (dt <= 0.0) throw argument_error("average_power requires positive duration");
  return trace_energy_joules(trace) / dt;
}

// --- counter CSV ----------------------------------------------------------
//
// Interchange format for recorded counters. Header is fixed; one row per
// sample: t_s,socket,subdomain,energy_uj. Rows may interleave domains; a
// trace is formed per (socket, subdomain) pair. Domains carry the default
// counter range.

inline constexpr const char* kCounterCsvHeader = "t_s,socket,subdomain,energy_uj";

inline std::vector<EnergyTrace> parse_counter_csv(const std::string& text) {
  auto lines = split_lines(text);
  if (lines.empty() || lines[0] != kCounterCsvHeader)
    throw parse_error(1, std::string("expected header \"") + kCounterCsvHeader + "\"");

  std::map<std::pair<int, int>, EnergyTrace> traces;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    auto fields = split(lines[i], ',');
    if (fields.size() != 4) throw parse_error(lineno, "expected 4 fields");
    auto t = try_parse_double(fields[0]);
    if (!t) throw parse_error(lineno, "bad timestamp \"" + std::string(fields[0]) + "\"");
    auto socket = try_parse_int<int>(fields[1]);
    if (!socket || *socket < 0)
      throw parse_error(lineno, "bad socket \"" + std::string(fields[1]) + "\"");
    CounterSubdomain sub;
    try {
      sub = subdomain_from_string(fields[2]);
    } catch (const schema_error& e) {
      throw parse_error(lineno, e.what());
    }
    auto energy = try_parse_int<std::uint64_t>(fields[3]);
    if (!energy)
      throw parse_error(lineno, "bad energy_uj \"" + std::string(fields[3]) + "\"");

    auto key = std::make_pair(*socket, static_cast<int>(sub));
    auto [it, inserted] = traces.try_emplace(key);
    if (inserted) {
      it->second.domain.socket = *socket;
      it->second.domain.subdomain = sub;
    }
    EnergyTrace& trace = it->second;
    if (!trace.samples.empty() && *t <= trace.samples.back().t_s)
      throw parse_error(lineno, "non-increasing timestamp within domain");
    if (*energy > trace.domain.max_range_uj)
      throw parse_error(lineno, "energy_uj exceeds counter range");
    trace.samples.push_back({*t, *energy});
  }

  std::vector<EnergyTrace> out;
  for (auto& [key, trace] : traces) out.push_back(std::move(trace));
  return out;
}

// Canonical rendering: rows globally sorted by (t, socket, subdomain).
// parse_counter_csv(serialize_counter_csv(ts)) reproduces the traces
// (meta is not part of the format).
inline std::string serialize_counter_csv(std::span<const EnergyTrace> traces) {
  struct Row {
    double t;
    int socket;
    int sub;
    std::uint64_t uj;
  };
  std::vector<Row> rows;
  for (const auto& trace : traces)
    for (const auto& s : trace.samples)
      rows.push_back({s.t_s, trace.domain.socket,
                      static_cast<int>(trace.domain.subdomain), s.raw_uj});
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.socket != b.socket) return a.socket < b.socket;
    return a.sub < b.sub;
  });

  std::string out = kCounterCsvHeader;
  out += '\n';
  for (const auto& r : rows) {
    out += format_double(r.t);
    out += ',';
    out += std::to_string(r.socket);
    out += ',';
    out += to_string(static_cast<CounterSubdomain>(r.sub));
    out += ',';
    out += std::to_string(r.uj);
    out += '\n';
  }
  return out;
}

// --- perf text adapter ----------------------------------------------------

// Extracts "<number> Joules <event>" lines from perf stat output. Numbers
// may carry thousands separators ("1,234.56"). Repeated events (per-socket
// reports) are summed. No matching line at all is an error.
inline std::map<std::string, double> parse_perf_energy_output(const std::string& text) {
  std::map<std::string, double> out;
  auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::vector<std::string_view> tokens;
    for (auto tok : split(lines[i], ' '))
      if (!tok.empty()) {
        // also split on tabs
        for (auto sub : split(tok, '\t'))
          if (!sub.empty()) tokens.push_back(sub);
      }
    for (std::size_t k = 1; k + 1 < tokens.size(); ++k) {
      if (tokens[k] != "Joules") continue;
      std::string number(tokens[k - 1]);
      number.erase(std::remove(number.begin(), number.end(), ','), number.end());
      auto joules = try_parse_double(number);
      if (!joules)
        throw parse_error(i + 1, "unparseable number \"" + std::string(tokens[k - 1]) + "\"");
      out[std::string(tokens[k + 1])] += *joules;
      break;
    }
  }
  if (out.empty()) throw error("perf output: no energy lines found");
  return out;
}

// --- synthetic model ------------------------------------------------------

// Per-kind linear power family: P(threads) = base_w + slope_w_per_thread *
// threads + gaussian noise. Keys are plain kind names; a key may also be
// qualified per application ("BT.A:LocalDRAM") to pin a specific cell.
struct SyntheticKindParams {
  double base_w = 0.0;
  double slope_w_per_thread = 0.0;
  double noise_sigma_w = 0.0;

  bool operator==(const SyntheticKindParams&) const = default;
};

struct SyntheticPowerModel {
  std::map<std::string, SyntheticKindParams> kinds;
  double duration_s = 10.0;  // default run length for simulated executions
  double period_s = 1.0;     // sampling period
  std::uint64_t max_range_uj = kDefaultEnergyRangeUj;

  const SyntheticKindParams* find(const std::string& key) const {
    auto it = kinds.find(key);
    return it == kinds.end() ? nullptr : &it->second;
  }

  const SyntheticKindParams& require(const std::string& key) const {
    const SyntheticKindParams* p = find(key);
    if (!p) throw argument_error("unknown kind \"" + key + "\" in synthetic model");
    return *p;
  }

  // Prefers an application-qualified entry, falls back to the plain kind.
  const SyntheticKindParams& resolve(const std::string& app_qualified,
                                     const std::string& kind) const {
    if (const SyntheticKindParams* p = find(app_qualified + ":" + kind)) return *p;
    return require(kind);
  }

  static SyntheticPowerModel from_json(const std::string& text) {
    using detail::json;
    json j = detail::parse_json(text, "synthetic model");
    detail::check_fields(j, "synthetic model", {"kinds"},
                         {"duration_s", "period_s", "max_range_uj"});
    SyntheticPowerModel model;
    if (j.contains("duration_s")) model.duration_s = detail::get_number(j, "duration_s", "synthetic model");
    if (j.contains("period_s")) model.period_s = detail::get_number(j, "period_s", "synthetic model");
    if (j.contains("max_range_uj"))
      model.max_range_uj = detail::get_uint64(j, "max_range_uj", "synthetic model");
    if (model.duration_s <= 0 || model.period_s <= 0)
      throw schema_error("synthetic model: duration_s and period_s must be positive");
    if (model.max_range_uj == 0)
      throw schema_error("synthetic model: max_range_uj must be positive");
    detail::expect_object(j.at("kinds"), "synthetic model kinds");
    for (auto it = j.at("kinds").begin(); it != j.at("kinds").end(); ++it) {
      const std::string ctx = "kind \"" + it.key() + "\"";
      detail::check_fields(*it, ctx, {"base_w"}, {"slope_w_per_thread", "noise_sigma_w"});
      SyntheticKindParams p;
      p.base_w = detail::get_number(*it, "base_w", ctx);
      if (it->contains("slope_w_per_thread"))
        p.slope_w_per_thread = detail::get_number(*it, "slope_w_per_thread", ctx);
      if (it->contains("noise_sigma_w")) {
        p.noise_sigma_w = detail::get_number(*it, "noise_sigma_w", ctx);
        if (p.noise_sigma_w < 0) throw schema_error(ctx + ": noise_sigma_w must be >= 0");
      }
      model.kinds.emplace(it.key(), p);
    }
    return model;
  }

  std::string to_json() const {
    using detail::json;
    json j;
    j["duration_s"] = duration_s;
    j["period_s"] = period_s;
    j["max_range_uj"] = max_range_uj;
    j["kinds"] = json::object();
    for (const auto& [key, p] : kinds) {
      json pj;
      pj["base_w"] = p.base_w;
      pj["slope_w_per_thread"] = p.slope_w_per_thread;
      pj["noise_sigma_w"] = p.noise_sigma_w;
      j["kinds"][key] = std::move(pj);
    }
    return j.dump(2);
  }
};

namespace detail {

// splitmix64; fully specified so traces are reproducible across platforms.
class SyntheticRng {
 public:
  explicit SyntheticRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  double next_unit() {  // (0, 1]
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Box-Muller; zero-mean, unit variance.
  double next_gaussian() {
    double u1 = next_unit();
    double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793 * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace detail

// Deterministic trace for one (kind, threads) cell: instantaneous power is
// held per period, integrated into a cumulative microjoule counter, and
// wrapped at max_range_uj like real hardware. sigma == 0 never touches the
// RNG, so constant models integrate exactly.
inline EnergyTrace synthetic_trace(const SyntheticPowerModel& model, const std::string& kind,
                                   int threads, double duration_s, double period_s,
                                   std::uint64_t seed) {
  const SyntheticKindParams& params = model.require(kind);
  if (duration_s <= 0) throw argument_error("duration_s must be positive");
  if (period_s <= 0) throw argument_error("period_s must be positive");
  if (threads < 1) throw argument_error("threads must be >= 1");

  EnergyTrace trace;
  trace.domain.socket = 0;
  trace.domain.subdomain = CounterSubdomain::DRAM;
  trace.domain.max_range_uj = model.max_range_uj;
  trace.meta["backend"] = "synthetic";
  trace.meta["kind"] = kind;

  detail::SyntheticRng rng(seed);
  const std::uint64_t modulus = model.max_range_uj + 1;  // counter wraps range -> 0
  const double mean_w = params.base_w + params.slope_w_per_thread * threads;

  double cumulative_uj = 0.0;
  trace.append(0.0, 0);
  double t = 0.0;
  while (t < duration_s) {
    double t_next = std::min(t + period_s, duration_s);
    double watts = mean_w;
    if (params.noise_sigma_w > 0) watts += params.noise_sigma_w * rng.next_gaussian();
    if (watts < 0) watts = 0;  // cumulative counters never decrease
    cumulative_uj += watts * (t_next - t) * 1e6;
    std::uint64_t wide = static_cast<std::uint64_t>(std::llround(cumulative_uj));
    trace.append(t_next, modulus == 0 ? wide : wide % modulus);
    t = t_next;
  }
  return trace;
}

}  // namespace memwatt
