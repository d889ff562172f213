#pragma once

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ibft/checks.hpp"
#include "ibft/scenario.hpp"
#include "ibft/trace.hpp"

namespace ibft {

struct DecisionRecord {
  InstanceId instance;
  Value value;
  SimTime time = 0;
  Round round;
  bool operator==(const DecisionRecord&) const = default;
};

// Everything here is a fold over the trace (plus the scenario's beta and bound).
struct RunReport {
  std::map<ProcessId, std::vector<DecisionRecord>> decided;
  std::map<std::string, std::uint64_t> sends_by_type;
  std::map<std::uint64_t, std::uint64_t> sends_by_round;
  std::uint64_t total_sends = 0;
  std::uint64_t drops = 0;
  std::optional<SimTime> last_decision_time;  // instance 0, correct processes
  std::optional<double> latency_in_delays;    // only under a fixed per-hop delay
  std::uint64_t rounds_used = 1;
  bool terminated = false;
  std::uint64_t digest = 0;
  std::vector<Verdict> verdicts;

  bool all_pass() const {
    for (const auto& v : verdicts) {
      if (!v.pass) return false;
    }
    return true;
  }

  const Verdict* verdict(std::string_view name) const {
    for (const auto& v : verdicts) {
      if (v.name == name) return &v;
    }
    return nullptr;
  }
};

inline RunReport make_report(const RunTrace& trace, const Scenario& s) {
  RunReport rep;
  const auto header = read_header(trace);
  auto correct = [&](const TraceRecord& r) { return r.process && (!header || header->correct(*r.process)); };

  for (const auto& r : trace.records()) {
    switch (r.kind) {
      case RecordKind::send: {
        ++rep.total_sends;
        ++rep.sends_by_type[std::string(field(r.detail, "type").value_or("?"))];
        ++rep.sends_by_round[field_u64(r.detail, "r").value_or(0)];
        break;
      }
      case RecordKind::drop: ++rep.drops; break;
      case RecordKind::rule_fire: {
        if (!correct(r)) break;
        const auto rule = field(r.detail, "rule").value_or("");
        if (rule == "R4" || rule == "R5") {
          rep.rounds_used = std::max(rep.rounds_used, field_u64(r.detail, "r").value_or(1));
        }
        break;
      }
      case RecordKind::decide: {
        if (!correct(r)) break;
        DecisionRecord d{InstanceId{field_u64(r.detail, "l").value_or(0)},
                         unescape_value(field(r.detail, "v").value_or("")), r.time,
                         Round{field_u64(r.detail, "r").value_or(1)}};
        rep.rounds_used = std::max(rep.rounds_used, d.round.value);
        if (d.instance.value == 0) {
          rep.last_decision_time = std::max(rep.last_decision_time.value_or(0), r.time);
        }
        rep.decided[*r.process].push_back(std::move(d));
        break;
      }
      case RecordKind::halt:
        rep.terminated = field(r.detail, "terminated").value_or("0") == "1";
        break;
      default: break;
    }
  }
  if (header && header->fixed_delay && header->delta > 0 && rep.last_decision_time) {
    rep.latency_in_delays = static_cast<double>(*rep.last_decision_time) / static_cast<double>(header->delta);
  }
  rep.digest = trace.digest();

  const SystemConfig config = s.system_config();
  rep.verdicts.push_back(check_agreement(trace));
  rep.verdicts.push_back(check_validity(trace, [&](const Value& v) { return config.beta(v); }));
  rep.verdicts.push_back(check_termination(trace, s));
  rep.verdicts.push_back(check_prepared_consistency(trace));
  rep.verdicts.push_back(check_post_gst_delivery(trace, s.net));
  return rep;
}

inline nlohmann::json summary_json(const RunReport& rep) {
  nlohmann::json j;
  j["terminated"] = rep.terminated;
  j["total_sends"] = rep.total_sends;
  j["rounds_used"] = rep.rounds_used;
  j["digest"] = hex64(rep.digest);
  j["latency_in_delays"] = rep.latency_in_delays ? nlohmann::json(*rep.latency_in_delays) : nlohmann::json();
  j["decided_processes"] = rep.decided.size();
  nlohmann::json verdicts = nlohmann::json::object();
  for (const auto& v : rep.verdicts) verdicts[v.name] = v.pass;
  j["verdicts"] = verdicts;
  return j;
}

// `metric<TAB>name<TAB>value` and `verdict<TAB>name<TAB>pass|fail` lines,
// closed by a one-line JSON summary.
inline std::string format_report(const RunReport& rep) {
  std::ostringstream os;
  os << "metric\tterminated\t" << (rep.terminated ? 1 : 0) << '\n';
  os << "metric\tsends_total\t" << rep.total_sends << '\n';
  for (const auto& [type, count] : rep.sends_by_type) os << "metric\tsends_" << type << '\t' << count << '\n';
  for (const auto& [round, count] : rep.sends_by_round) os << "metric\tsends_round_" << round << '\t' << count << '\n';
  os << "metric\tdrops\t" << rep.drops << '\n';
  os << "metric\trounds_used\t" << rep.rounds_used << '\n';
  if (rep.last_decision_time) os << "metric\tdecision_time\t" << *rep.last_decision_time << '\n';
  if (rep.latency_in_delays) os << "metric\tlatency_in_delays\t" << *rep.latency_in_delays << '\n';
  for (const auto& [p, ds] : rep.decided) {
    for (const auto& d : ds) {
      os << "metric\tdecide_" << format_process(p) << "_l" << d.instance.value << '\t' << escape_value(d.value)
         << "@t=" << d.time << ",r=" << d.round.value << '\n';
    }
  }
  os << "metric\tdigest\t" << hex64(rep.digest) << '\n';
  for (const auto& v : rep.verdicts) {
    os << "verdict\t" << v.name << '\t' << (v.pass ? "pass" : "fail");
    if (!v.detail.empty()) os << '\t' << v.detail;
    os << '\n';
  }
  os << "summary\t" << summary_json(rep).dump() << '\n';
  return os.str();
}

}  // namespace ibft
