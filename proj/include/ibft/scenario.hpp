#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ibft/adversary.hpp"
#include "ibft/core.hpp"
#include "ibft/trace.hpp"

namespace ibft {

enum class DelayMode : std::uint8_t { uniform, fixed };

// Partial-synchrony network model.
struct NetConfig {
  SimTime gst = 0;
  Duration delta = 100;
  double pre_gst_drop_probability = 0.0;
  Duration pre_gst_max_delay = 1000;
  std::uint64_t seed = 0;
  DelayMode delay_mode = DelayMode::uniform;
  // Before GST, every message to or from these processes is lost.
  std::vector<ProcessId> isolated;
};

struct Bound {
  SimTime max_time = 10'000'000;
  std::uint64_t max_events = 2'000'000;
};

struct Scenario {
  std::uint32_t n = 4;
  std::uint32_t f = 1;
  Duration base_timeout = 1000;
  std::uint64_t instances = 1;
  NetConfig net;
  std::vector<AdversarySpec> adversaries;
  std::vector<Value> beta_reject;  // empty: beta is always true
  Bound bound;

  bool faulty(ProcessId p) const {
    return std::any_of(adversaries.begin(), adversaries.end(),
                       [&](const AdversarySpec& a) { return a.process == p; });
  }

  SystemConfig system_config() const {
    if (beta_reject.empty()) return SystemConfig(n, f);
    auto rejected = beta_reject;
    return SystemConfig(n, f, [rejected](const Value& v) {
      return std::find(rejected.begin(), rejected.end(), v) == rejected.end();
    });
  }
};

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws ScenarioError naming the violated constraint.
inline void validate(const Scenario& s) {
  if (s.n < 1) throw ScenarioError("n >= 1 violated");
  if (static_cast<std::uint64_t>(s.n) < 3ULL * s.f + 1) throw ScenarioError("n ≥ 3f+1 violated");
  if (s.adversaries.size() > s.f) throw ScenarioError("more adversaries than f");
  std::set<ProcessId> seen;
  for (const auto& a : s.adversaries) {
    if (a.process.index >= s.n) throw ScenarioError("adversary process out of range");
    if (!seen.insert(a.process).second) throw ScenarioError("duplicate adversary process");
    if (const auto* e = std::get_if<EquivocatingLeader>(&a.strategy); e && e->values.empty()) {
      throw ScenarioError("equivocate needs at least one value");
    }
  }
  for (const auto& p : s.net.isolated) {
    if (p.index >= s.n) throw ScenarioError("isolated process out of range");
  }
  if (s.net.delta == 0) throw ScenarioError("delta > 0 violated");
  if (s.base_timeout == 0) throw ScenarioError("base_timeout > 0 violated");
  if (s.net.pre_gst_max_delay == 0) throw ScenarioError("pre_gst_max_delay > 0 violated");
  if (!(s.net.pre_gst_drop_probability >= 0.0 && s.net.pre_gst_drop_probability <= 1.0)) {
    throw ScenarioError("drop_probability must lie in [0,1]");
  }
  if (s.instances < 1) throw ScenarioError("instances >= 1 violated");
  if (s.bound.max_time == 0 || s.bound.max_events == 0) throw ScenarioError("bound must be finite and positive");
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::uint64_t scenario_u64(std::string_view key, std::string_view v) {
  auto x = parse_u64(v);
  if (!x) throw ScenarioError("invalid integer for '" + std::string(key) + "': " + std::string(v));
  return *x;
}

inline std::uint32_t scenario_u32(std::string_view key, std::string_view v) {
  auto x = scenario_u64(key, v);
  if (x > UINT32_MAX) throw ScenarioError("value out of range for '" + std::string(key) + "'");
  return static_cast<std::uint32_t>(x);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t end = s.find(sep, pos);
    if (end == std::string_view::npos) {
      out.push_back(s.substr(pos));
      return out;
    }
    out.push_back(s.substr(pos, end - pos));
    pos = end + 1;
  }
}

inline Strategy parse_strategy(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view name = text.substr(0, colon);
  const std::string_view args = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  if (name == "silent") return Silent{};
  if (name == "crash") return CrashAfter{scenario_u64("crash", args)};
  if (name == "random") return RandomByzantine{scenario_u64("random", args)};
  if (name == "equivocate") {
    EquivocatingLeader e;
    for (auto v : split(args, ',')) {
      if (!v.empty()) e.values.push_back(unescape_value(v));
    }
    return e;
  }
  if (name == "stale") {
    auto parts = split(args, ',');
    if (parts.size() != 2) throw ScenarioError("stale needs <round>,<value>");
    const auto r = scenario_u64("stale", parts[0]);
    if (r < 1) throw ScenarioError("stale round must be >= 1");
    return StaleClaim{Round{r}, unescape_value(parts[1])};
  }
  throw ScenarioError("unknown adversary strategy '" + std::string(name) + "'");
}

inline ProcessId scenario_process(std::string_view key, std::string_view v) {
  if (!v.empty() && v.front() == 'p') v.remove_prefix(1);
  return ProcessId{scenario_u32(key, v)};
}

}  // namespace detail

// `key=value` lines, `#` starts a comment. Unknown keys are rejected.
inline Scenario parse_scenario(std::string_view text) {
  Scenario s;
  bool f_given = false;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ScenarioError("line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string_view key = detail::trim(line.substr(0, eq));
    const std::string_view val = detail::trim(line.substr(eq + 1));

    if (key == "n") {
      s.n = detail::scenario_u32(key, val);
    } else if (key == "f") {
      s.f = detail::scenario_u32(key, val);
      f_given = true;
    } else if (key == "gst") {
      s.net.gst = detail::scenario_u64(key, val);
    } else if (key == "delta") {
      s.net.delta = detail::scenario_u64(key, val);
    } else if (key == "base_timeout") {
      s.base_timeout = detail::scenario_u64(key, val);
    } else if (key == "seed") {
      s.net.seed = detail::scenario_u64(key, val);
    } else if (key == "instances") {
      s.instances = detail::scenario_u64(key, val);
    } else if (key == "drop_probability") {
      try {
        std::size_t used = 0;
        s.net.pre_gst_drop_probability = std::stod(std::string(val), &used);
        if (used != val.size()) throw ScenarioError("invalid number for 'drop_probability'");
      } catch (const std::logic_error&) {
        throw ScenarioError("invalid number for 'drop_probability'");
      }
    } else if (key == "pre_gst_max_delay") {
      s.net.pre_gst_max_delay = detail::scenario_u64(key, val);
    } else if (key == "delay") {
      if (val == "fixed") {
        s.net.delay_mode = DelayMode::fixed;
      } else if (val == "uniform") {
        s.net.delay_mode = DelayMode::uniform;
      } else {
        throw ScenarioError("delay must be fixed or uniform");
      }
    } else if (key == "isolate") {
      s.net.isolated.push_back(detail::scenario_process(key, val));
    } else if (key == "byzantine") {
      const auto colon = val.find(':');
      if (colon == std::string_view::npos) throw ScenarioError("byzantine expects <process>:<strategy>");
      s.adversaries.push_back(
          {detail::scenario_process(key, val.substr(0, colon)), detail::parse_strategy(val.substr(colon + 1))});
    } else if (key == "beta_reject") {
      s.beta_reject.push_back(unescape_value(val));
    } else if (key == "max_time") {
      s.bound.max_time = detail::scenario_u64(key, val);
    } else if (key == "max_events") {
      s.bound.max_events = detail::scenario_u64(key, val);
    } else {
      throw ScenarioError("unknown key '" + std::string(key) + "'");
    }
  }
  if (!f_given) s.f = max_faulty(s.n);
  validate(s);
  return s;
}

// Canonical text form; parse_scenario(to_text(s)) reproduces s.
inline std::string to_text(const Scenario& s) {
  std::ostringstream os;
  os << "n=" << s.n << "\nf=" << s.f << "\ngst=" << s.net.gst << "\ndelta=" << s.net.delta
     << "\nbase_timeout=" << s.base_timeout << "\nseed=" << s.net.seed << "\ninstances=" << s.instances
     << "\ndrop_probability=" << s.net.pre_gst_drop_probability
     << "\npre_gst_max_delay=" << s.net.pre_gst_max_delay
     << "\ndelay=" << (s.net.delay_mode == DelayMode::fixed ? "fixed" : "uniform") << '\n';
  for (const auto& p : s.net.isolated) os << "isolate=" << p.index << '\n';
  for (const auto& a : s.adversaries) os << "byzantine=" << a.process.index << ':' << describe(a.strategy) << '\n';
  for (const auto& v : s.beta_reject) os << "beta_reject=" << escape_value(v) << '\n';
  os << "max_time=" << s.bound.max_time << "\nmax_events=" << s.bound.max_events << '\n';
  return os.str();
}

}  // namespace ibft
