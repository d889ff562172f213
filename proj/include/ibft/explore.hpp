#pragma once

#include <algorithm>
#include <cstdint>
#include <iterator>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ibft/checks.hpp"
#include "ibft/scenario.hpp"
#include "ibft/simnet.hpp"

namespace ibft {

// Bounded systematic scheduling. Messages sit in one FIFO; the canonical step
// delivers the head, fires the lowest armed timer once nothing is in flight,
// and releases held messages once no timer can fire. A deviation delivers one
// of the next `reorder_window` messages instead, fires a timer early, or,
// with `hold_links`, cuts one destination off (its messages, including later
// ones, wait until release) or holds the messages currently in flight to
// every destination but one. Each schedule takes at most `max_deviations` deviations, and
// no timer fires once its process has reached `round_bound`.
struct ExploreOptions {
  std::uint64_t round_bound = 2;
  std::size_t reorder_window = 3;
  std::size_t max_deviations = 2;
  std::uint64_t max_schedules = 2'000'000;
  std::uint64_t max_steps_per_schedule = 10'000;
  bool hold_links = true;
};

struct ExploreResult {
  std::uint64_t schedules = 0;
  std::uint64_t states = 0;
  std::uint64_t decided_schedules = 0;
  bool complete = true;  // false when a budget cut the search short
  Verdict agreement{"agreement", true, {}};
  Verdict prepared_consistency{"prepared_consistency", true, {}};
  // Outcome of the all-canonical schedule.
  std::map<ProcessId, Value> first_decisions;
  std::uint64_t first_sends = 0;

  bool pass() const { return agreement.pass && prepared_consistency.pass; }
};

namespace detail {

struct ArmedTimer {
  InstanceId instance;
  Round round;
  SimTime expiry = 0;
};

struct World {
  std::vector<Node> nodes;
  std::vector<PendingDelivery> in_flight;
  std::vector<PendingDelivery> held;
  std::vector<bool> cut;
  std::vector<std::optional<ArmedTimer>> timers;
  std::map<ProcessId, Value> decisions;
  std::map<Round, Value> prepared;  // correct processes only
  std::uint64_t sends = 0;
  std::uint64_t steps = 0;
  SimTime now = 0;  // advances only when a timer fires
  std::uint64_t next_id = 0;
  std::size_t deviations = 0;
};

class Explorer {
 public:
  Explorer(const Scenario& s, ExploreOptions opts) : s_(s), opts_(opts) {}

  ExploreResult run() {
    World w;
    w.nodes = build_nodes(s_);
    w.timers.resize(s_.n);
    w.cut.assign(s_.n, false);
    for (std::uint32_t i = 0; i < s_.n; ++i) dispatch(w, ProcessId{i}, w.nodes[i].advance(InstanceId{0}, 0));
    search(std::move(w));
    return std::move(result_);
  }

 private:
  enum class Kind { deliver, fire, hold, hold_others, release };
  struct Choice {
    Kind kind;
    std::size_t index;
    bool deviation;
  };

  bool correct_done(const World& w) const {
    for (std::uint32_t i = 0; i < s_.n; ++i) {
      if (w.nodes[i].correct() && !w.decisions.count(ProcessId{i})) return false;
    }
    return true;
  }

  bool fireable(const World& w, std::size_t p) const {
    return w.timers[p] && w.timers[p]->round.value < opts_.round_bound;
  }

  std::vector<Choice> choices(const World& w) const {
    std::vector<Choice> out;
    const bool may_deviate = w.deviations < opts_.max_deviations;
    if (!w.in_flight.empty()) {
      out.push_back({Kind::deliver, 0, false});
      if (may_deviate) {
        const std::size_t last = std::min(w.in_flight.size() - 1, opts_.reorder_window);
        for (std::size_t i = 1; i <= last; ++i) out.push_back({Kind::deliver, i, true});
        if (opts_.reorder_window > 0) {
          for (std::size_t p = 0; p < s_.n; ++p) {
            if (fireable(w, p)) out.push_back({Kind::fire, p, true});
          }
        }
        if (opts_.hold_links) {
          std::vector<bool> has(s_.n, false);
          for (const auto& d : w.in_flight) has[d.to.index] = true;
          const auto targets = static_cast<std::size_t>(std::count(has.begin(), has.end(), true));
          for (std::size_t p = 0; p < s_.n; ++p) {
            if (targets > (has[p] ? 2u : 1u)) out.push_back({Kind::hold_others, p, true});
          }
          add_cuts(w, out);
        }
      }
      return out;
    }
    bool first = true;
    for (std::size_t p = 0; p < s_.n; ++p) {
      if (!fireable(w, p)) continue;
      if (first) {
        out.push_back({Kind::fire, p, false});
        first = false;
      } else if (may_deviate && opts_.reorder_window > 0) {
        out.push_back({Kind::fire, p, true});
      }
    }
    if (!out.empty() && may_deviate && opts_.hold_links) add_cuts(w, out);
    if (out.empty() && !w.held.empty()) out.push_back({Kind::release, 0, false});
    return out;
  }

  void add_cuts(const World& w, std::vector<Choice>& out) const {
    for (std::size_t p = 0; p < s_.n; ++p) {
      if (!w.cut[p]) out.push_back({Kind::hold, p, true});
    }
  }

  void leaf(const World& w) {
    ++result_.schedules;
    if (correct_done(w)) ++result_.decided_schedules;
    if (result_.schedules == 1) {
      result_.first_decisions = w.decisions;
      result_.first_sends = w.sends;
    }
  }

  void search(World w) {
    while (true) {
      if (!result_.pass()) return;
      if (result_.schedules >= opts_.max_schedules) {
        result_.complete = false;
        return;
      }
      ++result_.states;
      if (correct_done(w) || w.steps >= opts_.max_steps_per_schedule) {
        if (w.steps >= opts_.max_steps_per_schedule) result_.complete = false;
        leaf(w);
        return;
      }
      auto options = choices(w);
      if (options.empty()) {
        leaf(w);
        return;
      }
      for (std::size_t i = 1; i < options.size(); ++i) {
        World branch = w;
        apply(branch, options[i]);
        search(std::move(branch));
      }
      apply(w, options[0]);
    }
  }

  void apply(World& w, const Choice& c) {
    ++w.steps;
    if (c.deviation) ++w.deviations;
    if (c.kind == Kind::hold || c.kind == Kind::hold_others) {
      const bool others = c.kind == Kind::hold_others;
      if (!others) w.cut[c.index] = true;
      auto keep = std::stable_partition(w.in_flight.begin(), w.in_flight.end(), [&](const PendingDelivery& d) {
        return (d.to.index == c.index) == others;
      });
      w.held.insert(w.held.end(), std::make_move_iterator(keep), std::make_move_iterator(w.in_flight.end()));
      w.in_flight.erase(keep, w.in_flight.end());
    } else if (c.kind == Kind::release) {
      w.in_flight.insert(w.in_flight.end(), std::make_move_iterator(w.held.begin()),
                         std::make_move_iterator(w.held.end()));
      w.held.clear();
      w.cut.assign(s_.n, false);
    } else if (c.kind == Kind::deliver) {
      PendingDelivery d = std::move(w.in_flight[c.index]);
      w.in_flight.erase(w.in_flight.begin() + static_cast<std::ptrdiff_t>(c.index));
      dispatch(w, d.to, w.nodes[d.to.index].on_message(d.message, w.now));
    } else {
      const ArmedTimer t = *w.timers[c.index];
      w.timers[c.index].reset();
      w.now = std::max(w.now, t.expiry);
      dispatch(w, ProcessId{static_cast<std::uint32_t>(c.index)},
               w.nodes[c.index].on_timer(t.instance, w.now));
    }
  }

  void send(World& w, PendingDelivery d) {
    (w.cut[d.to.index] ? w.held : w.in_flight).push_back(std::move(d));
  }

  void dispatch(World& w, ProcessId p, std::vector<Action> actions) {
    Node& node = w.nodes[p.index];
    for (const auto& fr : node.take_fired_rules()) {
      if (fr.rule != Rule::R2 || !fr.value) continue;
      auto [it, inserted] = w.prepared.emplace(fr.round, *fr.value);
      if (!inserted && it->second != *fr.value) {
        result_.prepared_consistency = {"prepared_consistency", false,
                                        "round " + std::to_string(fr.round.value) + ": " + escape_value(it->second) +
                                            " vs " + escape_value(*fr.value)};
      }
    }
    for (auto& a : actions) {
      if (auto* b = std::get_if<Broadcast>(&a)) {
        check_outgoing(p, b->message);
        for (std::uint32_t dst = 0; dst < s_.n; ++dst) {
          send(w, {p, ProcessId{dst}, w.next_id++, b->message});
          ++w.sends;
        }
      } else if (auto* u = std::get_if<Unicast>(&a)) {
        check_outgoing(p, u->message);
        if (u->to.index >= s_.n) continue;
        send(w, {p, u->to, w.next_id++, u->message});
        ++w.sends;
      } else if (auto* st = std::get_if<ScheduleTimer>(&a)) {
        w.timers[p.index] = ArmedTimer{st->instance, st->round, st->after > UINT64_MAX - w.now ? UINT64_MAX : w.now + st->after};
      } else if (std::holds_alternative<StopTimer>(a)) {
        w.timers[p.index].reset();
      } else if (auto* dc = std::get_if<Decide>(&a)) {
        if (!node.correct()) continue;
        w.decisions.emplace(p, dc->value);
        for (const auto& [q, v] : w.decisions) {
          if (v != dc->value) {
            result_.agreement = {"agreement", false,
                                 format_process(q) + " decided " + escape_value(v) + ", " + format_process(p) +
                                     " decided " + escape_value(dc->value)};
          }
        }
      }
    }
  }

  Scenario s_;
  ExploreOptions opts_;
  ExploreResult result_;
};

}  // namespace detail

// Single-instance exploration of `s`; network parameters in `s` are ignored.
inline ExploreResult explore(const Scenario& s, ExploreOptions opts = {}) {
  validate(s);
  Scenario single = s;
  single.instances = 1;
  return detail::Explorer(single, opts).run();
}

}  // namespace ibft
