#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "ibft/adversary.hpp"
#include "ibft/core.hpp"
#include "ibft/instance.hpp"
#include "ibft/scenario.hpp"
#include "ibft/smr.hpp"
#include "ibft/trace.hpp"

namespace ibft {

class ForgeryError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Every transmitted message must carry a genuine authenticator. A relayed
// message keeps its original sender; a fabricated one is a test failure.
inline void check_outgoing(ProcessId emitter, const SignedMessage& m) {
  if (!verify_authenticator(m)) {
    throw ForgeryError(format_process(emitter) + " emitted a message with a forged authenticator for " +
                       format_process(m.sender));
  }
}

// A correct replica or a faulty process behind one interface.
class Node {
 public:
  explicit Node(Replica r) : impl_(std::move(r)) {}
  explicit Node(ByzantineProcess b) : impl_(std::move(b)) {}

  bool correct() const { return std::holds_alternative<Replica>(impl_); }
  const Replica* replica() const { return std::get_if<Replica>(&impl_); }

  std::vector<Action> advance(InstanceId l, SimTime now) {
    return std::visit([&](auto& x) { return x.advance(l, now); }, impl_);
  }
  std::vector<Action> on_message(const SignedMessage& m, SimTime now) {
    return std::visit([&](auto& x) { return x.on_message(m, now); }, impl_);
  }
  std::vector<Action> on_timer(InstanceId l, SimTime now) {
    return std::visit([&](auto& x) { return x.on_timer(l, now); }, impl_);
  }
  bool ready_to_advance() const {
    return std::visit([](const auto& x) { return x.ready_to_advance(); }, impl_);
  }
  std::size_t decided_instances() const {
    if (const auto* r = replica()) return r->log().size();
    return std::get<ByzantineProcess>(impl_).decided_instances();
  }
  std::vector<FiredRule> take_fired_rules() {
    if (auto* r = std::get_if<Replica>(&impl_)) return r->take_fired_rules();
    return {};
  }

 private:
  std::variant<Replica, ByzantineProcess> impl_;
};

inline std::vector<Node> build_nodes(const Scenario& s, const ProposalSource& proposals = default_proposal) {
  const KeyRing keys;
  const SystemConfig config = s.system_config();
  std::vector<Node> nodes;
  nodes.reserve(s.n);
  for (std::uint32_t i = 0; i < s.n; ++i) {
    const ProcessId p{i};
    auto spec = std::find_if(s.adversaries.begin(), s.adversaries.end(),
                             [&](const AdversarySpec& a) { return a.process == p; });
    if (spec == s.adversaries.end()) {
      nodes.emplace_back(Replica(keys.issue(p), config, s.base_timeout, proposals));
    } else {
      nodes.emplace_back(ByzantineProcess(keys.issue(p), config, s.base_timeout, proposals, *spec, s.net.seed));
    }
  }
  return nodes;
}

// Event queue ----------------------------------------------------------------

struct PendingDelivery {
  ProcessId from;
  ProcessId to;
  std::uint64_t id = 0;
  SignedMessage message;
};

struct PendingTimer {
  ProcessId process;
  InstanceId instance;
  std::uint64_t generation = 0;
};

struct QueuedEvent {
  SimTime due = 0;
  std::uint64_t sequence = 0;
  std::variant<PendingDelivery, PendingTimer> event;
};

// Pops in (due, sequence) order; sequence numbers are assigned on push.
class EventQueue {
 public:
  void push(SimTime due, std::variant<PendingDelivery, PendingTimer> ev) {
    if (std::holds_alternative<PendingDelivery>(ev)) ++deliveries_;
    heap_.push_back({due, next_sequence_++, std::move(ev)});
    std::push_heap(heap_.begin(), heap_.end(), later);
  }

  QueuedEvent pop() {
    std::pop_heap(heap_.begin(), heap_.end(), later);
    QueuedEvent e = std::move(heap_.back());
    heap_.pop_back();
    if (std::holds_alternative<PendingDelivery>(e.event)) --deliveries_;
    return e;
  }

  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  std::size_t deliveries_pending() const { return deliveries_; }

 private:
  static bool later(const QueuedEvent& a, const QueuedEvent& b) {
    return a.due != b.due ? a.due > b.due : a.sequence > b.sequence;
  }

  std::vector<QueuedEvent> heap_;
  std::uint64_t next_sequence_ = 0;
  std::size_t deliveries_ = 0;
};

// Simulation -----------------------------------------------------------------

struct RunOutcome {
  RunTrace trace;
  std::vector<SignedMessage> messages;  // every message handed to the network, once per action
  bool terminated = false;
  std::uint64_t events = 0;
  std::vector<std::optional<ReplicaLog>> logs;  // absent for faulty processes
};

class Simulation {
 public:
  explicit Simulation(Scenario scenario, ProposalSource proposals = default_proposal)
      : s_(std::move(scenario)), rng_(s_.net.seed) {
    validate(s_);
    nodes_ = build_nodes(s_, proposals);
    timer_generation_.resize(s_.n);
    isolated_.assign(s_.n, false);
    for (const auto& p : s_.net.isolated) isolated_[p.index] = true;
  }

  RunOutcome run() {
    record_config();
    for (std::uint32_t i = 0; i < s_.n; ++i) {
      dispatch(ProcessId{i}, nodes_[i].advance(InstanceId{0}, 0), 0);
    }

    bool draining = false;
    while (!queue_.empty()) {
      if (!draining && all_correct_done()) draining = true;
      if (draining && queue_.deliveries_pending() == 0) break;
      if (outcome_.events >= s_.bound.max_events) break;
      QueuedEvent ev = queue_.pop();
      if (ev.due > s_.bound.max_time) break;
      now_ = ev.due;

      if (auto* d = std::get_if<PendingDelivery>(&ev.event)) {
        ++outcome_.events;
        trace_.append({now_, RecordKind::deliver, d->to, "id=" + std::to_string(d->id) + " " + describe(d->message)});
        dispatch(d->to, nodes_[d->to.index].on_message(d->message, now_), now_);
      } else {
        const auto& t = std::get<PendingTimer>(ev.event);
        if (draining || timer_generation_[t.process.index][t.instance] != t.generation) continue;
        ++outcome_.events;
        if (nodes_[t.process.index].correct()) {
          trace_.append({now_, RecordKind::timer_fire, t.process, "l=" + std::to_string(t.instance.value)});
        }
        dispatch(t.process, nodes_[t.process.index].on_timer(t.instance, now_), now_);
      }
    }

    outcome_.terminated = all_correct_done();
    trace_.append({now_, RecordKind::halt, std::nullopt,
                   "terminated=" + std::string(outcome_.terminated ? "1" : "0") +
                       " events=" + std::to_string(outcome_.events)});
    for (const auto& node : nodes_) {
      outcome_.logs.push_back(node.replica() ? std::optional<ReplicaLog>(node.replica()->log()) : std::nullopt);
    }
    outcome_.trace = std::move(trace_);
    return std::move(outcome_);
  }

 private:
  bool all_correct_done() const {
    return std::all_of(nodes_.begin(), nodes_.end(), [&](const Node& n) {
      return !n.correct() || n.decided_instances() >= s_.instances;
    });
  }

  void record_config() {
    std::string faulty;
    for (const auto& a : s_.adversaries) {
      if (!faulty.empty()) faulty += ',';
      faulty += format_process(a.process);
    }
    trace_.append({0, RecordKind::config, std::nullopt,
                   "n=" + std::to_string(s_.n) + " f=" + std::to_string(s_.f) +
                       " gst=" + std::to_string(s_.net.gst) + " delta=" + std::to_string(s_.net.delta) +
                       " delay=" + (s_.net.delay_mode == DelayMode::fixed ? "fixed" : "uniform") +
                       " base_timeout=" + std::to_string(s_.base_timeout) +
                       " instances=" + std::to_string(s_.instances) + " seed=" + std::to_string(s_.net.seed) +
                       " faulty=" + (faulty.empty() ? "-" : faulty)});
  }

  void dispatch(ProcessId p, std::vector<Action> actions, SimTime t) {
    Node& node = nodes_[p.index];
    for (const auto& fr : node.take_fired_rules()) {
      std::string d = "rule=" + std::string(to_string(fr.rule)) + " l=" + std::to_string(fr.instance.value) +
                      " r=" + std::to_string(fr.round.value);
      if (fr.value) d += " v=" + escape_value(*fr.value);
      trace_.append({t, RecordKind::rule_fire, p, std::move(d)});
    }
    for (auto& a : actions) apply(p, a, t);
  }

  void apply(ProcessId p, Action& action, SimTime t) {
    Node& node = nodes_[p.index];
    if (auto* b = std::get_if<Broadcast>(&action)) {
      check_outgoing(p, b->message);
      outcome_.messages.push_back(b->message);
      for (std::uint32_t dst = 0; dst < s_.n; ++dst) transmit(p, ProcessId{dst}, b->message, t);
    } else if (auto* u = std::get_if<Unicast>(&action)) {
      check_outgoing(p, u->message);
      if (u->to.index >= s_.n) return;
      outcome_.messages.push_back(u->message);
      transmit(p, u->to, u->message, t);
    } else if (auto* st = std::get_if<ScheduleTimer>(&action)) {
      const std::uint64_t gen = ++timer_generation_[p.index][st->instance];
      const SimTime due = st->after > UINT64_MAX - t ? UINT64_MAX : t + st->after;
      queue_.push(due, PendingTimer{p, st->instance, gen});
      if (node.correct()) {
        trace_.append({t, RecordKind::timer_set, p,
                       "l=" + std::to_string(st->instance.value) + " r=" + std::to_string(st->round.value) +
                           " after=" + std::to_string(st->after)});
      }
    } else if (auto* sp = std::get_if<StopTimer>(&action)) {
      ++timer_generation_[p.index][sp->instance];
      if (node.correct()) {
        trace_.append({t, RecordKind::timer_set, p, "l=" + std::to_string(sp->instance.value) + " stop"});
      }
    } else if (auto* dc = std::get_if<Decide>(&action)) {
      if (node.correct()) {
        trace_.append({t, RecordKind::decide, p,
                       "l=" + std::to_string(dc->instance.value) + " r=" + std::to_string(dc->round.value) +
                           " v=" + escape_value(dc->value) +
                           " cert=" + std::to_string(dc->certificate.commits.size())});
      }
      const InstanceId next{dc->instance.value + 1};
      if (next.value < s_.instances && node.ready_to_advance() && node.decided_instances() == next.value) {
        dispatch(p, node.advance(next, t), t);
      }
    }
  }

  void transmit(ProcessId from, ProcessId to, const SignedMessage& m, SimTime t) {
    const std::uint64_t id = next_message_id_++;
    const std::string summary = describe(m);
    trace_.append({t, RecordKind::send, from, "id=" + std::to_string(id) + " to=" + format_process(to) + " " + summary});

    Duration delay = 0;
    if (to == from) {
      delay = 0;
    } else if (t < s_.net.gst) {
      const bool lost = isolated_[from.index] || isolated_[to.index] ||
                        (s_.net.pre_gst_drop_probability > 0.0 && uniform01() < s_.net.pre_gst_drop_probability);
      if (lost) {
        trace_.append({t, RecordKind::drop, from, "id=" + std::to_string(id) + " to=" + format_process(to) + " " + summary});
        return;
      }
      delay = 1 + rng_() % s_.net.pre_gst_max_delay;
    } else {
      delay = s_.net.delay_mode == DelayMode::fixed ? s_.net.delta : 1 + rng_() % s_.net.delta;
    }
    queue_.push(t + delay, PendingDelivery{from, to, id, m});
  }

  double uniform01() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  Scenario s_;
  std::vector<Node> nodes_;
  EventQueue queue_;
  std::mt19937_64 rng_;
  RunTrace trace_;
  RunOutcome outcome_;
  std::vector<std::map<InstanceId, std::uint64_t>> timer_generation_;
  std::vector<bool> isolated_;
  std::uint64_t next_message_id_ = 0;
  SimTime now_ = 0;
};

inline RunOutcome run(const Scenario& scenario) { return Simulation(scenario).run(); }

// Post-GST timeliness: every send at t >= GST from a correct process to a
// correct process is delivered by t + delta. Sends still in flight when a
// bounded run stopped are not judged.
inline bool deliver_semantics_check(const RunTrace& trace, const NetConfig& net) {
  const auto header = read_header(trace);
  if (!header) return false;

  bool drained = false;
  SimTime halt_time = 0;
  std::unordered_map<std::uint64_t, SimTime> delivered;
  for (const auto& r : trace.records()) {
    if (r.kind == RecordKind::deliver) {
      if (auto id = field_u64(r.detail, "id")) delivered.emplace(*id, r.time);
    } else if (r.kind == RecordKind::halt) {
      drained = field(r.detail, "terminated").value_or("0") == "1";
      halt_time = r.time;
    }
  }
  for (const auto& r : trace.records()) {
    if (r.kind != RecordKind::send && r.kind != RecordKind::drop) continue;
    if (r.time < net.gst || !r.process || !header->correct(*r.process)) continue;
    const auto to = parse_process(field(r.detail, "to").value_or(""));
    if (!to || !header->correct(*to)) continue;
    const SimTime deadline = r.time + net.delta;
    if (r.kind == RecordKind::drop) return false;
    const auto id = field_u64(r.detail, "id");
    if (!id) return false;
    auto it = delivered.find(*id);
    if (it == delivered.end()) {
      if (!drained && deadline >= halt_time) continue;
      return false;
    }
    if (it->second > deadline) return false;
  }
  return true;
}

}  // namespace ibft
