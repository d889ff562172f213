#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "ibft/core.hpp"
#include "ibft/justification.hpp"

namespace ibft {

struct CommitCertificate {
  std::vector<SignedMessage> commits;
};

// Actions --------------------------------------------------------------------

struct Broadcast {
  SignedMessage message;
};

struct Unicast {
  ProcessId to;
  SignedMessage message;
};

struct ScheduleTimer {
  InstanceId instance;
  Round round;
  Duration after = 0;
};

struct StopTimer {
  InstanceId instance;
};

struct Decide {
  InstanceId instance;
  Round round;
  Value value;
  CommitCertificate certificate;
};

using Action = std::variant<Broadcast, Unicast, ScheduleTimer, StopTimer, Decide>;

// Events ---------------------------------------------------------------------

struct StartEvent {
  InstanceId instance;
  Value value;
};

struct Deliver {
  SignedMessage message;
};

struct TimerExpired {
  InstanceId instance;
};

using Event = std::variant<StartEvent, Deliver, TimerExpired>;

enum class Rule : std::uint8_t { R1 = 1, R2, R3, R4, R5, R6, R7 };

inline std::string_view to_string(Rule r) {
  switch (r) {
    case Rule::R1: return "R1";
    case Rule::R2: return "R2";
    case Rule::R3: return "R3";
    case Rule::R4: return "R4";
    case Rule::R5: return "R5";
    case Rule::R6: return "R6";
    case Rule::R7: return "R7";
  }
  return "?";
}

// One upon-rule firing, reported for tracing and invariant checks. `round` is
// the round the rule acted on (the new round for R4/R5).
struct FiredRule {
  Rule rule;
  InstanceId instance;
  Round round;
  std::optional<Value> value;
};

struct TimerState {
  enum class Kind : std::uint8_t { stopped, running, expired };
  Kind kind = Kind::stopped;
  SimTime expiry = 0;
};

struct Decision {
  Round round;
  Value value;
  CommitCertificate certificate;
};

struct Diagnostics {
  std::map<Rejection, std::size_t> dropped;
  std::size_t stale_timer_events = 0;
  std::size_t ignored_after_decision = 0;
};

// Per-process, per-instance state machine. It performs no I/O: every effect is
// returned as an Action and time is supplied by the caller.
class Instance {
 public:
  Instance(Signer signer, SystemConfig config, Duration base_timeout)
      : signer_(std::move(signer)), config_(std::move(config)), base_timeout_(base_timeout) {
    if (base_timeout_ == 0) throw std::invalid_argument("base timeout must be positive");
  }

  std::vector<Action> start(InstanceId instance, Value value, SimTime now = 0) {
    if (started_) throw std::logic_error("instance already started");
    if (!config_.beta(value)) throw std::invalid_argument("input value rejected by beta");
    started_ = true;
    lambda_ = instance;
    round_ = Round{1};
    prepared_ = PreparedState::none();
    input_value_ = std::move(value);

    std::vector<Action> out;
    if (leader(lambda_, round_, config_.n()) == self()) {
      fired_.insert({Rule::R6, round_});
      out.emplace_back(Broadcast{signer_.sign(Payload::pre_prepare(lambda_, round_, input_value_))});
    }
    set_timer(now, out);
    return out;
  }

  std::vector<Action> handle_event(const Event& e, SimTime now) {
    if (const auto* s = std::get_if<StartEvent>(&e)) return start(s->instance, s->value, now);
    if (!started_) throw std::logic_error("instance not started");

    std::vector<Action> out;
    if (const auto* d = std::get_if<Deliver>(&e)) {
      if (d->message.payload.instance != lambda_) {
        throw std::invalid_argument("message for a foreign instance");
      }
      on_message(d->message, out);
    } else if (const auto* t = std::get_if<TimerExpired>(&e)) {
      if (t->instance != lambda_) throw std::invalid_argument("timer for a foreign instance");
      if (timer_.kind == TimerState::Kind::running && now >= timer_.expiry) {
        timer_.kind = TimerState::Kind::expired;
      } else {
        ++diagnostics_.stale_timer_events;
      }
    }
    run_rules(now, out);
    return out;
  }

  ProcessId self() const { return signer_.id(); }
  bool started() const { return started_; }
  InstanceId instance() const { return lambda_; }
  Round round() const { return round_; }
  const PreparedState& prepared() const { return prepared_; }
  const Value& input_value() const { return input_value_; }
  const TimerState& timer() const { return timer_; }
  const std::optional<Decision>& decision() const { return decision_; }
  const Diagnostics& diagnostics() const { return diagnostics_; }
  const SystemConfig& config() const { return config_; }

  bool has_fired(Rule rule, Round round) const { return fired_.count({rule, round}) > 0; }

  std::vector<FiredRule> take_fired_rules() { return std::exchange(journal_, {}); }

 private:
  using BySender = std::map<ProcessId, SignedMessage>;
  using ByValue = std::map<Value, BySender>;

  void drop(Rejection why) { ++diagnostics_.dropped[why]; }

  void on_message(const SignedMessage& m, std::vector<Action>& out) {
    const Payload& p = m.payload;
    if (p.type == MessageType::round_change) {
      if (auto v = validate_round_change(m, config_); !v) return drop(v.reason);
      round_changes_[p.round].try_emplace(m.sender, m);
      // R7 reacts to each delivered ROUND-CHANGE, any number of times.
      if (decision_ && m.sender != self()) {
        for (const auto& c : decision_->certificate.commits) out.emplace_back(Unicast{m.sender, c});
        journal_.push_back({Rule::R7, lambda_, p.round, std::nullopt});
      }
      return;
    }
    if (auto v = validate_message(m, config_); !v) return drop(v.reason);
    if (decision_) {
      ++diagnostics_.ignored_after_decision;
      return;
    }
    switch (p.type) {
      case MessageType::pre_prepare: pre_prepares_[p.round][p.value].try_emplace(m.sender, m); break;
      case MessageType::prepare: prepares_[p.round][p.value].try_emplace(m.sender, m); break;
      case MessageType::commit: commits_[p.round][p.value].try_emplace(m.sender, m); break;
      case MessageType::round_change: break;
    }
  }

  // Applies enabled rules in priority order R3 > R6 > R2 > R1 > R5 > R4,
  // restarting after each firing until none is enabled.
  void run_rules(SimTime now, std::vector<Action>& out) {
    while (!decision_) {
      if (try_commit_quorum(out)) continue;
      if (try_propose_after_round_change(out)) continue;
      if (try_prepare_quorum(out)) continue;
      if (try_accept_pre_prepare(now, out)) continue;
      if (try_round_skip(now, out)) continue;
      if (try_timer_expired(now, out)) continue;
      break;
    }
  }

  void fire(Rule rule, Round round, std::optional<Value> value = std::nullopt) {
    fired_.insert({rule, round});
    journal_.push_back({rule, lambda_, round, std::move(value)});
  }

  void set_timer(SimTime now, std::vector<Action>& out) {
    const Duration d = timeout(round_, base_timeout_);
    timer_ = {TimerState::Kind::running, d > UINT64_MAX - now ? UINT64_MAX : now + d};
    out.emplace_back(ScheduleTimer{lambda_, round_, d});
  }

  std::vector<SignedMessage> first_quorum(const BySender& senders) const {
    std::vector<SignedMessage> q;
    for (const auto& [_, m] : senders) {
      if (q.size() == quorum_size(config_)) break;
      q.push_back(m);
    }
    return q;
  }

  // R3: quorum of COMMIT(lambda, round, value) for any round.
  bool try_commit_quorum(std::vector<Action>& out) {
    for (const auto& [round, by_value] : commits_) {
      for (const auto& [value, senders] : by_value) {
        if (senders.size() < quorum_size(config_)) continue;
        CommitCertificate cert{first_quorum(senders)};
        timer_.kind = TimerState::Kind::stopped;
        decision_ = Decision{round, value, cert};
        fire(Rule::R3, round, value);
        out.emplace_back(StopTimer{lambda_});
        out.emplace_back(Decide{lambda_, round, value, std::move(cert)});
        return true;
      }
    }
    return false;
  }

  // R6: the leader of the current round proposes once a justified quorum of
  // ROUND-CHANGE messages for that round is in.
  bool try_propose_after_round_change(std::vector<Action>& out) {
    if (has_fired(Rule::R6, round_) || round_.value < 2) return false;
    if (leader(lambda_, round_, config_.n()) != self()) return false;
    auto it = round_changes_.find(round_);
    if (it == round_changes_.end() || it->second.size() < quorum_size(config_)) return false;

    RoundChangeCertificate q{first_quorum(it->second)};
    if (!justify_round_change(q, config_)) return false;
    const auto hp = highest_prepared(q);
    Value v = hp ? hp->value : input_value_;
    fire(Rule::R6, round_, v);
    out.emplace_back(Broadcast{signer_.sign(Payload::pre_prepare(lambda_, round_, std::move(v)),
                                            make_justification(std::move(q.round_changes)))});
    return true;
  }

  // R2: quorum of PREPARE(lambda, r_i, value).
  bool try_prepare_quorum(std::vector<Action>& out) {
    if (has_fired(Rule::R2, round_)) return false;
    auto it = prepares_.find(round_);
    if (it == prepares_.end()) return false;
    for (const auto& [value, senders] : it->second) {
      if (senders.size() < quorum_size(config_)) continue;
      prepared_ = PreparedState::at(round_, value);
      prepared_certificate_ = PrepareCertificate{first_quorum(senders)};
      fire(Rule::R2, round_, value);
      out.emplace_back(Broadcast{signer_.sign(Payload::commit(lambda_, round_, value))});
      return true;
    }
    return false;
  }

  // R1: justified PRE-PREPARE for r_i from leader(lambda, r_i).
  bool try_accept_pre_prepare(SimTime now, std::vector<Action>& out) {
    if (has_fired(Rule::R1, round_)) return false;
    auto it = pre_prepares_.find(round_);
    if (it == pre_prepares_.end()) return false;
    const ProcessId expected = leader(lambda_, round_, config_.n());
    for (const auto& [value, senders] : it->second) {
      auto m = senders.find(expected);
      if (m == senders.end() || !justify_pre_prepare(m->second, config_)) continue;
      fire(Rule::R1, round_, value);
      set_timer(now, out);
      out.emplace_back(Broadcast{signer_.sign(Payload::prepare(lambda_, round_, value))});
      return true;
    }
    return false;
  }

  // R5: f+1 distinct senders with ROUND-CHANGE rounds above r_i. Each sender
  // contributes its highest such round; the set is the f+1 highest, and the
  // process moves to the smallest round in it.
  bool try_round_skip(SimTime now, std::vector<Action>& out) {
    if (has_fired(Rule::R5, round_)) return false;
    std::map<ProcessId, Round> highest;
    for (auto it = round_changes_.upper_bound(round_); it != round_changes_.end(); ++it) {
      for (const auto& [sender, _] : it->second) highest[sender] = it->first;
    }
    if (highest.size() < static_cast<std::size_t>(config_.f()) + 1) return false;
    std::vector<Round> rounds;
    for (const auto& [_, r] : highest) rounds.push_back(r);
    std::sort(rounds.begin(), rounds.end(), std::greater<>());
    const Round target = rounds[config_.f()];

    fired_.insert({Rule::R5, round_});
    round_ = target;
    journal_.push_back({Rule::R5, lambda_, round_, std::nullopt});
    set_timer(now, out);
    broadcast_round_change(out);
    return true;
  }

  // R4: timer expiry moves to the next round.
  bool try_timer_expired(SimTime now, std::vector<Action>& out) {
    if (timer_.kind != TimerState::Kind::expired || has_fired(Rule::R4, round_)) return false;
    fired_.insert({Rule::R4, round_});
    round_ = round_.next();
    journal_.push_back({Rule::R4, lambda_, round_, std::nullopt});
    set_timer(now, out);
    broadcast_round_change(out);
    return true;
  }

  // At most one ROUND-CHANGE per round entered.
  void broadcast_round_change(std::vector<Action>& out) {
    if (!round_change_sent_.insert(round_).second) return;
    Justification proof;
    if (prepared_.present()) proof = make_justification(prepared_certificate_.prepares);
    out.emplace_back(
        Broadcast{signer_.sign(Payload::round_change(lambda_, round_, prepared_), std::move(proof))});
  }

  Signer signer_;
  SystemConfig config_;
  Duration base_timeout_;

  bool started_ = false;
  InstanceId lambda_;
  Round round_;
  PreparedState prepared_;
  PrepareCertificate prepared_certificate_;
  Value input_value_;
  TimerState timer_;
  std::optional<Decision> decision_;

  std::map<Round, ByValue> pre_prepares_;
  std::map<Round, ByValue> prepares_;
  std::map<Round, ByValue> commits_;
  std::map<Round, BySender> round_changes_;

  std::set<std::pair<Rule, Round>> fired_;
  std::set<Round> round_change_sent_;
  std::vector<FiredRule> journal_;
  Diagnostics diagnostics_;
};

}  // namespace ibft
