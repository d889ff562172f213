#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "ibft/core.hpp"
#include "ibft/instance.hpp"
#include "ibft/justification.hpp"

namespace ibft {

// Stands in for the block producer: the value a process proposes for an instance.
using ProposalSource = std::function<Value(ProcessId, InstanceId)>;

inline Value default_proposal(ProcessId p, InstanceId l) {
  return Value("v" + std::to_string(l.value) + "-p" + std::to_string(p.index));
}

struct LogEntry {
  Value value;
  CommitCertificate certificate;
};

// Dense, append-only sequence of decisions indexed by instance.
class ReplicaLog {
 public:
  void append(InstanceId instance, Value value, CommitCertificate certificate) {
    if (instance.value != entries_.size()) {
      throw std::logic_error("log append out of order: instance " + std::to_string(instance.value) +
                             " on log of length " + std::to_string(entries_.size()));
    }
    entries_.push_back({std::move(value), std::move(certificate)});
  }

  std::size_t size() const { return entries_.size(); }
  bool contains(InstanceId instance) const { return instance.value < entries_.size(); }
  const LogEntry& at(InstanceId instance) const { return entries_.at(instance.value); }
  const std::vector<LogEntry>& entries() const { return entries_; }

  // One line per decision: `instance<TAB>value-digest<TAB>certificate-size`.
  std::string dump() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      os << i << '\t' << value_digest(entries_[i].value) << '\t'
         << entries_[i].certificate.commits.size() << '\n';
    }
    return os.str();
  }

 private:
  std::vector<LogEntry> entries_;
};

// quorum_size distinct valid COMMITs for (instance, value), any single round.
inline bool certificate_valid(const CommitCertificate& cert, InstanceId instance, const Value& value,
                              const SystemConfig& config) {
  if (cert.commits.empty()) return false;
  const Round round = cert.commits.front().payload.round;
  std::set<ProcessId> senders;
  for (const auto& m : cert.commits) {
    const Payload& p = m.payload;
    if (p.type != MessageType::commit || p.instance != instance || p.round != round ||
        p.value != value || !validate_message(m, config)) {
      return false;
    }
    senders.insert(m.sender);
  }
  return senders.size() >= quorum_size(config);
}

// Runs consensus instances one after another and keeps the decided log.
class Replica {
 public:
  Replica(Signer signer, SystemConfig config, Duration base_timeout,
          ProposalSource proposals = default_proposal)
      : signer_(std::move(signer)),
        config_(std::move(config)),
        base_timeout_(base_timeout),
        proposals_(std::move(proposals)) {}

  ProcessId self() const { return signer_.id(); }

  // Starts instance `instance`, which must equal the log length, after the
  // previous instance decided.
  std::vector<Action> advance(InstanceId instance, SimTime now) {
    if (instance.value != log_.size() || (current_ && !current_->decision())) {
      throw std::logic_error("advance out of order: instance " + std::to_string(instance.value) +
                             " with log length " + std::to_string(log_.size()));
    }
    current_.emplace(signer_, config_, base_timeout_);
    auto out = current_->start(instance, proposals_(self(), instance), now);

    auto buffered = future_.extract(instance);
    if (!buffered.empty()) {
      for (const auto& m : buffered.mapped()) append(out, deliver_current(m, now));
    }
    return out;
  }

  std::vector<Action> on_message(const SignedMessage& m, SimTime now) {
    const InstanceId l = m.payload.instance;
    if (log_.contains(l) && !(current_ && current_->instance() == l)) {
      if (m.payload.type == MessageType::round_change && validate_round_change(m, config_)) {
        return sync_on_round_change(m);
      }
      return {};
    }
    if (current_ && current_->instance() == l) return deliver_current(m, now);
    if (l.value >= log_.size()) future_[l].push_back(m);
    return {};
  }

  std::vector<Action> on_timer(InstanceId instance, SimTime now) {
    if (!current_ || current_->instance() != instance) return {};
    return forward(current_->handle_event(TimerExpired{instance}, now));
  }

  // Catch-up path: hand the stored commit quorum to a process that is still
  // changing rounds in an instance this replica already decided.
  std::vector<Action> sync_on_round_change(const SignedMessage& rc) const {
    const InstanceId l = rc.payload.instance;
    if (rc.payload.type != MessageType::round_change || !log_.contains(l) || rc.sender == self()) {
      return {};
    }
    std::vector<Action> out;
    for (const auto& c : log_.at(l).certificate.commits) out.emplace_back(Unicast{rc.sender, c});
    return out;
  }

  bool ready_to_advance() const { return !current_ || current_->decision().has_value(); }
  const ReplicaLog& log() const { return log_; }
  const Instance* current() const { return current_ ? &*current_ : nullptr; }

  std::vector<FiredRule> take_fired_rules() {
    return current_ ? current_->take_fired_rules() : std::vector<FiredRule>{};
  }

 private:
  static void append(std::vector<Action>& out, std::vector<Action> more) {
    out.insert(out.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  }

  std::vector<Action> deliver_current(const SignedMessage& m, SimTime now) {
    return forward(current_->handle_event(Deliver{m}, now));
  }

  std::vector<Action> forward(std::vector<Action> actions) {
    for (const auto& a : actions) {
      if (const auto* d = std::get_if<Decide>(&a)) log_.append(d->instance, d->value, d->certificate);
    }
    return actions;
  }

  Signer signer_;
  SystemConfig config_;
  Duration base_timeout_;
  ProposalSource proposals_;
  ReplicaLog log_;
  std::optional<Instance> current_;
  std::map<InstanceId, std::vector<SignedMessage>> future_;
};

}  // namespace ibft
