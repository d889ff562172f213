#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "ibft/core.hpp"

namespace ibft {

struct PrepareCertificate {
  std::vector<SignedMessage> prepares;
};

// Each entry with a prepared claim carries its own PrepareCertificate as the
// message's justification.
struct RoundChangeCertificate {
  std::vector<SignedMessage> round_changes;
};

struct HighestPrepared {
  Round round;
  Value value;
  bool operator==(const HighestPrepared&) const = default;
};

// Number of distinct senders among `messages` carrying a valid PREPARE for
// exactly (instance, round, value). Duplicate senders count once.
inline std::size_t count_prepares(std::span<const SignedMessage> messages, InstanceId instance,
                                  Round round, const Value& value, const SystemConfig& config) {
  std::set<ProcessId> senders;
  for (const auto& m : messages) {
    const Payload& p = m.payload;
    if (p.type != MessageType::prepare || p.instance != instance || p.round != round ||
        p.value != value) {
      continue;
    }
    if (!validate_message(m, config)) continue;
    senders.insert(m.sender);
  }
  return senders.size();
}

inline bool is_prepare_certificate_for(std::span<const SignedMessage> messages, InstanceId instance,
                                       Round round, const Value& value,
                                       const SystemConfig& config) {
  return count_prepares(messages, instance, round, value, config) >= quorum_size(config);
}

// A ROUND-CHANGE with a prepared claim is only valid when it embeds a quorum
// of PREPARE messages for that claim.
inline Validation validate_round_change(const SignedMessage& m, const SystemConfig& config) {
  if (auto v = validate_message(m, config); !v) return v;
  const Payload& p = m.payload;
  if (p.type != MessageType::round_change) return {};
  if (!p.prepared.present()) return {};
  if (!is_prepare_certificate_for(m.justification_messages(), p.instance, *p.prepared.round,
                                  *p.prepared.value, config)) {
    return {Rejection::missing_prepare_certificate};
  }
  return {};
}

// Entry with the highest prepared round; ties go to the lowest sender index.
inline std::optional<HighestPrepared> highest_prepared(std::span<const SignedMessage> round_changes) {
  const SignedMessage* best = nullptr;
  for (const auto& m : round_changes) {
    const PreparedState& ps = m.payload.prepared;
    if (!ps.present()) continue;
    if (best == nullptr) {
      best = &m;
      continue;
    }
    const Round br = *best->payload.prepared.round;
    if (*ps.round > br || (*ps.round == br && m.sender < best->sender)) best = &m;
  }
  if (best == nullptr) return std::nullopt;
  return HighestPrepared{*best->payload.prepared.round, *best->payload.prepared.value};
}

inline std::optional<HighestPrepared> highest_prepared(const RoundChangeCertificate& q) {
  return highest_prepared(std::span<const SignedMessage>(q.round_changes));
}

namespace detail {

// A quorum of valid ROUND-CHANGE messages for (instance, round) from distinct
// senders, every one of them valid including its embedded proof.
inline bool is_round_change_quorum(std::span<const SignedMessage> q, InstanceId instance, Round round,
                                   const SystemConfig& config) {
  std::set<ProcessId> senders;
  for (const auto& m : q) {
    const Payload& p = m.payload;
    if (p.type != MessageType::round_change || p.instance != instance || p.round != round) {
      return false;
    }
    if (!validate_round_change(m, config)) return false;
    senders.insert(m.sender);
  }
  return senders.size() >= quorum_size(config);
}

inline std::vector<SignedMessage> pooled_prepares(std::span<const SignedMessage> q) {
  std::vector<SignedMessage> pool;
  for (const auto& m : q) {
    const auto& j = m.justification_messages();
    pool.insert(pool.end(), j.begin(), j.end());
  }
  return pool;
}

// J1 or J2 over a set already known to be structurally sound. J2 accepts a
// maximal claim (pr, pv) when a quorum of PREPARE(instance, pr, pv) has been
// received among the piggybacked messages. `required_value` restricts the
// admissible maximal claims to one value (PRE-PREPARE justification).
inline bool round_changes_justified(std::span<const SignedMessage> q, const SystemConfig& config,
                                    const Value* required_value) {
  std::optional<Round> top;
  for (const auto& m : q) {
    const auto& ps = m.payload.prepared;
    if (ps.present() && (!top || *ps.round > *top)) top = ps.round;
  }
  if (!top) return true;  // J1

  const auto pool = pooled_prepares(q);
  for (const auto& m : q) {
    const auto& ps = m.payload.prepared;
    if (!ps.present() || *ps.round != *top) continue;
    if (required_value != nullptr && *ps.value != *required_value) continue;
    if (is_prepare_certificate_for(pool, m.payload.instance, *ps.round, *ps.value, config)) {
      return true;
    }
  }
  return false;
}

}  // namespace detail

inline bool justify_round_change(const RoundChangeCertificate& q, const SystemConfig& config) {
  if (q.round_changes.empty()) return false;
  const Payload& first = q.round_changes.front().payload;
  if (!detail::is_round_change_quorum(q.round_changes, first.instance, first.round, config)) {
    return false;
  }
  return detail::round_changes_justified(q.round_changes, config, nullptr);
}

inline bool justify_pre_prepare(const SignedMessage& m, const SystemConfig& config) {
  const Payload& p = m.payload;
  if (p.type != MessageType::pre_prepare) return false;
  if (p.round.value == 1) return true;
  const auto& q = m.justification_messages();
  if (!detail::is_round_change_quorum(q, p.instance, p.round, config)) return false;
  return detail::round_changes_justified(q, config, &p.value);
}

}  // namespace ibft
