#pragma once

#include <initializer_list>
#include <vector>

#include "ibft/core.hpp"
#include "ibft/justification.hpp"

namespace ibft::testing {

inline const KeyRing& keys() {
  static const KeyRing k;
  return k;
}

inline SignedMessage prepare_from(std::uint32_t sender, std::uint64_t round, const std::string& v,
                                  std::uint64_t instance = 0) {
  return keys().issue(ProcessId{sender}).sign(Payload::prepare(InstanceId{instance}, Round{round}, Value(v)));
}

inline SignedMessage commit_from(std::uint32_t sender, std::uint64_t round, const std::string& v,
                                 std::uint64_t instance = 0) {
  return keys().issue(ProcessId{sender}).sign(Payload::commit(InstanceId{instance}, Round{round}, Value(v)));
}

inline std::vector<SignedMessage> prepares(std::initializer_list<std::uint32_t> senders, std::uint64_t round,
                                           const std::string& v, std::uint64_t instance = 0) {
  std::vector<SignedMessage> out;
  for (auto s : senders) out.push_back(prepare_from(s, round, v, instance));
  return out;
}

// ROUND-CHANGE without a prepared claim.
inline SignedMessage rc_none(std::uint32_t sender, std::uint64_t round, std::uint64_t instance = 0) {
  return keys().issue(ProcessId{sender}).sign(
      Payload::round_change(InstanceId{instance}, Round{round}, PreparedState::none()));
}

// ROUND-CHANGE claiming (pr, pv) with `proof` embedded.
inline SignedMessage rc_claim(std::uint32_t sender, std::uint64_t round, std::uint64_t pr, const std::string& pv,
                              std::vector<SignedMessage> proof, std::uint64_t instance = 0) {
  return keys().issue(ProcessId{sender}).sign(
      Payload::round_change(InstanceId{instance}, Round{round}, PreparedState::at(Round{pr}, Value(pv))),
      make_justification(std::move(proof)));
}

inline SignedMessage pre_prepare_from(std::uint32_t sender, std::uint64_t round, const std::string& v,
                                      std::vector<SignedMessage> justification = {}, std::uint64_t instance = 0) {
  return keys().issue(ProcessId{sender}).sign(Payload::pre_prepare(InstanceId{instance}, Round{round}, Value(v)),
                                             justification.empty() ? Justification{}
                                                                   : make_justification(std::move(justification)));
}

}  // namespace ibft::testing
