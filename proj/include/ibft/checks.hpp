#pragma once

#include <functional>
#include <map>
#include <set>
#include <tuple>
#include <string>
#include <vector>

#include "ibft/core.hpp"
#include "ibft/justification.hpp"
#include "ibft/scenario.hpp"
#include "ibft/simnet.hpp"
#include "ibft/trace.hpp"

namespace ibft {

struct Verdict {
  std::string name;
  bool pass = true;
  std::string detail;
};

namespace detail {

inline bool from_correct(const TraceRecord& r, const std::optional<TraceHeader>& h) {
  if (!r.process) return false;
  return !h || h->correct(*r.process);
}

}  // namespace detail

// All correct decisions for the same instance carry the same value.
inline Verdict check_agreement(const RunTrace& trace) {
  const auto header = read_header(trace);
  std::map<std::uint64_t, std::string> first;
  for (const auto& r : trace.records()) {
    if (r.kind != RecordKind::decide || !detail::from_correct(r, header)) continue;
    const auto l = field_u64(r.detail, "l").value_or(0);
    const std::string v(field(r.detail, "v").value_or(""));
    auto [it, inserted] = first.emplace(l, v);
    if (!inserted && it->second != v) {
      return {"agreement", false, "instance " + std::to_string(l) + ": " + it->second + " vs " + v};
    }
  }
  return {"agreement", true, {}};
}

inline Verdict check_validity(const RunTrace& trace, const std::function<bool(const Value&)>& beta) {
  const auto header = read_header(trace);
  for (const auto& r : trace.records()) {
    if (r.kind != RecordKind::decide || !detail::from_correct(r, header)) continue;
    const Value v = unescape_value(field(r.detail, "v").value_or(""));
    if (beta && !beta(v)) {
      return {"validity", false, format_process(*r.process) + " decided " + escape_value(v)};
    }
  }
  return {"validity", true, {}};
}

// Every correct process decided every instance within the bound.
inline Verdict check_termination(const RunTrace& trace, const Scenario& s) {
  std::map<std::uint32_t, std::set<std::uint64_t>> decided;
  for (const auto& r : trace.records()) {
    if (r.kind != RecordKind::decide || !r.process || r.time > s.bound.max_time) continue;
    decided[r.process->index].insert(field_u64(r.detail, "l").value_or(UINT64_MAX));
  }
  for (std::uint32_t i = 0; i < s.n; ++i) {
    if (s.faulty(ProcessId{i})) continue;
    for (std::uint64_t l = 0; l < s.instances; ++l) {
      if (!decided[i].count(l)) {
        return {"termination", false, "p" + std::to_string(i) + " undecided in instance " + std::to_string(l)};
      }
    }
  }
  return {"termination", true, {}};
}

// No two correct processes prepare different values in the same round.
inline Verdict check_prepared_consistency(const RunTrace& trace) {
  const auto header = read_header(trace);
  std::map<std::pair<std::uint64_t, std::uint64_t>, std::string> prepared;
  for (const auto& r : trace.records()) {
    if (r.kind != RecordKind::rule_fire || !detail::from_correct(r, header)) continue;
    if (field(r.detail, "rule").value_or("") != "R2") continue;
    const auto key = std::make_pair(field_u64(r.detail, "l").value_or(0), field_u64(r.detail, "r").value_or(0));
    const std::string v(field(r.detail, "v").value_or(""));
    auto [it, inserted] = prepared.emplace(key, v);
    if (!inserted && it->second != v) {
      return {"prepared_consistency", false,
              "round " + std::to_string(key.second) + ": " + it->second + " vs " + v};
    }
  }
  return {"prepared_consistency", true, {}};
}

inline Verdict check_post_gst_delivery(const RunTrace& trace, const NetConfig& net) {
  return {"post_gst_delivery", deliver_semantics_check(trace, net), {}};
}

// Post-hoc certificate builder. For every (instance, r, v) prepared by at
// least f+1 correct processes, assemble every quorum of valid ROUND-CHANGE
// messages for each later round that the run's messages allow: the
// ROUND-CHANGEs actually sent, plus anything the faulty processes could sign
// themselves using PREPAREs they observed. No PRE-PREPARE for a different
// value may be justified by such a quorum.
struct LockedProposalStats {
  std::size_t premises = 0;
  std::size_t quorums_checked = 0;
  bool truncated = false;
};

inline Verdict check_locked_proposals(const RunOutcome& outcome, const Scenario& s, LockedProposalStats* stats = nullptr,
                                      std::size_t budget = 200'000) {
  const SystemConfig config = s.system_config();
  const std::size_t q = quorum_size(config);
  const KeyRing keys;
  LockedProposalStats local;

  std::map<std::tuple<std::uint64_t, std::uint64_t, std::string>, std::set<std::uint32_t>> preparers;
  for (const auto& r : outcome.trace.records()) {
    if (r.kind != RecordKind::rule_fire || !r.process || s.faulty(*r.process)) continue;
    if (field(r.detail, "rule").value_or("") != "R2") continue;
    preparers[{field_u64(r.detail, "l").value_or(0), field_u64(r.detail, "r").value_or(0),
               std::string(field(r.detail, "v").value_or(""))}]
        .insert(r.process->index);
  }

  for (const auto& [key, who] : preparers) {
    if (who.size() < static_cast<std::size_t>(s.f) + 1) continue;
    ++local.premises;
    const InstanceId lambda{std::get<0>(key)};
    const Round locked_round{std::get<1>(key)};
    const Value locked_value = unescape_value(std::get<2>(key));

    std::uint64_t max_round = locked_round.value;
    std::map<std::pair<Round, Value>, std::vector<SignedMessage>> prepares;
    for (const auto& m : outcome.messages) {
      if (m.payload.instance != lambda) continue;
      max_round = std::max(max_round, m.payload.round.value);
      if (m.payload.type == MessageType::prepare && validate_message(m, config)) {
        prepares[{m.payload.round, m.payload.value}].push_back(m);
      }
    }

    for (std::uint64_t rv = locked_round.value + 1; rv <= max_round + 1; ++rv) {
      const Round target{rv};
      // Per sender, the distinct valid prepared claims available for `target`.
      std::vector<std::vector<SignedMessage>> options(s.n);
      auto add_option = [&](const SignedMessage& m) {
        if (!validate_round_change(m, config)) return;
        auto& opts = options[m.sender.index];
        for (const auto& o : opts) {
          if (o.payload.prepared == m.payload.prepared) return;
        }
        opts.push_back(m);
      };
      for (const auto& m : outcome.messages) {
        if (m.payload.type == MessageType::round_change && m.payload.instance == lambda &&
            m.payload.round == target && m.sender.index < s.n) {
          add_option(m);
        }
      }
      for (const auto& a : s.adversaries) {
        const Signer signer = keys.issue(a.process);
        add_option(signer.sign(Payload::round_change(lambda, target, PreparedState::none())));
        for (const auto& [claim, msgs] : prepares) {
          if (!(claim.first < target)) continue;
          add_option(signer.sign(Payload::round_change(lambda, target, PreparedState::at(claim.first, claim.second)),
                                 make_justification(msgs)));
        }
      }

      std::vector<std::uint32_t> senders;
      for (std::uint32_t i = 0; i < s.n; ++i) {
        if (!options[i].empty()) senders.push_back(i);
      }
      if (senders.size() < q) continue;

      const Signer proposer = keys.issue(leader(lambda, target, s.n));
      std::vector<std::size_t> pick(q);
      for (std::size_t i = 0; i < q; ++i) pick[i] = i;
      // Walk all q-subsets of senders, then every choice of option per sender.
      while (true) {
        std::vector<std::size_t> choice(q, 0);
        while (true) {
          if (local.quorums_checked >= budget) {
            local.truncated = true;
            break;
          }
          ++local.quorums_checked;
          std::vector<SignedMessage> quorum;
          quorum.reserve(q);
          for (std::size_t i = 0; i < q; ++i) quorum.push_back(options[senders[pick[i]]][choice[i]]);
          const auto hp = highest_prepared(std::span<const SignedMessage>(quorum));
          std::vector<Value> candidates{Value("forged-proposal")};
          if (hp && hp->value != locked_value) candidates.push_back(hp->value);
          auto just = make_justification(quorum);
          for (const auto& v : candidates) {
            if (v == locked_value) continue;
            const auto pp = proposer.sign(Payload::pre_prepare(lambda, target, v), just);
            if (justify_pre_prepare(pp, config)) {
              if (stats) *stats = local;
              return {"locked_proposals", false,
                      "round " + std::to_string(target.value) + " justifies " + escape_value(v) + " over locked " +
                          escape_value(locked_value)};
            }
          }
          std::size_t k = q;
          while (k > 0 && choice[k - 1] + 1 >= options[senders[pick[k - 1]]].size()) {
            choice[k - 1] = 0;
            --k;
          }
          if (k == 0) break;
          ++choice[k - 1];
        }
        if (local.truncated) break;
        std::size_t i = q;
        while (i > 0 && pick[i - 1] == senders.size() - q + (i - 1)) --i;
        if (i == 0) break;
        ++pick[i - 1];
        for (std::size_t j = i; j < q; ++j) pick[j] = pick[j - 1] + 1;
      }
    }
  }
  if (stats) *stats = local;
  return {"locked_proposals", true, local.truncated ? "truncated" : ""};
}

}  // namespace ibft
