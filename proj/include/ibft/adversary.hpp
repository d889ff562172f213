#pragma once

#include <deque>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ibft/core.hpp"
#include "ibft/instance.hpp"
#include "ibft/smr.hpp"

namespace ibft {

// Byzantine strategies -------------------------------------------------------

struct Silent {
  bool operator==(const Silent&) const = default;
};

// Correct behavior for the first `events` deliveries/timer expiries, then silence.
struct CrashAfter {
  std::size_t events = 0;
  bool operator==(const CrashAfter&) const = default;
};

// When leading a round, sends a different value to each block of destinations.
struct EquivocatingLeader {
  std::vector<Value> values;
  bool operator==(const EquivocatingLeader&) const = default;
};

// Every ROUND-CHANGE claims (prepared_round, value) with no supporting PREPAREs.
struct StaleClaim {
  Round prepared_round;
  Value value;
  bool operator==(const StaleClaim&) const = default;
};

// Seeded arbitrary messages built from what the process has observed.
struct RandomByzantine {
  std::uint64_t seed = 0;
  bool operator==(const RandomByzantine&) const = default;
};

using Strategy = std::variant<Silent, CrashAfter, EquivocatingLeader, StaleClaim, RandomByzantine>;

struct AdversarySpec {
  ProcessId process;
  Strategy strategy;
  bool operator==(const AdversarySpec&) const = default;
};

// Scenario-file spelling: silent | crash:K | equivocate:a,b | stale:R,v | random:S
inline std::string describe(const Strategy& s) {
  struct {
    std::string operator()(const Silent&) const { return "silent"; }
    std::string operator()(const CrashAfter& c) const { return "crash:" + std::to_string(c.events); }
    std::string operator()(const EquivocatingLeader& e) const {
      std::string out = "equivocate:";
      for (std::size_t i = 0; i < e.values.size(); ++i) {
        if (i) out += ',';
        out += escape_value(e.values[i]);
      }
      return out;
    }
    std::string operator()(const StaleClaim& s) const {
      return "stale:" + std::to_string(s.prepared_round.value) + "," + escape_value(s.value);
    }
    std::string operator()(const RandomByzantine& r) const { return "random:" + std::to_string(r.seed); }
  } visitor;
  return std::visit(visitor, s);
}

struct AdversaryContext {
  Signer signer;
  SystemConfig config;
  InstanceId instance;
  Round round;
  Justification justification;  // reused on equivocated PRE-PREPAREs
  std::mt19937_64 rng;
  std::deque<SignedMessage> seen;
  std::size_t emitted = 0;
  std::size_t budget = 400;
};

namespace detail {

inline std::uint64_t draw(std::mt19937_64& rng, std::uint64_t bound) { return bound == 0 ? 0 : rng() % bound; }

inline SignedMessage random_message(AdversaryContext& ctx, const SignedMessage& cue) {
  auto& rng = ctx.rng;
  const Payload& seen = cue.payload;
  std::vector<Value> values{seen.value, Value("rb-x"), Value("rb-y")};
  if (seen.prepared.value) values.push_back(*seen.prepared.value);
  for (const auto& m : ctx.seen) values.push_back(m.payload.value);
  auto pick_value = [&] { return values[draw(rng, values.size())]; };

  const auto type = static_cast<MessageType>(draw(rng, 4));
  const std::uint64_t base = seen.round.value;
  const Round round{std::max<std::uint64_t>(1, base + draw(rng, 3) - 1)};

  Payload p;
  p.type = type;
  p.instance = seen.instance;
  p.round = round;
  Justification just;
  if (type == MessageType::round_change) {
    if (draw(rng, 2) == 0) {
      p.prepared = PreparedState::at(Round{1 + draw(rng, round.value)}, pick_value());
      // Borrow whatever PREPAREs have been observed; sometimes that suffices.
      std::vector<SignedMessage> borrowed;
      for (const auto& m : ctx.seen) {
        if (m.payload.type == MessageType::prepare && draw(rng, 4) != 0) borrowed.push_back(m);
      }
      just = make_justification(std::move(borrowed));
    }
  } else {
    p.value = pick_value();
    if (type == MessageType::pre_prepare && draw(rng, 2) == 0) {
      std::vector<SignedMessage> borrowed;
      for (const auto& m : ctx.seen) {
        if (m.payload.type == MessageType::round_change && m.payload.round == round) {
          borrowed.push_back(m);
        }
      }
      just = make_justification(std::move(borrowed));
    }
  }
  return ctx.signer.sign(std::move(p), std::move(just));
}

}  // namespace detail

// The deviating output of a faulty process for its current context. Processes
// only ever sign with their own Signer.
inline std::vector<Action> byzantine_step(const AdversarySpec& spec, AdversaryContext& ctx,
                                          std::span<const SignedMessage> observed) {
  const std::uint32_t n = ctx.config.n();
  std::vector<Action> out;

  if (const auto* eq = std::get_if<EquivocatingLeader>(&spec.strategy)) {
    if (eq->values.empty() || leader(ctx.instance, ctx.round, n) != ctx.signer.id()) return out;
    for (std::uint32_t dst = 0; dst < n; ++dst) {
      const Value& v = eq->values[static_cast<std::size_t>(dst) * eq->values.size() / n];
      out.emplace_back(Unicast{ProcessId{dst}, ctx.signer.sign(Payload::pre_prepare(ctx.instance, ctx.round, v),
                                                              ctx.justification)});
    }
  } else if (const auto* st = std::get_if<StaleClaim>(&spec.strategy)) {
    out.emplace_back(Broadcast{ctx.signer.sign(
        Payload::round_change(ctx.instance, ctx.round, PreparedState::at(st->prepared_round, st->value)))});
  } else if (std::holds_alternative<RandomByzantine>(spec.strategy)) {
    for (const auto& cue : observed) {
      if (ctx.seen.size() >= 64) ctx.seen.pop_front();
      ctx.seen.push_back(cue);
      if (ctx.emitted >= ctx.budget) continue;
      const auto mode = detail::draw(ctx.rng, 8);
      if (mode >= 4) continue;
      ++ctx.emitted;
      if (mode == 0) {
        // Relaying is allowed; the original authenticator stays intact.
        out.emplace_back(Unicast{ProcessId{static_cast<std::uint32_t>(detail::draw(ctx.rng, n))}, cue});
        continue;
      }
      auto m = detail::random_message(ctx, cue);
      if (mode == 1) {
        out.emplace_back(Broadcast{std::move(m)});
      } else {
        out.emplace_back(Unicast{ProcessId{static_cast<std::uint32_t>(detail::draw(ctx.rng, n))}, std::move(m)});
      }
    }
  }
  return out;
}

// A faulty process as seen by the simulator. Strategies that deviate only at
// specific points run an embedded correct replica and rewrite its output.
class ByzantineProcess {
 public:
  ByzantineProcess(Signer signer, SystemConfig config, Duration base_timeout, ProposalSource proposals,
                   AdversarySpec spec, std::uint64_t run_seed)
      : spec_(std::move(spec)),
        ctx_{signer, config, InstanceId{0}, Round{1}, {}, std::mt19937_64(0), {}, 0, 400} {
    if (const auto* r = std::get_if<RandomByzantine>(&spec_.strategy)) {
      ctx_.rng.seed(detail::mix(r->seed ^ detail::mix(run_seed)));
    }
    if (std::holds_alternative<CrashAfter>(spec_.strategy) ||
        std::holds_alternative<EquivocatingLeader>(spec_.strategy) ||
        std::holds_alternative<StaleClaim>(spec_.strategy)) {
      replica_.emplace(std::move(signer), std::move(config), base_timeout, std::move(proposals));
    }
  }

  ProcessId self() const { return ctx_.signer.id(); }
  const AdversarySpec& spec() const { return spec_; }

  std::vector<Action> advance(InstanceId instance, SimTime now) {
    if (!replica_ || crashed()) return {};
    return rewrite(replica_->advance(instance, now));
  }

  std::vector<Action> on_message(const SignedMessage& m, SimTime now) {
    if (std::holds_alternative<RandomByzantine>(spec_.strategy)) {
      return byzantine_step(spec_, ctx_, std::span<const SignedMessage>(&m, 1));
    }
    if (!replica_ || crashed()) return {};
    ++events_;
    return rewrite(replica_->on_message(m, now));
  }

  std::vector<Action> on_timer(InstanceId instance, SimTime now) {
    if (!replica_ || crashed()) return {};
    ++events_;
    return rewrite(replica_->on_timer(instance, now));
  }

  bool ready_to_advance() const { return replica_ && !crashed() && replica_->ready_to_advance(); }
  std::size_t decided_instances() const { return replica_ ? replica_->log().size() : 0; }

 private:
  bool crashed() const {
    const auto* c = std::get_if<CrashAfter>(&spec_.strategy);
    return c != nullptr && events_ >= c->events;
  }

  std::vector<Action> rewrite(std::vector<Action> actions) {
    const bool equivocate = std::holds_alternative<EquivocatingLeader>(spec_.strategy);
    const bool stale = std::holds_alternative<StaleClaim>(spec_.strategy);
    if (!equivocate && !stale) return actions;

    std::vector<Action> out;
    for (auto& a : actions) {
      const auto* b = std::get_if<Broadcast>(&a);
      const MessageType target = equivocate ? MessageType::pre_prepare : MessageType::round_change;
      if (b == nullptr || b->message.payload.type != target) {
        out.push_back(std::move(a));
        continue;
      }
      ctx_.instance = b->message.payload.instance;
      ctx_.round = b->message.payload.round;
      ctx_.justification = b->message.justification;
      for (auto& x : byzantine_step(spec_, ctx_, {})) out.push_back(std::move(x));
    }
    return out;
  }

  AdversarySpec spec_;
  AdversaryContext ctx_;
  std::optional<Replica> replica_;
  std::size_t events_ = 0;
};

}  // namespace ibft
