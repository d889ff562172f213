#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ibft {

// Identifiers and scalar domain types -----------------------------------------

struct ProcessId {
  std::uint32_t index = 0;
  auto operator<=>(const ProcessId&) const = default;
};

struct Round {
  std::uint64_t value = 1;
  auto operator<=>(const Round&) const = default;
  Round next() const { return Round{value + 1}; }
};

struct InstanceId {
  std::uint64_t value = 0;
  auto operator<=>(const InstanceId&) const = default;
};

// Virtual simulation time and durations share one unit.
using SimTime = std::uint64_t;
using Duration = std::uint64_t;

// Opaque proposal payload. Identity is byte equality.
struct Value {
  std::string bytes;

  Value() = default;
  explicit Value(std::string b) : bytes(std::move(b)) {}

  auto operator<=>(const Value&) const = default;
};

// (pr, pv). Both absent means the process has not prepared. Byzantine senders
// may produce a half-filled pair, which validation rejects.
struct PreparedState {
  std::optional<Round> round;
  std::optional<Value> value;

  static PreparedState none() { return {}; }
  static PreparedState at(Round r, Value v) { return {r, std::move(v)}; }

  bool present() const { return round.has_value() && value.has_value(); }
  bool consistent() const { return round.has_value() == value.has_value(); }

  bool operator==(const PreparedState&) const = default;
};

enum class MessageType : std::uint8_t {
  pre_prepare = 0,
  prepare = 1,
  commit = 2,
  round_change = 3,
};

inline std::string_view to_string(MessageType t) {
  switch (t) {
    case MessageType::pre_prepare: return "PRE-PREPARE";
    case MessageType::prepare: return "PREPARE";
    case MessageType::commit: return "COMMIT";
    case MessageType::round_change: return "ROUND-CHANGE";
  }
  return "?";
}

// The signed part of a message. `value` is meaningful for PRE-PREPARE, PREPARE
// and COMMIT; `prepared` only for ROUND-CHANGE.
struct Payload {
  MessageType type = MessageType::prepare;
  InstanceId instance;
  Round round;
  Value value;
  PreparedState prepared;

  bool operator==(const Payload&) const = default;

  static Payload pre_prepare(InstanceId l, Round r, Value v) {
    return {MessageType::pre_prepare, l, r, std::move(v), {}};
  }
  static Payload prepare(InstanceId l, Round r, Value v) {
    return {MessageType::prepare, l, r, std::move(v), {}};
  }
  static Payload commit(InstanceId l, Round r, Value v) {
    return {MessageType::commit, l, r, std::move(v), {}};
  }
  static Payload round_change(InstanceId l, Round r, PreparedState p) {
    return {MessageType::round_change, l, r, {}, std::move(p)};
  }
};

struct Authenticator {
  std::uint64_t tag = 0;
  bool operator==(const Authenticator&) const = default;
};

struct SignedMessage;

// Piggybacked justification. Immutable once attached, so copies share it.
using Justification = std::shared_ptr<const std::vector<SignedMessage>>;

struct SignedMessage {
  ProcessId sender;
  Payload payload;
  Authenticator authenticator;
  Justification justification;

  // The justification is not part of the message itself.
  bool operator==(const SignedMessage& o) const {
    return sender == o.sender && payload == o.payload &&
           authenticator == o.authenticator;
  }

  const std::vector<SignedMessage>& justification_messages() const {
    static const std::vector<SignedMessage> empty;
    return justification ? *justification : empty;
  }
};

inline Justification make_justification(std::vector<SignedMessage> messages) {
  return std::make_shared<const std::vector<SignedMessage>>(std::move(messages));
}

// Hashing ---------------------------------------------------------------------

namespace detail {

inline constexpr std::uint64_t fnv_offset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t fnv_prime = 0x100000001b3ULL;

inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = fnv_offset) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= fnv_prime;
  }
  return h;
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_bytes(std::string& out, std::string_view b) {
  put_u64(out, b.size());
  out.append(b);
}

// Canonical byte encoding of a payload; the authenticator binds to this.
inline std::string encode(const Payload& p) {
  std::string out;
  out.push_back(static_cast<char>(p.type));
  put_u64(out, p.instance.value);
  put_u64(out, p.round.value);
  put_bytes(out, p.value.bytes);
  out.push_back(p.prepared.round ? 1 : 0);
  put_u64(out, p.prepared.round ? p.prepared.round->value : 0);
  out.push_back(p.prepared.value ? 1 : 0);
  put_bytes(out, p.prepared.value ? std::string_view{p.prepared.value->bytes} : "");
  return out;
}

// Final avalanche step.
inline std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t authority_secret = 0x5eed1b7f00c0ffeeULL;

inline std::uint64_t compute_tag(ProcessId sender, const Payload& p) {
  std::string buf;
  put_u64(buf, authority_secret);
  put_u64(buf, sender.index);
  buf += encode(p);
  return mix(fnv1a(buf));
}

}  // namespace detail

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

inline std::string value_digest(const Value& v) { return hex64(detail::fnv1a(v.bytes)); }

// Simulated authentication ----------------------------------------------------
//
// A Signer produces tags for exactly one process. Signers are only handed out
// by a KeyRing, which the simulator owns; an adversary receives the Signer of
// its own process and nothing else.

class Signer {
 public:
  ProcessId id() const { return id_; }

  SignedMessage sign(Payload payload, Justification justification = {}) const {
    SignedMessage m;
    m.sender = id_;
    m.authenticator.tag = detail::compute_tag(id_, payload);
    m.payload = std::move(payload);
    m.justification = std::move(justification);
    return m;
  }

 private:
  friend class KeyRing;
  explicit Signer(ProcessId id) : id_(id) {}
  ProcessId id_;
};

class KeyRing {
 public:
  Signer issue(ProcessId id) const { return Signer(id); }
};

inline bool verify_authenticator(const SignedMessage& m) {
  return m.authenticator.tag == detail::compute_tag(m.sender, m.payload);
}

// System configuration and quorum arithmetic -----------------------------------

class SystemConfig {
 public:
  using Predicate = std::function<bool(const Value&)>;

  SystemConfig(std::uint32_t n, std::uint32_t f, Predicate beta = {})
      : n_(n), f_(f), beta_(std::move(beta)) {
    if (n < 1) throw std::invalid_argument("n >= 1 violated");
    if (static_cast<std::uint64_t>(n) < 3ULL * f + 1) {
      throw std::invalid_argument("n >= 3f+1 violated");
    }
  }

  std::uint32_t n() const { return n_; }
  std::uint32_t f() const { return f_; }

  bool beta(const Value& v) const { return !beta_ || beta_(v); }

 private:
  std::uint32_t n_;
  std::uint32_t f_;
  Predicate beta_;
};

inline std::size_t quorum_size(std::uint32_t n, std::uint32_t f) {
  return (static_cast<std::size_t>(n) + f) / 2 + 1;
}

inline std::size_t quorum_size(const SystemConfig& config) {
  return quorum_size(config.n(), config.f());
}

inline std::uint32_t max_faulty(std::uint32_t n) { return n == 0 ? 0 : (n - 1) / 3; }

// Round-robin leader rotation.
inline ProcessId leader(InstanceId instance, Round round, std::uint32_t n) {
  if (round.value < 1) throw std::invalid_argument("round must be >= 1");
  return ProcessId{static_cast<std::uint32_t>((instance.value + round.value - 1) % n)};
}

// base * 2^(round-1), saturating.
inline Duration timeout(Round round, Duration base) {
  if (round.value < 1) throw std::invalid_argument("round must be >= 1");
  if (base == 0) throw std::invalid_argument("base timeout must be positive");
  const std::uint64_t shift = round.value - 1;
  if (shift >= 63 || base > (UINT64_MAX >> shift)) return UINT64_MAX;
  return base << shift;
}

// Stateless message validation ------------------------------------------------

enum class Rejection : std::uint8_t {
  none,
  bad_authenticator,
  round_zero,
  beta_rejected,
  prepared_mismatch,
  prepared_not_below_round,
  missing_prepare_certificate,
  foreign_instance,
  unjustified,
};

inline std::string_view to_string(Rejection r) {
  switch (r) {
    case Rejection::none: return "none";
    case Rejection::bad_authenticator: return "bad_authenticator";
    case Rejection::round_zero: return "round_zero";
    case Rejection::beta_rejected: return "beta_rejected";
    case Rejection::prepared_mismatch: return "prepared_mismatch";
    case Rejection::prepared_not_below_round: return "prepared_not_below_round";
    case Rejection::missing_prepare_certificate: return "missing_prepare_certificate";
    case Rejection::foreign_instance: return "foreign_instance";
    case Rejection::unjustified: return "unjustified";
  }
  return "?";
}

struct Validation {
  Rejection reason = Rejection::none;
  explicit operator bool() const { return reason == Rejection::none; }
};

inline Validation validate_message(const SignedMessage& m, const SystemConfig& config) {
  const Payload& p = m.payload;
  if (m.sender.index >= config.n() || !verify_authenticator(m)) {
    return {Rejection::bad_authenticator};
  }
  if (p.round.value < 1) return {Rejection::round_zero};
  if (p.type == MessageType::round_change) {
    if (!p.prepared.consistent()) return {Rejection::prepared_mismatch};
    if (p.prepared.present()) {
      if (!(*p.prepared.round < p.round)) return {Rejection::prepared_not_below_round};
      if (p.prepared.round->value < 1) return {Rejection::round_zero};
      if (!config.beta(*p.prepared.value)) return {Rejection::beta_rejected};
    }
  } else if (!config.beta(p.value)) {
    return {Rejection::beta_rejected};
  }
  return {};
}

// Text rendering used by traces and logs -------------------------------------

inline std::string format_process(ProcessId p) { return "p" + std::to_string(p.index); }

// Printable ASCII passes through; whitespace and %=, become %XX.
inline std::string escape_value(const Value& v) {
  static constexpr char digits[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : v.bytes) {
    if (c > 0x20 && c < 0x7f && c != '%' && c != '=' && c != ',') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(digits[c >> 4]);
      out.push_back(digits[c & 0xf]);
    }
  }
  return out;
}

inline Value unescape_value(std::string_view s) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
  };
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size() && nibble(s[i + 1]) >= 0 && nibble(s[i + 2]) >= 0) {
      out.push_back(static_cast<char>(nibble(s[i + 1]) * 16 + nibble(s[i + 2])));
      i += 2;
    } else {
      out.push_back(s[i]);
    }
  }
  return Value(std::move(out));
}

inline std::string describe(const SignedMessage& m) {
  const Payload& p = m.payload;
  std::string s = "type=" + std::string(to_string(p.type)) +
                  " l=" + std::to_string(p.instance.value) +
                  " r=" + std::to_string(p.round.value);
  if (p.type == MessageType::round_change) {
    s += " pr=" + (p.prepared.round ? std::to_string(p.prepared.round->value) : std::string("-"));
    s += " pv=" + (p.prepared.value ? escape_value(*p.prepared.value) : std::string("-"));
  } else {
    s += " v=" + escape_value(p.value);
  }
  s += " from=" + format_process(m.sender);
  s += " just=" + std::to_string(m.justification_messages().size());
  return s;
}

}  // namespace ibft
