#pragma once

#include <charconv>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ibft/core.hpp"

namespace ibft {

enum class RecordKind : std::uint8_t {
  config,
  send,
  deliver,
  drop,
  timer_set,
  timer_fire,
  rule_fire,
  decide,
  halt,
};

inline std::string_view to_string(RecordKind k) {
  switch (k) {
    case RecordKind::config: return "config";
    case RecordKind::send: return "send";
    case RecordKind::deliver: return "deliver";
    case RecordKind::drop: return "drop";
    case RecordKind::timer_set: return "timer_set";
    case RecordKind::timer_fire: return "timer_fire";
    case RecordKind::rule_fire: return "rule_fire";
    case RecordKind::decide: return "decide";
    case RecordKind::halt: return "halt";
  }
  return "?";
}

inline std::optional<RecordKind> parse_record_kind(std::string_view s) {
  for (auto k : {RecordKind::config, RecordKind::send, RecordKind::deliver, RecordKind::drop,
                 RecordKind::timer_set, RecordKind::timer_fire, RecordKind::rule_fire,
                 RecordKind::decide, RecordKind::halt}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

// `detail` is a space separated list of key=value tokens (and bare words).
struct TraceRecord {
  SimTime time = 0;
  RecordKind kind = RecordKind::config;
  std::optional<ProcessId> process;
  std::string detail;

  bool operator==(const TraceRecord&) const = default;

  std::string line() const {
    std::string s = std::to_string(time);
    s += '\t';
    s += to_string(kind);
    s += '\t';
    s += process ? format_process(*process) : std::string("*");
    s += '\t';
    s += detail;
    return s;
  }
};

// Value of `key=` in a detail string, if present.
inline std::optional<std::string_view> field(std::string_view detail, std::string_view key) {
  std::size_t pos = 0;
  while (pos <= detail.size()) {
    std::size_t end = detail.find(' ', pos);
    if (end == std::string_view::npos) end = detail.size();
    std::string_view token = detail.substr(pos, end - pos);
    if (token.size() > key.size() && token.substr(0, key.size()) == key && token[key.size()] == '=') {
      return token.substr(key.size() + 1);
    }
    pos = end + 1;
  }
  return std::nullopt;
}

inline std::optional<std::uint64_t> parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<std::uint64_t> field_u64(std::string_view detail, std::string_view key) {
  auto f = field(detail, key);
  return f ? parse_u64(*f) : std::nullopt;
}

inline std::optional<ProcessId> parse_process(std::string_view s) {
  if (s.size() < 2 || s[0] != 'p') return std::nullopt;
  auto v = parse_u64(s.substr(1));
  if (!v || *v > UINT32_MAX) return std::nullopt;
  return ProcessId{static_cast<std::uint32_t>(*v)};
}

// Totally ordered, append-only record of a run.
class RunTrace {
 public:
  void append(TraceRecord r) { records_.push_back(std::move(r)); }

  const std::vector<TraceRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  // FNV-1a over every rendered line including its newline.
  std::uint64_t digest() const {
    std::uint64_t h = detail::fnv_offset;
    for (const auto& r : records_) {
      h = detail::fnv1a(r.line(), h);
      h = detail::fnv1a("\n", h);
    }
    return h;
  }

  std::string to_text() const {
    std::string out;
    for (const auto& r : records_) {
      out += r.line();
      out += '\n';
    }
    out += "digest\t" + hex64(digest()) + "\n";
    return out;
  }

  // Inverse of to_text. A trailing digest line, when present, must match.
  static RunTrace parse(std::string_view text) {
    RunTrace t;
    std::optional<std::string> claimed;
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      std::string_view line = text.substr(pos, end - pos);
      pos = end + 1;
      if (line.empty()) continue;
      if (line.substr(0, 7) == "digest\t") {
        claimed = std::string(line.substr(7));
        continue;
      }
      std::string_view cols[4];
      std::size_t start = 0;
      for (int i = 0; i < 3; ++i) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string_view::npos) throw std::runtime_error("malformed trace line");
        cols[i] = line.substr(start, tab - start);
        start = tab + 1;
      }
      cols[3] = line.substr(start);
      TraceRecord r;
      auto time = parse_u64(cols[0]);
      auto kind = parse_record_kind(cols[1]);
      if (!time || !kind) throw std::runtime_error("malformed trace line");
      r.time = *time;
      r.kind = *kind;
      if (cols[2] != "*") {
        r.process = parse_process(cols[2]);
        if (!r.process) throw std::runtime_error("malformed trace process");
      }
      r.detail = std::string(cols[3]);
      t.append(std::move(r));
    }
    if (claimed && *claimed != hex64(t.digest())) throw std::runtime_error("trace digest mismatch");
    return t;
  }

 private:
  std::vector<TraceRecord> records_;
};

// Facts recovered from the leading config record.
struct TraceHeader {
  std::uint32_t n = 0;
  std::uint32_t f = 0;
  SimTime gst = 0;
  Duration delta = 0;
  bool fixed_delay = false;
  std::vector<bool> faulty;

  bool correct(ProcessId p) const { return p.index < faulty.size() && !faulty[p.index]; }
};

inline std::optional<TraceHeader> read_header(const RunTrace& trace) {
  for (const auto& r : trace.records()) {
    if (r.kind != RecordKind::config) continue;
    TraceHeader h;
    h.n = static_cast<std::uint32_t>(field_u64(r.detail, "n").value_or(0));
    h.f = static_cast<std::uint32_t>(field_u64(r.detail, "f").value_or(0));
    h.gst = field_u64(r.detail, "gst").value_or(0);
    h.delta = field_u64(r.detail, "delta").value_or(0);
    h.fixed_delay = field(r.detail, "delay").value_or("") == "fixed";
    h.faulty.assign(h.n, false);
    if (auto list = field(r.detail, "faulty"); list && *list != "-") {
      std::size_t pos = 0;
      while (pos <= list->size()) {
        std::size_t end = list->find(',', pos);
        if (end == std::string_view::npos) end = list->size();
        if (auto p = parse_process(list->substr(pos, end - pos)); p && p->index < h.n) {
          h.faulty[p->index] = true;
        }
        pos = end + 1;
      }
    }
    return h;
  }
  return std::nullopt;
}

}  // namespace ibft
