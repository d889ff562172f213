#include <chrono>
#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ibft/ibft.hpp"
#include "oracle.hpp"
#include "support.hpp"

namespace {

using namespace ibft;
using namespace ibft::testing;

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Detail {
 public:
  template <typename T>
  Detail& operator<<(const T& x) {
    os_ << x;
    return *this;
  }
  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

const std::vector<std::uint32_t> sweep{4, 7, 10, 13, 16};
constexpr std::uint64_t fuzz_seeds = 1000;

// Expected values computed here rather than read from the library.
std::uint64_t oracle_normal_sends(std::uint64_t n) { return n + 2 * n * n; }
std::uint64_t oracle_round_change_bound(std::uint64_t n) { return 3 * n * n + n; }
std::uint32_t oracle_max_faulty(std::uint32_t n) { return n == 0 ? 0 : (n - 1) / 3; }

enum class Profile { harsh, mild };

// harsh: GST after the second timeout, so decisions land in rounds 3 and 4.
// mild: GST after the first timeout, so decisions land in rounds 1 to 3.
Scenario fuzz_template(std::uint32_t n, std::uint32_t f, Profile profile) {
  Scenario s;
  s.n = n;
  s.f = f;
  s.base_timeout = 1000;
  s.net.delta = 100;
  if (profile == Profile::harsh) {
    s.net.gst = 4000;
    s.net.pre_gst_drop_probability = 0.3;
    s.net.pre_gst_max_delay = 3000;
  } else {
    s.net.gst = 1500;
    s.net.pre_gst_drop_probability = 0.1;
    s.net.pre_gst_max_delay = 600;
  }
  return s;
}

const std::vector<std::pair<std::string, Profile>> profiles{{"harsh", Profile::harsh}, {"mild", Profile::mild}};

std::vector<std::pair<std::string, Strategy>> strategies(std::uint32_t slot) {
  return {
      {"silent", Silent{}},
      {"crash", CrashAfter{6}},
      {"equivocating_leader", EquivocatingLeader{{Value("a"), Value("b")}}},
      {"stale_claim", StaleClaim{Round{1}, Value("stale")}},
      {"random_byzantine", RandomByzantine{17 + slot}},
  };
}

struct FuzzCase {
  std::string name;
  Scenario tmpl;
};

std::vector<FuzzCase> fuzz_cases() {
  std::vector<FuzzCase> out;
  for (const auto& [profile_name, profile] : profiles) {
    for (const auto& [n, f] : std::vector<std::pair<std::uint32_t, std::uint32_t>>{{4, 1}, {7, 2}}) {
      for (std::size_t k = 0; k < 5; ++k) {
        Scenario s = fuzz_template(n, f, profile);
        for (std::uint32_t p = 0; p < f; ++p) s.adversaries.push_back({ProcessId{p}, strategies(p)[k].second});
        out.push_back({profile_name + "/n" + std::to_string(n) + "/" + strategies(0)[k].first, s});
      }
    }
  }
  return out;
}

Scenario validity_template(Profile profile) {
  Scenario s = fuzz_template(4, 1, profile);
  s.beta_reject = {Value("bad")};
  s.adversaries.push_back({ProcessId{0}, EquivocatingLeader{{Value("bad"), Value("bad")}}});
  return s;
}

Scenario laggard_scenario() {
  Scenario s;
  s.net.gst = 5000;
  s.net.isolated = {ProcessId{3}};
  s.net.delay_mode = DelayMode::fixed;
  s.net.seed = 3;
  return s;
}

// Fuzz results are shared by several criteria and computed once.
struct FuzzResults {
  std::vector<std::pair<std::string, FuzzReport>> agreement_runs;
  std::vector<std::pair<std::string, FuzzReport>> validity_runs;
};

const FuzzResults& fuzz_results() {
  static const FuzzResults results = [] {
    FuzzResults r;
    for (const auto& c : fuzz_cases()) r.agreement_runs.emplace_back(c.name, fuzz(c.tmpl, 0, fuzz_seeds));
    for (const auto& [name, profile] : profiles) {
      r.validity_runs.emplace_back(name, fuzz(validity_template(profile), 0, fuzz_seeds));
    }
    return r;
  }();
  return results;
}

std::vector<const FuzzReport*> all_fuzz_reports() {
  std::vector<const FuzzReport*> out;
  for (const auto& [name, rep] : fuzz_results().agreement_runs) out.push_back(&rep);
  for (const auto& [name, rep] : fuzz_results().validity_runs) out.push_back(&rep);
  return out;
}

std::string first_failure(const FuzzReport& rep, const std::string& name) {
  for (const auto& f : rep.failures) {
    if (f.verdict.name == name) return "seed " + std::to_string(f.seed) + ": " + f.verdict.detail;
  }
  return {};
}

// 1 ---------------------------------------------------------------------------

Outcome latency_good_case() {
  Scenario s;
  s.f = 1;
  s.net.gst = 0;
  s.net.delta = 100;
  s.net.delay_mode = DelayMode::fixed;
  const SimTime expected = 3 * s.net.delta;
  const auto out = run(s);
  std::map<std::uint32_t, SimTime> decided;
  for (const auto& r : out.trace.records()) {
    if (r.kind == RecordKind::decide && r.process) decided.emplace(r.process->index, r.time);
  }
  Outcome o;
  Detail d;
  d << "expected t=" << expected << ";";
  for (std::uint32_t p = 0; p < s.n; ++p) {
    const auto it = decided.find(p);
    if (it == decided.end()) {
      o.pass = false;
      d << " p" << p << "=none";
    } else {
      if (it->second != expected) o.pass = false;
      d << " p" << p << "=" << it->second;
    }
  }
  o.detail = d.str();
  return o;
}

// 2 ---------------------------------------------------------------------------

Outcome normal_case_complexity() {
  Scenario tmpl;
  tmpl.net.delay_mode = DelayMode::fixed;
  Outcome o;
  Detail d;
  for (const auto& row : measure_complexity(tmpl, sweep)) {
    const auto expected = oracle_normal_sends(row.n);
    if (row.total_sends != expected || !row.terminated) o.pass = false;
    d << "n=" << row.n << ":" << row.total_sends << "/" << expected << " ";
  }
  const auto doubling = measure_complexity(tmpl, {4, 8, 16});
  for (std::size_t i = 0; i + 1 < doubling.size(); ++i) {
    const double ratio = static_cast<double>(doubling[i + 1].total_sends) / static_cast<double>(doubling[i].total_sends);
    if (!(ratio >= 3.5 && ratio <= 4.1)) o.pass = false;
    d << "ratio " << doubling[i].n << "->" << doubling[i + 1].n << "=" << ratio << " ";
  }
  o.detail = d.str();
  return o;
}

// 3 ---------------------------------------------------------------------------

Outcome round_change_complexity() {
  Outcome o;
  Detail d;
  for (auto n : sweep) {
    Scenario s;
    s.n = n;
    s.f = oracle_max_faulty(n);
    s.adversaries.push_back({ProcessId{0}, Silent{}});
    const auto rep = make_report(run(s).trace, s);
    const auto it = rep.sends_by_round.find(2);
    const std::uint64_t round2 = it == rep.sends_by_round.end() ? 0 : it->second;
    const auto bound = oracle_round_change_bound(n);
    if (round2 == 0 || round2 > bound || !rep.terminated || rep.rounds_used != 2) o.pass = false;
    d << "n=" << n << ":" << round2 << "<=" << bound << " ";
  }
  o.detail = d.str();
  return o;
}

// 4 ---------------------------------------------------------------------------

Outcome agreement_fuzz() {
  Outcome o;
  Detail d;
  std::uint64_t runs = 0;
  std::uint64_t violations = 0;
  for (const auto& [name, rep] : fuzz_results().agreement_runs) {
    runs += rep.runs;
    const auto bad = rep.failures_of("agreement");
    violations += bad;
    if (bad) {
      o.pass = false;
      d << name << " " << first_failure(rep, "agreement") << "; ";
    }
    if (rep.runs != fuzz_seeds) o.pass = false;
  }
  d << runs << " runs, " << violations << " agreement violations";
  o.detail = d.str();
  return o;
}

// 5 ---------------------------------------------------------------------------

Outcome validity_fuzz() {
  Outcome o;
  Detail d;
  std::uint64_t runs = 0;
  std::uint64_t violations = 0;
  for (const auto& [name, rep] : fuzz_results().validity_runs) {
    runs += rep.runs;
    violations += rep.failures_of("validity");
    if (rep.runs != fuzz_seeds || rep.failures_of("validity")) o.pass = false;
    if (rep.failures_of("validity")) d << name << " " << first_failure(rep, "validity") << "; ";
  }
  d << runs << " runs, " << violations << " decisions on the rejected value";
  o.detail = d.str();
  return o;
}

// 6 ---------------------------------------------------------------------------

Outcome termination() {
  Outcome o;
  Detail d;
  std::uint64_t runs = 0;
  std::uint64_t decided = 0;
  for (const auto* rep : all_fuzz_reports()) {
    runs += rep->runs;
    decided += rep->decided_runs;
    if (rep->failures_of("termination")) {
      o.pass = false;
      d << first_failure(*rep, "termination") << "; ";
    }
  }
  if (decided != runs) o.pass = false;
  d << decided << "/" << runs << " fuzz runs decided; ";

  const Scenario s = laggard_scenario();
  const auto out = run(s);
  std::optional<Value> others;
  std::optional<Value> laggard;
  SimTime laggard_time = 0;
  SimTime others_time = 0;
  bool sync = false;
  for (const auto& r : out.trace.records()) {
    if (r.kind == RecordKind::decide && r.process) {
      const Value v = unescape_value(field(r.detail, "v").value_or(""));
      if (r.process->index == 3) {
        laggard = v;
        laggard_time = r.time;
      } else if (!others) {
        others = v;
        others_time = r.time;
      }
    }
    if (r.kind == RecordKind::rule_fire && field(r.detail, "rule").value_or("") == "R7") sync = true;
  }
  const bool laggard_ok = others && laggard && *others == *laggard && others_time < s.net.gst &&
                          laggard_time >= s.net.gst && sync;
  if (!laggard_ok) o.pass = false;
  d << "laggard decided at t=" << laggard_time << " after others at t=" << others_time << ", sync "
    << (sync ? "fired" : "missing") << ", " << (laggard_ok ? "same value" : "MISMATCH");
  o.detail = d.str();
  return o;
}

// 7 ---------------------------------------------------------------------------

Outcome prepared_consistency_fuzz() {
  Outcome o;
  std::uint64_t runs = 0;
  std::uint64_t violations = 0;
  std::string first;
  for (const auto* rep : all_fuzz_reports()) {
    runs += rep->runs;
    violations += rep->failures_of("prepared_consistency");
    if (first.empty()) first = first_failure(*rep, "prepared_consistency");
  }
  o.pass = violations == 0;
  o.detail = std::to_string(runs) + " runs, " + std::to_string(violations) + " prepared-state conflicts" +
             (first.empty() ? "" : "; " + first);
  return o;
}

// 8 ---------------------------------------------------------------------------

Outcome locked_proposals_fuzz() {
  Outcome o;
  std::uint64_t runs = 0;
  std::uint64_t premises = 0;
  std::uint64_t truncated = 0;
  std::uint64_t counterexamples = 0;
  std::string first;
  for (const auto* rep : all_fuzz_reports()) {
    runs += rep->runs;
    premises += rep->locked_premises;
    truncated += rep->locked_truncated;
    counterexamples += rep->failures_of("locked_proposals");
    if (first.empty()) first = first_failure(*rep, "locked_proposals");
  }
  o.pass = counterexamples == 0 && premises > 0;
  o.detail = std::to_string(runs) + " runs, " + std::to_string(premises) + " locked premises, " +
             std::to_string(counterexamples) + " counterexamples, " + std::to_string(truncated) +
             " searches cut by budget" + (first.empty() ? "" : "; " + first);
  return o;
}

// 9 ---------------------------------------------------------------------------

Outcome justification_suite() {
  const SystemConfig config(4, 1);
  Outcome o;
  Detail d;
  auto expect = [&](bool got, bool want, const char* what) {
    if (got != want) {
      o.pass = false;
      d << "mismatch: " << what << "; ";
    }
  };

  {
    RoundChangeCertificate q{{rc_none(0, 3), rc_none(1, 3), rc_none(2, 3)}};
    expect(highest_prepared(q).has_value(), false, "highest_prepared all bottom");
  }
  {
    RoundChangeCertificate q{{rc_none(0, 3), rc_claim(1, 3, 1, "a", prepares({0, 1, 2}, 1, "a")),
                              rc_claim(2, 3, 2, "b", prepares({0, 1, 2}, 2, "b"))}};
    const auto hp = highest_prepared(q);
    expect(hp && hp->round == Round{2} && hp->value == Value("b"), true, "highest_prepared maximum");
  }
  {
    RoundChangeCertificate q{{rc_claim(3, 3, 2, "b", prepares({0, 1, 2}, 2, "b")),
                              rc_claim(1, 3, 2, "b", prepares({0, 1, 2}, 2, "b")), rc_none(0, 3)}};
    const auto hp = highest_prepared(q);
    expect(hp && hp->round == Round{2} && hp->value == Value("b"), true, "highest_prepared tie");
  }
  {
    std::vector<SignedMessage> q{rc_none(0, 2), rc_none(1, 2), rc_none(2, 2)};
    expect(justify_round_change(RoundChangeCertificate{q}, config), true, "justify_round_change all bottom");
    expect(oracle::justify_round_change(q), true, "oracle all bottom");
  }
  {
    std::vector<SignedMessage> q{rc_none(0, 3), rc_claim(1, 3, 2, "v", prepares({0, 1, 2}, 2, "v")), rc_none(2, 3)};
    expect(justify_round_change(RoundChangeCertificate{q}, config), true, "justify_round_change quorum of prepares");
    expect(oracle::justify_round_change(q), true, "oracle quorum of prepares");
  }
  {
    std::vector<SignedMessage> q{rc_none(0, 3), rc_claim(1, 3, 2, "v", prepares({0, 1}, 2, "v")), rc_none(2, 3)};
    const bool want = 2 >= oracle::quorum;
    expect(justify_round_change(RoundChangeCertificate{q}, config), want, "justify_round_change two prepares");
    expect(oracle::justify_round_change(q), want, "oracle two prepares");
  }
  {
    const ProcessId p = leader(InstanceId{0}, Round{1}, 4);
    expect(justify_pre_prepare(pre_prepare_from(p.index, 1, "v"), config), true, "pre-prepare round 1");
  }
  {
    const ProcessId p = leader(InstanceId{0}, Round{2}, 4);
    std::vector<SignedMessage> q{rc_none(0, 2), rc_none(1, 2), rc_none(3, 2)};
    expect(justify_pre_prepare(pre_prepare_from(p.index, 2, "v", q), config), true, "pre-prepare all bottom");
  }
  {
    const ProcessId p = leader(InstanceId{0}, Round{2}, 4);
    std::vector<SignedMessage> q{rc_none(0, 2), rc_claim(2, 2, 1, "v", prepares({0, 1, 2}, 1, "v")), rc_none(3, 2)};
    const auto pp = pre_prepare_from(p.index, 2, "w", q);
    expect(justify_pre_prepare(pp, config), false, "pre-prepare wrong value");
    expect(oracle::justify_pre_prepare(pp), false, "oracle wrong value");
  }

  constexpr std::uint64_t round = 3;
  std::vector<std::vector<SignedMessage>> options;
  for (std::uint32_t s = 0; s < 4; ++s) options.push_back(entry_options(s, round));
  const std::size_t k = options.front().size();
  const std::vector<std::vector<std::uint32_t>> sender_sets{{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}, {0, 1, 2, 3}};
  const ProcessId proposer = leader(InstanceId{0}, Round{round}, 4);
  std::size_t cases = 0;
  std::size_t disagreements = 0;
  std::size_t accepted = 0;
  for (const auto& senders : sender_sets) {
    std::vector<std::size_t> idx(senders.size(), 0);
    while (true) {
      std::vector<SignedMessage> q;
      for (std::size_t i = 0; i < senders.size(); ++i) q.push_back(options[senders[i]][idx[i]]);
      const bool got = justify_round_change(RoundChangeCertificate{q}, config);
      if (got != oracle::justify_round_change(q)) ++disagreements;
      accepted += got;
      for (const std::string v : {"a", "b", "c"}) {
        const auto pp = pre_prepare_from(proposer.index, round, v, q);
        if (justify_pre_prepare(pp, config) != oracle::justify_pre_prepare(pp)) ++disagreements;
      }
      ++cases;
      std::size_t pos = idx.size();
      while (pos > 0 && ++idx[pos - 1] == k) idx[--pos] = 0;
      if (pos == 0) break;
    }
  }
  const std::size_t expected_cases = 4 * k * k * k + k * k * k * k;
  if (disagreements || cases != expected_cases || accepted == 0 || accepted == cases) o.pass = false;
  d << "9 table examples; brute force " << cases << " certificate sets (" << accepted << " justified), "
    << disagreements << " disagreements with the transcription";
  o.detail = d.str();
  return o;
}

// 10 --------------------------------------------------------------------------

Outcome determinism() {
  std::vector<std::pair<std::string, Scenario>> scenarios;
  {
    Scenario s;
    s.net.delay_mode = DelayMode::fixed;
    scenarios.emplace_back("good_case", s);
  }
  for (auto n : sweep) {
    Scenario s;
    s.n = n;
    s.f = oracle_max_faulty(n);
    s.net.delay_mode = DelayMode::fixed;
    scenarios.emplace_back("complexity_n" + std::to_string(n), s);
    s.net.delay_mode = DelayMode::uniform;
    s.adversaries.push_back({ProcessId{0}, Silent{}});
    scenarios.emplace_back("silent_n" + std::to_string(n), s);
  }
  scenarios.emplace_back("laggard", laggard_scenario());
  for (const auto& c : fuzz_cases()) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Scenario s = c.tmpl;
      s.net.seed = seed;
      scenarios.emplace_back(c.name + "/seed" + std::to_string(seed), s);
    }
  }
  for (const auto& [profile_name, profile] : profiles) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Scenario s = validity_template(profile);
      s.net.seed = seed;
      scenarios.emplace_back("validity/" + profile_name + "/seed" + std::to_string(seed), s);
    }
  }

  Outcome o;
  std::size_t mismatches = 0;
  std::string first;
  for (const auto& [name, s] : scenarios) {
    const auto a = run(s);
    const auto b = run(s);
    const bool same_trace = a.trace.digest() == b.trace.digest() && a.trace.to_text() == b.trace.to_text();
    const bool same_report = format_report(make_report(a.trace, s)) == format_report(make_report(b.trace, s));
    if (!same_trace || !same_report) {
      ++mismatches;
      if (first.empty()) first = name;
    }
  }
  const auto tmpl = fuzz_cases().back().tmpl;
  const auto f1 = fuzz(tmpl, 0, 50);
  const auto f2 = fuzz(tmpl, 0, 50, {2});
  bool fuzz_same = f1.runs == f2.runs && f1.total_sends == f2.total_sends && f1.max_rounds == f2.max_rounds &&
                   f1.locked_premises == f2.locked_premises && f1.failures.size() == f2.failures.size();
  for (std::size_t i = 0; fuzz_same && i < f1.failures.size(); ++i) {
    fuzz_same = f1.failures[i].seed == f2.failures[i].seed && f1.failures[i].verdict.name == f2.failures[i].verdict.name;
  }
  o.pass = mismatches == 0 && fuzz_same;
  o.detail = std::to_string(scenarios.size()) + " scenarios run twice, " + std::to_string(mismatches) +
             " digest or report mismatches" + (first.empty() ? "" : " (first: " + first + ")") +
             "; fuzz report single vs two threads " + (fuzz_same ? "identical" : "DIFFERENT");
  return o;
}

// 11 --------------------------------------------------------------------------

Outcome bounded_exploration() {
  const ExploreOptions opts{2, 3, 2, 2'000'000, 10'000, true};
  std::vector<std::pair<std::string, Scenario>> scenarios;
  scenarios.emplace_back("failure_free", Scenario{});
  auto with = [](ProcessId p, Strategy st) {
    Scenario s;
    s.adversaries.push_back({p, std::move(st)});
    return s;
  };
  scenarios.emplace_back("silent_leader", with(ProcessId{0}, Silent{}));
  scenarios.emplace_back("equivocating_leader", with(ProcessId{0}, EquivocatingLeader{{Value("a"), Value("b")}}));
  scenarios.emplace_back("stale_claim", with(ProcessId{3}, StaleClaim{Round{1}, Value("stale")}));

  Outcome o;
  Detail d;
  d << "round_bound=" << opts.round_bound << " window=" << opts.reorder_window
    << " deviations=" << opts.max_deviations << ";";
  for (const auto& [name, s] : scenarios) {
    const auto res = explore(s, opts);
    if (!res.pass() || !res.complete) o.pass = false;
    d << " " << name << " " << res.schedules << " schedules";
    if (!res.complete) d << " (budget hit)";
    if (!res.agreement.pass) d << " AGREEMENT: " << res.agreement.detail;
    if (!res.prepared_consistency.pass) d << " PREPARED: " << res.prepared_consistency.detail;
    d << ",";
  }
  o.detail = d.str();
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"latency_good_case", latency_good_case},
      {"normal_case_complexity", normal_case_complexity},
      {"round_change_complexity", round_change_complexity},
      {"agreement", agreement_fuzz},
      {"validity", validity_fuzz},
      {"termination", termination},
      {"prepared_consistency", prepared_consistency_fuzz},
      {"locked_proposals", locked_proposals_fuzz},
      {"justification_suite", justification_suite},
      {"determinism", determinism},
      {"bounded_exploration", bounded_exploration},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const auto ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << i + 1 << " " << criteria[i].first << " (" << ms << " ms) "
              << o.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
