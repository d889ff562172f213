#pragma once

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "ibft/checks.hpp"
#include "ibft/report.hpp"
#include "ibft/scenario.hpp"
#include "ibft/simnet.hpp"

namespace ibft {

struct FuzzOptions {
  unsigned threads = 1;
  bool check_locked = true;
  std::size_t locked_budget = 20'000;
};

struct SeedFailure {
  std::uint64_t seed = 0;
  Verdict verdict;
  bool operator<(const SeedFailure& o) const {
    return seed != o.seed ? seed < o.seed : verdict.name < o.verdict.name;
  }
};

struct FuzzReport {
  std::uint64_t runs = 0;
  std::uint64_t decided_runs = 0;
  std::uint64_t total_sends = 0;
  std::uint64_t max_rounds = 0;
  std::uint64_t locked_premises = 0;
  std::uint64_t locked_truncated = 0;  // runs whose builder search hit the budget
  std::vector<SeedFailure> failures;  // sorted by (seed, verdict name)

  std::size_t failures_of(std::string_view name) const {
    return static_cast<std::size_t>(std::count_if(failures.begin(), failures.end(),
                                                  [&](const SeedFailure& f) { return f.verdict.name == name; }));
  }
  bool empty() const { return runs == 0; }
};

// Runs every seed in [first, last) against the template and applies all checkers.
inline FuzzReport fuzz(const Scenario& tmpl, std::uint64_t first, std::uint64_t last, FuzzOptions opts = {}) {
  FuzzReport report;
  if (last <= first) return report;
  validate(tmpl);

  std::atomic<std::uint64_t> next{first};
  std::mutex mu;
  auto worker = [&] {
    FuzzReport local;
    for (std::uint64_t seed = next++; seed < last; seed = next++) {
      Scenario s = tmpl;
      s.net.seed = seed;
      const RunOutcome out = Simulation(s).run();
      const RunReport rep = make_report(out.trace, s);
      ++local.runs;
      if (rep.terminated) ++local.decided_runs;
      local.total_sends += rep.total_sends;
      local.max_rounds = std::max(local.max_rounds, rep.rounds_used);
      for (const auto& v : rep.verdicts) {
        if (!v.pass) local.failures.push_back({seed, v});
      }
      if (opts.check_locked) {
        LockedProposalStats stats;
        Verdict v = check_locked_proposals(out, s, &stats, opts.locked_budget);
        local.locked_premises += stats.premises;
        if (stats.truncated) ++local.locked_truncated;
        if (!v.pass) local.failures.push_back({seed, v});
      }
    }
    std::lock_guard lock(mu);
    report.runs += local.runs;
    report.decided_runs += local.decided_runs;
    report.total_sends += local.total_sends;
    report.max_rounds = std::max(report.max_rounds, local.max_rounds);
    report.locked_premises += local.locked_premises;
    report.locked_truncated += local.locked_truncated;
    report.failures.insert(report.failures.end(), local.failures.begin(), local.failures.end());
  };

  const unsigned threads = std::max(1u, opts.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  std::sort(report.failures.begin(), report.failures.end());
  return report;
}

struct ComplexityRow {
  std::uint32_t n = 0;
  std::uint64_t total_sends = 0;
  std::map<std::uint64_t, std::uint64_t> sends_by_round;
  bool terminated = false;
};

// One run per n, with f set to the largest tolerable value.
inline std::vector<ComplexityRow> measure_complexity(const Scenario& tmpl, const std::vector<std::uint32_t>& n_values) {
  std::vector<ComplexityRow> rows;
  for (auto n : n_values) {
    Scenario s = tmpl;
    s.n = n;
    s.f = max_faulty(n);
    const RunOutcome out = Simulation(s).run();
    const RunReport rep = make_report(out.trace, s);
    rows.push_back({n, rep.total_sends, rep.sends_by_round, rep.terminated});
  }
  return rows;
}

}  // namespace ibft
