#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ibft/ibft.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) throw std::runtime_error("--seeds expects A..B");
  auto a = ibft::parse_u64(std::string_view(text).substr(0, dots));
  auto b = ibft::parse_u64(std::string_view(text).substr(dots + 2));
  if (!a || !b) throw std::runtime_error("--seeds expects A..B");
  return {*a, *b};
}

ibft::Scenario load(const std::string& path) {
  if (path.empty()) return ibft::parse_scenario("");
  return ibft::parse_scenario(slurp(path));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IBFT consensus simulator"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string trace_path;
  std::string report_path;
  std::string seeds = "0..100";
  std::vector<std::uint32_t> n_list{4, 7, 10, 13, 16};
  unsigned threads = 1;
  ibft::ExploreOptions explore_opts;

  auto* run_cmd = app.add_subcommand("run", "run one scenario and check it");
  run_cmd->add_option("--scenario", scenario_path, "scenario file")->required();
  run_cmd->add_option("--trace", trace_path, "write the trace here");
  run_cmd->add_option("--report", report_path, "write the report here (default stdout)");

  auto* fuzz_cmd = app.add_subcommand("fuzz", "run a seed range against a scenario template");
  fuzz_cmd->add_option("--scenario", scenario_path, "scenario template")->required();
  fuzz_cmd->add_option("--seeds", seeds, "half-open seed range A..B");
  fuzz_cmd->add_option("--threads", threads, "worker threads");
  fuzz_cmd->add_option("--report", report_path, "write the report here (default stdout)");

  auto* sweep_cmd = app.add_subcommand("sweep", "message counts over a list of system sizes");
  sweep_cmd->add_option("--scenario", scenario_path, "scenario template");
  sweep_cmd->add_option("--n-list", n_list, "system sizes")->delimiter(',');
  sweep_cmd->add_option("--report", report_path, "write the report here (default stdout)");

  auto* explore_cmd = app.add_subcommand("explore", "bounded systematic scheduling");
  explore_cmd->add_option("--scenario", scenario_path, "scenario (n, f, adversaries)");
  explore_cmd->add_option("--round-bound", explore_opts.round_bound, "highest round reachable");
  explore_cmd->add_option("--reorder-window", explore_opts.reorder_window, "how far past the FIFO head to pick");
  explore_cmd->add_option("--max-deviations", explore_opts.max_deviations, "deviations per schedule");
  explore_cmd->add_option("--max-schedules", explore_opts.max_schedules, "schedule budget");
  explore_cmd->add_option("--hold-links", explore_opts.hold_links, "allow cut and run-ahead deviations (true/false)");
  explore_cmd->add_option("--report", report_path, "write the report here (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      const auto s = load(scenario_path);
      const auto out = ibft::Simulation(s).run();
      if (!trace_path.empty()) emit(trace_path, out.trace.to_text());
      auto rep = ibft::make_report(out.trace, s);
      ibft::LockedProposalStats stats;
      rep.verdicts.push_back(ibft::check_locked_proposals(out, s, &stats));
      emit(report_path, ibft::format_report(rep));
      return rep.all_pass() ? 0 : 1;
    }
    if (*fuzz_cmd) {
      const auto s = load(scenario_path);
      const auto [first, last] = parse_seed_range(seeds);
      const auto rep = ibft::fuzz(s, first, last, {threads});
      std::ostringstream os;
      os << "metric\truns\t" << rep.runs << '\n';
      os << "metric\tterminated_runs\t" << rep.decided_runs << '\n';
      os << "metric\tsends_total\t" << rep.total_sends << '\n';
      os << "metric\tmax_rounds\t" << rep.max_rounds << '\n';
      os << "metric\tlocked_premises\t" << rep.locked_premises << '\n';
      os << "metric\tlocked_truncated\t" << rep.locked_truncated << '\n';
      for (const auto& f : rep.failures) {
        os << "failure\t" << f.seed << '\t' << f.verdict.name << '\t' << f.verdict.detail << '\n';
      }
      nlohmann::json j;
      j["runs"] = rep.runs;
      j["failures"] = rep.failures.size();
      os << "summary\t" << j.dump() << '\n';
      emit(report_path, os.str());
      return rep.failures.empty() ? 0 : 1;
    }
    if (*sweep_cmd) {
      auto s = load(scenario_path);
      const auto rows = ibft::measure_complexity(s, n_list);
      std::ostringstream os;
      bool ok = true;
      for (const auto& row : rows) {
        os << "metric\tsends_n" << row.n << '\t' << row.total_sends << '\n';
        for (const auto& [r, c] : row.sends_by_round) os << "metric\tsends_n" << row.n << "_round_" << r << '\t' << c << '\n';
        os << "verdict\tterminated_n" << row.n << '\t' << (row.terminated ? "pass" : "fail") << '\n';
        ok = ok && row.terminated;
      }
      emit(report_path, os.str());
      return ok ? 0 : 1;
    }
    if (*explore_cmd) {
      const auto s = load(scenario_path);
      const auto res = ibft::explore(s, explore_opts);
      std::ostringstream os;
      os << "metric\tschedules\t" << res.schedules << '\n';
      os << "metric\tstates\t" << res.states << '\n';
      os << "metric\tdecided_schedules\t" << res.decided_schedules << '\n';
      os << "metric\tcomplete\t" << (res.complete ? 1 : 0) << '\n';
      os << "verdict\tagreement\t" << (res.agreement.pass ? "pass" : "fail") << '\n';
      os << "verdict\tprepared_consistency\t" << (res.prepared_consistency.pass ? "pass" : "fail") << '\n';
      emit(report_path, os.str());
      return res.pass() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
