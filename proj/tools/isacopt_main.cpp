// Command-line front end: run one scheme on a scenario, sweep sensing-SNR
// thresholds across schemes, or re-verify a saved report.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "isacopt/ao.hpp"
#include "isacopt/report.hpp"
#include "isacopt/scenario.hpp"

namespace fs = std::filesystem;
using namespace isacopt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitScenario = 2;
constexpr int kExitSolver = 3;
constexpr int kExitAudit = 4;

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw ScenarioError("cannot read " + p.string());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

// dotted-path override: "platform.v_max_mps=5", "users.0.min_rate_bps_hz=2"
void apply_override(json& doc, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos)
    throw ScenarioError("override '" + spec + "': expected key=value");
  const std::string path = spec.substr(0, eq);
  const std::string value_text = spec.substr(eq + 1);

  json value;
  try {
    value = json::parse(value_text);
  } catch (const json::exception&) {
    value = value_text;  // bare strings are allowed unquoted
  }

  json* node = &doc;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (size_t i = 0; i + 1 < parts.size(); ++i) {
    const std::string& key = parts[i];
    if (node->is_array()) {
      const size_t idx = std::stoul(key);
      if (idx >= node->size())
        throw ScenarioError("override '" + spec + "': index out of range");
      node = &(*node)[idx];
    } else if (node->contains(key)) {
      node = &(*node)[key];
    } else {
      throw ScenarioError("override '" + spec + "': unknown field '" + key + "'");
    }
  }
  const std::string& leaf = parts.back();
  json* slot = nullptr;
  if (node->is_array()) {
    const size_t idx = std::stoul(leaf);
    if (idx >= node->size())
      throw ScenarioError("override '" + spec + "': index out of range");
    slot = &(*node)[idx];
  } else if (node->contains(leaf)) {
    slot = &(*node)[leaf];
  } else {
    // dB-spelled alternatives replace their linear siblings
    const bool db_alias = leaf.size() > 3 && (leaf.ends_with("_db") ||
                                              leaf.ends_with("_dbm"));
    if (!db_alias)
      throw ScenarioError("override '" + spec + "': unknown field '" + leaf + "'");
    (*node)[leaf] = value;
    return;
  }
  if (slot->type() != value.type() &&
      !(slot->is_number() && value.is_number()))
    throw ScenarioError("override '" + spec + "': type mismatch");
  *slot = value;
}

Scenario load_with_overrides(const std::string& scenario_arg,
                             const std::vector<std::string>& overrides) {
  json doc;
  if (scenario_arg == "default") {
    doc = serialize(default_scenario());
  } else {
    try {
      doc = json::parse(read_file(scenario_arg));
    } catch (const json::exception& e) {
      throw ScenarioError(std::string("scenario parse error: ") + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return load_scenario(doc);
}

void print_audit(const ConstraintAudit& audit) {
  for (const auto& f : audit.families) {
    std::cout << "  " << f.family << ": " << (f.pass ? "pass" : "FAIL")
              << " (worst violation " << f.worst_violation;
    if (f.at_k >= 0) std::cout << ", user " << f.at_k;
    if (f.at_e >= 0) std::cout << ", target " << f.at_e;
    if (f.at_n >= 0) std::cout << ", slot " << f.at_n;
    std::cout << ")\n";
  }
}

int cmd_run(const std::string& scenario_arg,
            const std::vector<std::string>& overrides,
            const std::string& scheme, const fs::path& out_dir, uint64_t seed) {
  Scenario sc;
  try {
    sc = load_with_overrides(scenario_arg, overrides);
  } catch (const ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return kExitScenario;
  }
  fs::create_directories(out_dir);
  SolveReport rep;
  try {
    RunOptions opt;
    opt.seed = seed;
    rep = run_scheme(sc, scheme, opt);
  } catch (const ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return kExitScenario;
  } catch (const Error& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  }
  write_atomic(out_dir / "report.json", report_to_json(sc, rep).dump(2) + "\n");
  write_atomic(out_dir / "trajectory.csv", trajectory_csv(sc, rep));
  write_atomic(out_dir / "power.csv", power_csv(sc, rep));
  std::cout << "scheme " << rep.scheme << ": average power " << rep.avg_power
            << " W (tx " << rep.tx_power << " W, propulsion "
            << rep.propulsion_power << " W), " << rep.ao_iterations
            << " outer iterations, " << rep.wallclock_s << " s\n";
  print_audit(rep.audit);
  std::cout << (rep.audit_pass ? "audit: pass" : "audit: FAIL") << "\n";
  return rep.audit_pass ? kExitOk : kExitAudit;
}

int cmd_sweep(const std::string& scenario_arg,
              const std::vector<std::string>& overrides,
              const std::vector<double>& thresholds_db, const fs::path& out_dir,
              uint64_t seed, int jobs) {
  Scenario sc;
  try {
    sc = load_with_overrides(scenario_arg, overrides);
  } catch (const ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return kExitScenario;
  }
  fs::create_directories(out_dir);
  std::vector<double> thresholds;
  for (double db : thresholds_db) thresholds.push_back(db_to_linear(db));
  std::sort(thresholds.begin(), thresholds.end());
  const std::vector<std::string> schemes = {"proposed", "baseline-1",
                                            "baseline-2"};

  SweepTable table;
  if (jobs > 1) {
    // chains are independent across schemes; threshold order stays sequential
    std::vector<SweepTable> parts(schemes.size());
    std::vector<std::thread> pool;
    for (size_t si = 0; si < schemes.size(); ++si)
      pool.emplace_back([&, si] {
        parts[si] = snr_sweep(sc, thresholds, {schemes[si]}, seed);
      });
    for (auto& t : pool) t.join();
    for (size_t ti = 0; ti < thresholds.size(); ++ti)
      for (size_t si = 0; si < schemes.size(); ++si)
        table.rows.push_back(parts[si].rows[ti]);
  } else {
    table = snr_sweep(sc, thresholds, schemes, seed);
  }

  write_atomic(out_dir / "sweep.csv", sweep_csv(table));
  write_atomic(out_dir / "fig3c.gp", fig3c_gnuplot("sweep.csv"));

  // exit 0 when at least one cell per scheme succeeded
  for (const auto& scheme : schemes) {
    bool any = false;
    for (const auto& r : table.rows) any = any || (r.scheme == scheme && r.ok);
    if (!any) {
      std::cerr << "sweep: no successful cell for scheme " << scheme << "\n";
      return kExitSolver;
    }
  }
  std::cout << "sweep: " << table.rows.size() << " cells written to "
            << (out_dir / "sweep.csv").string() << "\n";
  return kExitOk;
}

int cmd_verify(const std::string& report_path) {
  StoredPlan sp;
  try {
    sp = plan_from_json(json::parse(read_file(report_path)));
  } catch (const json::exception& e) {
    std::cerr << "report parse error: " << e.what() << "\n";
    return kExitScenario;
  } catch (const ScenarioError& e) {
    std::cerr << "report parse error: " << e.what() << "\n";
    return kExitScenario;
  }
  ConstraintAudit audit =
      verify_solution(sp.scenario, sp.w, sp.trajectory, sp.alpha);
  if (sp.scheme == "baseline-2") {
    // that baseline omits the acceleration limit by definition
    for (auto& f : audit.families)
      if (f.family == "C9") f.pass = true;
    audit.all_pass = true;
    for (const auto& f : audit.families) audit.all_pass &= f.pass;
  }
  print_audit(audit);
  std::cout << (audit.all_pass ? "audit: pass" : "audit: FAIL") << "\n";
  if (!audit.all_pass) {
    for (const auto& f : audit.families)
      if (!f.pass) std::cout << "violated: " << f.family << "\n";
  }
  return audit.all_pass ? kExitOk : kExitAudit;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UAV ISAC power-minimizing trajectory and beamforming planner"};
  app.require_subcommand(1);

  std::string scenario_arg = "default";
  std::vector<std::string> overrides;
  std::string scheme = "proposed";
  std::string out_dir = ".";
  uint64_t seed = 1;
  int jobs = 1;
  std::vector<double> thresholds_db = {0.0};
  std::string report_path;

  auto* run = app.add_subcommand("run", "solve one scenario with one scheme");
  run->add_option("--scenario", scenario_arg, "scenario JSON path or 'default'");
  run->add_option("--scheme", scheme,
                  "proposed | baseline-1 | baseline-2");
  run->add_option("--override", overrides,
                  "dotted-path scenario patch key=value (repeatable)");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--seed", seed, "randomization seed");

  auto* sweep = app.add_subcommand("sweep", "sweep sensing SNR thresholds");
  sweep->add_option("--scenario", scenario_arg, "scenario JSON path or 'default'");
  sweep->add_option("--override", overrides,
                    "dotted-path scenario patch key=value (repeatable)");
  sweep->add_option("--thresholds-db", thresholds_db,
                    "sensing SNR thresholds in dB");
  sweep->add_option("--out", out_dir, "output directory");
  sweep->add_option("--seed", seed, "randomization seed");
  sweep->add_option("--jobs", jobs, "parallel scheme chains");

  auto* verify = app.add_subcommand("verify", "re-audit a saved report");
  verify->add_option("report", report_path, "path to report.json")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(scenario_arg, overrides, scheme, out_dir, seed);
    if (sweep->parsed())
      return cmd_sweep(scenario_arg, overrides, thresholds_db, out_dir, seed, jobs);
    if (verify->parsed()) return cmd_verify(report_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
  return kExitOk;
}
