#pragma once

// Report/CSV emission.  All file writes are atomic (write to a temp name in
// the same directory, then rename).  CSV headers carry units.

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "isacopt/ao.hpp"
#include "isacopt/audit.hpp"
#include "isacopt/scenario.hpp"

namespace isacopt {

namespace report_detail {

inline json dump_cvec(const CVec& v) {
  json re = json::array(), im = json::array();
  for (int i = 0; i < v.size(); ++i) {
    re.push_back(v[i].real());
    im.push_back(v[i].imag());
  }
  return json{{"re", re}, {"im", im}};
}

inline CVec parse_cvec(const json& j) {
  const auto& re = j.at("re");
  const auto& im = j.at("im");
  CVec v(re.size());
  for (size_t i = 0; i < re.size(); ++i)
    v[i] = std::complex<double>(re[i].get<double>(), im[i].get<double>());
  return v;
}

}  // namespace report_detail

inline void write_atomic(const std::filesystem::path& path,
                         const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open " + tmp.string() + " for writing");
    os << content;
  }
  std::filesystem::rename(tmp, path);
}

inline json report_to_json(const Scenario& sc, const SolveReport& rep) {
  json doc;
  doc["scheme"] = rep.scheme;
  doc["scenario"] = serialize(sc);
  doc["scenario_digest"] = rep.digest;
  doc["objective_trace"] = rep.objective_trace;
  doc["avg_power_w"] = rep.avg_power;
  doc["tx_power_w"] = rep.tx_power;
  doc["propulsion_w"] = rep.propulsion_power;
  doc["ao_iterations"] = rep.ao_iterations;
  doc["admm_iterations"] = rep.admm_iterations;
  doc["wallclock_s"] = rep.wallclock_s;
  doc["audit_pass"] = rep.audit_pass;

  json audit;
  audit["all_pass"] = rep.audit.all_pass;
  audit["rank_tight_fraction"] = rep.audit.rank_tight_fraction;
  audit["families"] = json::array();
  for (const auto& f : rep.audit.families)
    audit["families"].push_back({{"family", f.family},
                                 {"worst_violation", f.worst_violation},
                                 {"pass", f.pass},
                                 {"at_k", f.at_k},
                                 {"at_e", f.at_e},
                                 {"at_n", f.at_n}});
  audit["achieved_rates_bps_hz"] = json::array();
  for (int k = 0; k < rep.audit.achieved_rates.size(); ++k)
    audit["achieved_rates_bps_hz"].push_back(rep.audit.achieved_rates[k]);
  audit["achieved_gamma"] = json::array();
  for (int e = 0; e < rep.audit.achieved_gamma.size(); ++e)
    audit["achieved_gamma"].push_back(rep.audit.achieved_gamma[e]);
  doc["audit"] = audit;

  const int N = rep.trajectory.slots();
  json slots = json::array();
  for (int n = 0; n < N; ++n) {
    json slot;
    slot["q_m"] = {rep.trajectory.q(0, n), rep.trajectory.q(1, n)};
    slot["v_mps"] = {rep.trajectory.v(0, n), rep.trajectory.v(1, n)};
    json alphas = json::array();
    for (int e = 0; e < rep.schedule.targets(); ++e)
      alphas.push_back(rep.schedule.alpha(e, n));
    slot["alpha"] = alphas;
    json beams = json::array();
    if (n < static_cast<int>(rep.plan.w.size()))
      for (const auto& w : rep.plan.w[n])
        beams.push_back(report_detail::dump_cvec(w));
    slot["beamformers"] = beams;
    slots.push_back(slot);
  }
  doc["slots"] = slots;

  json recs = json::array();
  for (const auto& r : rep.records)
    recs.push_back({{"stage", r.stage},
                    {"objective_w", r.objective},
                    {"admm_iterations", r.admm_iterations},
                    {"seconds", r.seconds}});
  doc["stage_records"] = recs;
  return doc;
}

// The subset cmd_verify needs: scenario, trajectory, schedule, beamformers.
struct StoredPlan {
  Scenario scenario;
  Trajectory trajectory;
  Eigen::MatrixXd alpha;
  std::vector<std::vector<CVec>> w;
  std::string scheme;
};

inline StoredPlan plan_from_json(const json& doc) {
  StoredPlan sp;
  sp.scenario = load_scenario(doc.at("scenario"));
  sp.scheme = doc.value("scheme", "proposed");
  const auto& slots = doc.at("slots");
  const int N = static_cast<int>(slots.size());
  sp.trajectory.dt = sp.scenario.timing.slot_duration;
  sp.trajectory.q.resize(2, N);
  sp.trajectory.v.resize(2, N);
  const int E = sp.scenario.num_targets();
  sp.alpha = Eigen::MatrixXd::Zero(E, N);
  sp.w.assign(N, {});
  for (int n = 0; n < N; ++n) {
    const auto& slot = slots[n];
    sp.trajectory.q(0, n) = slot.at("q_m")[0].get<double>();
    sp.trajectory.q(1, n) = slot.at("q_m")[1].get<double>();
    sp.trajectory.v(0, n) = slot.at("v_mps")[0].get<double>();
    sp.trajectory.v(1, n) = slot.at("v_mps")[1].get<double>();
    for (int e = 0; e < E && e < static_cast<int>(slot.at("alpha").size()); ++e)
      sp.alpha(e, n) = slot.at("alpha")[e].get<double>();
    for (const auto& b : slot.at("beamformers"))
      sp.w[n].push_back(report_detail::parse_cvec(b));
  }
  return sp;
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline std::string trajectory_csv(const Scenario& sc, const SolveReport& rep) {
  std::ostringstream os;
  os << "slot,t_s,q_x_m,q_y_m,v_x_mps,v_y_mps,speed_mps,sensing_target\n";
  for (int n = 0; n < rep.trajectory.slots(); ++n) {
    const int tgt = rep.schedule.targets() ? rep.schedule.sensed_target(n) : -1;
    os << n << "," << format_double(n * sc.timing.slot_duration) << ","
       << format_double(rep.trajectory.q(0, n)) << ","
       << format_double(rep.trajectory.q(1, n)) << ","
       << format_double(rep.trajectory.v(0, n)) << ","
       << format_double(rep.trajectory.v(1, n)) << ","
       << format_double(rep.trajectory.v.col(n).norm()) << ","
       << (tgt >= 0 ? std::to_string(tgt) : std::string("none")) << "\n";
  }
  return os.str();
}

inline std::string power_csv(const Scenario& sc, const SolveReport& rep) {
  std::ostringstream os;
  os << "slot,t_s,tx_power_w,propulsion_w,total_w\n";
  for (int n = 0; n < rep.trajectory.slots(); ++n) {
    double tx = 0.0;
    if (n < static_cast<int>(rep.plan.w.size()))
      for (const auto& w : rep.plan.w[n]) tx += w.squaredNorm();
    double frac = 0.0;
    for (int e = 0; e < rep.schedule.targets(); ++e)
      frac += rep.schedule.alpha(e, n);
    const double prop = slot_propulsion_power(frac, rep.trajectory.v.col(n), sc.power);
    os << n << "," << format_double(n * sc.timing.slot_duration) << ","
       << format_double(tx) << "," << format_double(prop) << ","
       << format_double(tx + prop) << "\n";
  }
  return os.str();
}

inline std::string sweep_csv(const SweepTable& table) {
  std::ostringstream os;
  os << "threshold_db,scheme,avg_power_w,tx_power_w,propulsion_w,iterations,"
        "wallclock_s,audit_pass\n";
  for (const auto& r : table.rows) {
    os << format_double(r.threshold_db) << "," << r.scheme << ",";
    if (r.ok)
      os << format_double(r.avg_power_w) << "," << format_double(r.tx_power_w)
         << "," << format_double(r.propulsion_w) << "," << r.iterations;
    else
      os << "nan,nan,nan,0";
    os << "," << format_double(r.wallclock_s) << ","
       << (r.ok && r.audit_pass ? "true" : "false") << "\n";
  }
  return os.str();
}

inline std::string fig3c_gnuplot(const std::string& csv_name) {
  std::ostringstream os;
  os << "# average power consumption versus minimum required sensing SNR\n"
     << "set datafile separator ','\n"
     << "set xlabel 'sensing SNR threshold [dB]'\n"
     << "set ylabel 'average power consumption [W]'\n"
     << "set key top left\n"
     << "set grid\n"
     << "plot '" << csv_name
     << "' using 1:($2 eq 'proposed' ? $3 : 1/0) with linespoints title 'proposed', \\\n"
     << "     '" << csv_name
     << "' using 1:($2 eq 'baseline-1' ? $3 : 1/0) with linespoints title 'baseline 1', \\\n"
     << "     '" << csv_name
     << "' using 1:($2 eq 'baseline-2' ? $3 : 1/0) with linespoints title 'baseline 2'\n";
  return os.str();
}

}  // namespace isacopt
