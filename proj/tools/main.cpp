#include <array>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "flowcorr/detector.hpp"
#include "flowcorr/evaluator.hpp"
#include "flowcorr/html_injector.hpp"
#include "flowcorr/simulator.hpp"
#include "flowcorr/trace.hpp"

namespace fs = std::filesystem;
using namespace flowcorr;

namespace {

// Paper-style tolerance presets: max tolerances in percent for
// (packet count, average gap, total data, total time).
const std::map<std::string, std::array<double, 4>> kSweepPresets = {
    {"A", {52, 32, 2, 1}},  {"B", {100, 50, 25, 5}}, {"C", {50, 50, 25, 5}},
    {"D", {50, 50, 10, 5}}, {"E", {25, 25, 5, 1}},
};

struct ToleranceFlags {
  double init_pct = 5.0;
  double step_pct = 1.0;
  double max_tp_pct = 50.0;
  double max_at_pct = 50.0;
  double max_td_pct = 25.0;
  double max_tt_pct = 5.0;
};

void add_tolerance_flags(CLI::App* cmd, ToleranceFlags& tol) {
  cmd->add_option("--tol-init", tol.init_pct, "Initial tolerance, percent")->capture_default_str();
  cmd->add_option("--tol-step", tol.step_pct, "Tolerance increment, percent")->capture_default_str();
  cmd->add_option("--tol-max-tp", tol.max_tp_pct, "Max tolerance for packet count, percent")->capture_default_str();
  cmd->add_option("--tol-max-at", tol.max_at_pct, "Max tolerance for average gap, percent")->capture_default_str();
  cmd->add_option("--tol-max-td", tol.max_td_pct, "Max tolerance for total data, percent")->capture_default_str();
  cmd->add_option("--tol-max-tt", tol.max_tt_pct, "Max tolerance for total time, percent")->capture_default_str();
}

ToleranceSchedule to_schedule(const ToleranceFlags& tol) {
  return {tol.init_pct / 100.0, tol.step_pct / 100.0, tol.max_tp_pct / 100.0,
          tol.max_at_pct / 100.0, tol.max_td_pct / 100.0, tol.max_tt_pct / 100.0};
}

ToleranceSchedule preset_schedule(const std::string& name, double init_pct, double step_pct) {
  auto it = kSweepPresets.find(name);
  if (it == kSweepPresets.end())
    throw sim::ConfigError("unknown tolerance preset '" + name + "' (expected A-E)");
  const auto& m = it->second;
  return {init_pct / 100.0, step_pct / 100.0, m[0] / 100.0, m[1] / 100.0, m[2] / 100.0, m[3] / 100.0};
}

uint64_t default_seed() {
  if (const char* env = std::getenv("FLOWCORR_SEED")) return std::strtoull(env, nullptr, 10);
  return 42;
}

void write_candidates_csv(const BatchDetection& batch, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write candidates file: " + path);
  out << "server_conn_id,candidate_client_conn_id\n";
  for (const CandidateSet& cs : batch.results) {
    if (cs.candidates.empty()) {
      out << cs.server_conn.id << ",\n";
      continue;
    }
    for (const ConnectionId& c : cs.candidates) out << cs.server_conn.id << ',' << c.id << '\n';
  }
}

std::map<std::string, std::vector<std::string>> read_candidates_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open candidates file: " + path);
  std::string line;
  if (!std::getline(in, line)) return {};
  std::map<std::string, std::vector<std::string>> out;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    size_t comma = line.find(',');
    if (comma == std::string::npos) throw ParseError(path + ": malformed line '" + line + "'");
    std::string server = line.substr(0, comma);
    std::string client = line.substr(comma + 1);
    auto& v = out[server];
    if (!client.empty()) v.push_back(client);
  }
  return out;
}

void print_detection_table(const BatchDetection& batch) {
  for (const CandidateSet& cs : batch.results) {
    std::printf("%s: %zu candidate(s)", cs.server_conn.id.c_str(), cs.candidates.size());
    for (const ConnectionId& c : cs.candidates) std::printf(" %s", c.id.c_str());
    std::printf("\n");
    for (const StageReport& st : cs.stages)
      std::printf("  stage %-12s tolerance=%.3f survivors=%zu%s\n", stage_metric_name(st.metric),
                  st.final_tolerance, st.survivors, st.exhausted ? " (exhausted)" : "");
  }
  for (const std::string& s : batch.skipped) std::printf("skipped %s\n", s.c_str());
}

int cmd_simulate(const std::string& preset, const std::string& config, uint64_t seed,
                 double duration, const std::string& out_dir) {
  sim::Scenario scenario;
  std::string label;
  if (!config.empty()) {
    scenario = sim::scenario_from_json(config);
    label = "config:" + fs::path(config).filename().string();
    if (seed != 0) scenario.seed = seed;
  } else {
    scenario = sim::make_preset(sim::preset_from_name(preset), seed);
    label = preset;
  }
  if (duration > 0) scenario.duration = duration;

  sim::SimulationResult result = sim::simulate(scenario);
  sim::write_outputs(result, scenario, label, out_dir);
  std::printf("wrote %s/{client.csv,server.csv,ground_truth.csv,manifest.json} (seed %llu)\n",
              out_dir.c_str(), static_cast<unsigned long long>(scenario.seed));
  return 0;
}

struct PresetRun {
  std::string name;
  BatchDetection batch;
  std::vector<KpiVector> vectors;
};

PresetRun run_preset(const std::string& name, const std::vector<Flow>& server_flows,
                     const std::vector<Flow>& client_flows, const GroundTruth& truth,
                     const ToleranceSchedule& schedule, double slack, unsigned threads) {
  PresetRun run;
  run.name = name;
  run.batch = detect_all(server_flows, client_flows, schedule, slack, threads);
  for (const CandidateSet& cs : run.batch.results) {
    auto it = truth.find(cs.server_conn.id);
    if (it == truth.end()) continue;
    run.vectors.push_back(kpis(confusion(cs, it->second, client_flows.size())));
  }
  return run;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Traffic-flow fingerprinting and correlation toolkit"};
  app.require_subcommand(1);

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Generate traces and ground truth");
  std::string sim_preset = "tiny", sim_config, sim_out = ".";
  uint64_t sim_seed = default_seed();
  double sim_duration = 0;
  sim_cmd->add_option("--preset", sim_preset, "Scenario preset: tiny, small, papershape")->capture_default_str();
  sim_cmd->add_option("--config", sim_config, "Scenario JSON file (overrides preset)");
  sim_cmd->add_option("--seed", sim_seed, "Simulation seed")->capture_default_str();
  sim_cmd->add_option("--duration", sim_duration, "Override scenario duration, seconds");
  sim_cmd->add_option("--out", sim_out, "Output directory")->capture_default_str();

  // detect
  auto* det_cmd = app.add_subcommand("detect", "Shortlist client candidates per server connection");
  std::string det_server, det_client, det_candidates, det_stats, det_preset;
  double det_slack = 2.0;
  unsigned det_threads = 1;
  ToleranceFlags det_tol;
  det_cmd->add_option("--server-trace", det_server)->required();
  det_cmd->add_option("--client-trace", det_client)->required();
  det_cmd->add_option("--candidates", det_candidates, "Candidates CSV output path");
  det_cmd->add_option("--stats-csv", det_stats, "Per-connection cost/runtime CSV output path");
  det_cmd->add_option("--preset", det_preset, "Tolerance preset A-E (overrides --tol-max-*)");
  det_cmd->add_option("--slack", det_slack, "Time-slice slack, seconds")->capture_default_str();
  det_cmd->add_option("--threads", det_threads)->capture_default_str();
  add_tolerance_flags(det_cmd, det_tol);

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a candidates file against ground truth");
  std::string eval_candidates, eval_truth, eval_csv;
  size_t eval_n_clients = 0;
  eval_cmd->add_option("--candidates", eval_candidates)->required();
  eval_cmd->add_option("--ground-truth", eval_truth)->required();
  eval_cmd->add_option("--n-clients", eval_n_clients, "Total client connections observed")->required();
  eval_cmd->add_option("--csv", eval_csv, "KPI summary CSV output path");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Run tolerance presets A-E and compare KPIs");
  std::string sw_server, sw_client, sw_truth, sw_out = ".", sw_victim, sw_presets = "A,B,C,D,E";
  double sw_slack = 2.0;
  unsigned sw_threads = 1;
  double sw_init = 5.0, sw_step = 1.0;
  sweep_cmd->add_option("--server-trace", sw_server)->required();
  sweep_cmd->add_option("--client-trace", sw_client)->required();
  sweep_cmd->add_option("--ground-truth", sw_truth)->required();
  sweep_cmd->add_option("--presets", sw_presets, "Comma-separated preset names")->capture_default_str();
  sweep_cmd->add_option("--victim", sw_victim, "Victim client conn id (adds the Victim column)");
  sweep_cmd->add_option("--slack", sw_slack)->capture_default_str();
  sweep_cmd->add_option("--threads", sw_threads)->capture_default_str();
  sweep_cmd->add_option("--tol-init", sw_init)->capture_default_str();
  sweep_cmd->add_option("--tol-step", sw_step)->capture_default_str();
  sweep_cmd->add_option("--out", sw_out, "Output directory")->capture_default_str();

  // inject
  auto* inj_cmd = app.add_subcommand("inject", "File-mode HTML asset injection");
  std::string inj_in, inj_out, inj_asset, inj_width = "1px", inj_tag = "</body>";
  inj_cmd->add_option("--in", inj_in)->required();
  inj_cmd->add_option("--out", inj_out)->required();
  inj_cmd->add_option("--asset-url", inj_asset)->required();
  inj_cmd->add_option("--width", inj_width)->capture_default_str();
  inj_cmd->add_option("--match-tag", inj_tag)->capture_default_str();

  // proxy
  auto* proxy_cmd = app.add_subcommand("proxy", "Injecting reverse proxy for one origin");
  std::string px_listen = "127.0.0.1:8080", px_origin, px_asset, px_width = "1px";
  std::vector<std::string> px_allow;
  proxy_cmd->add_option("--listen", px_listen, "host:port to listen on")->capture_default_str();
  proxy_cmd->add_option("--origin", px_origin, "host:port of the origin server")->required();
  proxy_cmd->add_option("--asset-url", px_asset)->required();
  proxy_cmd->add_option("--width", px_width)->capture_default_str();
  proxy_cmd->add_option("--allow-host", px_allow, "Hostname allow-list for transformation");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim_cmd->parsed())
      return cmd_simulate(sim_preset, sim_config, sim_seed, sim_duration, sim_out);

    if (det_cmd->parsed()) {
      ToleranceSchedule schedule = det_preset.empty()
                                       ? to_schedule(det_tol)
                                       : preset_schedule(det_preset, det_tol.init_pct, det_tol.step_pct);
      std::vector<Flow> server_flows = parse_trace(det_server);
      std::vector<Flow> client_flows = parse_trace(det_client);
      DetectMetrics metrics;
      auto t0 = std::chrono::steady_clock::now();
      BatchDetection batch = detect_all(server_flows, client_flows, schedule, det_slack, det_threads, &metrics);
      auto t1 = std::chrono::steady_clock::now();
      print_detection_table(batch);
      if (!det_candidates.empty()) write_candidates_csv(batch, det_candidates);
      if (!det_stats.empty()) {
        std::ofstream out(det_stats, std::ios::binary);
        out << "n_server_conns,n_client_conns,similar_evaluations,runtime_s\n"
            << batch.results.size() << ',' << client_flows.size() << ','
            << metrics.similar_evaluations << ','
            << std::chrono::duration<double>(t1 - t0).count() << '\n';
      }
      return 0;
    }

    if (eval_cmd->parsed()) {
      auto candidates = read_candidates_csv(eval_candidates);
      GroundTruth truth = load_ground_truth(eval_truth);
      std::vector<KpiVector> vectors;
      for (const auto& [server_id, client_ids] : candidates) {
        auto it = truth.find(server_id);
        if (it == truth.end()) {
          std::fprintf(stderr, "warning: no ground truth for %s, skipping\n", server_id.c_str());
          continue;
        }
        CandidateSet cs;
        cs.server_conn.id = server_id;
        for (const std::string& id : client_ids) cs.candidates.push_back(ConnectionId{id, {}, {}, Side::ClientSide});
        vectors.push_back(kpis(confusion(cs, it->second, eval_n_clients)));
      }
      if (vectors.empty()) {
        std::fprintf(stderr, "no scorable detections\n");
        return 1;
      }
      ReportColumn column{"result", summarize(vectors), std::nullopt};
      std::fputs(render_report_table({column}).c_str(), stdout);
      if (!eval_csv.empty()) {
        std::ofstream out(eval_csv, std::ios::binary);
        out << render_report_csv({column});
      }
      return 0;
    }

    if (sweep_cmd->parsed()) {
      std::vector<Flow> server_flows = parse_trace(sw_server);
      std::vector<Flow> client_flows = parse_trace(sw_client);
      GroundTruth truth = load_ground_truth(sw_truth);
      fs::create_directories(sw_out);

      std::vector<std::string> names;
      for (size_t pos = 0; pos < sw_presets.size();) {
        size_t comma = sw_presets.find(',', pos);
        if (comma == std::string::npos) comma = sw_presets.size();
        names.push_back(sw_presets.substr(pos, comma - pos));
        pos = comma + 1;
      }

      std::string victim_server;
      if (!sw_victim.empty()) {
        for (const auto& [server_id, client_id] : truth)
          if (client_id == sw_victim) victim_server = server_id;
        if (victim_server.empty())
          throw ValidationError("victim '" + sw_victim + "' not found in ground truth");
      }

      std::ofstream raw(fs::path(sw_out) / "detections_raw.csv", std::ios::binary);
      raw << "preset,server_conn_id,true_client,n_candidates,tp,fp,tn,fn\n";

      std::vector<ReportColumn> columns;
      std::optional<ReportColumn> victim_column;
      for (const std::string& name : names) {
        ToleranceSchedule schedule = preset_schedule(name, sw_init, sw_step);
        PresetRun run = run_preset(name, server_flows, client_flows, truth, schedule, sw_slack, sw_threads);

        ReportColumn column{"Test " + name, summarize(run.vectors), std::nullopt};
        for (const CandidateSet& cs : run.batch.results) {
          auto it = truth.find(cs.server_conn.id);
          if (it == truth.end()) continue;
          ConfusionMatrix m = confusion(cs, it->second, client_flows.size());
          raw << name << ',' << cs.server_conn.id << ',' << it->second << ','
              << cs.candidates.size() << ',' << m.tp << ',' << m.fp << ',' << m.tn << ',' << m.fn << '\n';
          if (cs.server_conn.id == victim_server) {
            column.victim_detected = m.tp == 1;
            if (!victim_column) {
              // Victim column mirrors the victim's own detection under the
              // first preset listed.
              victim_column = ReportColumn{"Victim", summarize({kpis(m)}), m.tp == 1};
            }
          }
        }
        columns.push_back(std::move(column));
      }
      if (victim_column) columns.push_back(*victim_column);

      std::string table = render_report_table(columns);
      std::fputs(table.c_str(), stdout);
      std::ofstream(fs::path(sw_out) / "summary.txt", std::ios::binary) << table;
      std::ofstream(fs::path(sw_out) / "summary.csv", std::ios::binary) << render_report_csv(columns);
      return 0;
    }

    if (inj_cmd->parsed()) {
      std::ifstream in(inj_in, std::ios::binary);
      if (!in) throw IoError("cannot open input file: " + inj_in);
      std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      inject::InjectionSpec spec{inj_asset, inj_width, inj_tag};
      inject::InjectResult result = inject::inject_asset(body, spec);
      std::ofstream out(inj_out, std::ios::binary);
      if (!out) throw IoError("cannot open output file: " + inj_out);
      out << result.body;
      std::printf("%s\n", result.matched ? "injected" : "no-match");
      return 0;
    }

    if (proxy_cmd->parsed()) {
      auto split_hostport = [](const std::string& s) -> std::pair<std::string, int> {
        size_t colon = s.rfind(':');
        if (colon == std::string::npos) throw sim::ConfigError("expected host:port, got '" + s + "'");
        return {s.substr(0, colon), std::stoi(s.substr(colon + 1))};
      };
      auto [lh, lp] = split_hostport(px_listen);
      auto [oh, op] = split_hostport(px_origin);
      inject::ProxyOptions options;
      options.listen_host = lh;
      options.listen_port = lp;
      options.origin_host = oh;
      options.origin_port = op;
      options.spec = inject::InjectionSpec{px_asset, px_width, "</body>"};
      options.host_allowlist = px_allow;
      inject::InjectingProxy proxy(std::move(options));
      std::printf("proxying %s -> %s\n", px_listen.c_str(), px_origin.c_str());
      return proxy.run() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
