#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowcorr/trace.hpp"

namespace flowcorr::sim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Role { Client, Relay, Server };

struct NodeSpec {
  std::string name;
  Role role = Role::Client;
  double bandwidth_down = 0.0;  // bytes per second
  double bandwidth_up = 0.0;
  double processing_delay = 0.0;  // seconds per packet
};

struct LinkSpec {
  double latency = 0.0;  // seconds
  double jitter = 0.0;   // std of symmetric perturbation
  double loss = 0.0;     // fraction in [0, 1)
};

enum class BehaviorKind { Web, Bulk, Custom };

struct ClientBehavior {
  BehaviorKind kind = BehaviorKind::Web;
  uint64_t download_size = 0;  // bytes, > 0
  double pause = 0.0;          // seconds between download starts (0 = back-to-back)
  uint32_t repetitions = 1;
  uint64_t injected_extra = 0;  // bytes added by the MITM asset; victims only
};

struct Scenario {
  uint64_t seed = 0;
  double duration = 0.0;  // seconds
  std::vector<NodeSpec> nodes;
  LinkSpec link;  // applied to every hop
  std::vector<ClientBehavior> behaviors;  // one per client node, same order
  uint32_t cell_size = 512;
  uint32_t cell_payload = 498;
  uint32_t server_segment = 498;  // server-side emission granularity, bytes
  uint32_t control_cells = 3;     // extra downstream cells per client connection
  double retx_timeout = 0.5;      // seconds before a lost cell is re-sent
};

enum class Preset { Tiny, Small, PaperShape };

Scenario make_preset(Preset p, uint64_t seed);
Preset preset_from_name(const std::string& name);  // "tiny" | "small" | "papershape"
const char* preset_name(Preset p);

Scenario scenario_from_json(const std::string& path);
std::string scenario_to_json(const Scenario& s);

/// One delivered data cell, for causality checks.
struct CellDelivery {
  double server_ts = 0.0;  // arrival at the exit of the bytes the cell carries
  double client_ts = 0.0;  // arrival at the client
};

struct SimulationResult {
  std::vector<Flow> client_flows;  // client <-> entry observations
  std::vector<Flow> server_flows;  // exit <-> server observations
  GroundTruth truth;               // server conn id -> client conn id
  std::vector<CellDelivery> deliveries;
  std::string victim_client_id;    // empty when the scenario has no victim
};

/// Deterministic desk-scale overlay simulation: every client downloads
/// through a fixed 3-relay path; responses are re-quantized into cells
/// between exit and client and perturbed by per-hop latency, jitter and
/// Bernoulli loss with retransmission. Identical seeds give identical output.
SimulationResult simulate(const Scenario& scenario);

/// Emits client.csv, server.csv, ground_truth.csv and manifest.json
/// (seed, preset name, FNV-1a file hashes) into out_dir.
void write_outputs(const SimulationResult& result, const Scenario& scenario,
                   const std::string& preset_label, const std::string& out_dir);

/// FNV-1a 64 over a file's bytes, hex-encoded. Used by the manifest.
std::string file_hash(const std::string& path);

}  // namespace flowcorr::sim
