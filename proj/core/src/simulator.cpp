#include "flowcorr/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

namespace flowcorr::sim {
namespace {

using nlohmann::json;

constexpr uint64_t kRequestBytes = 120;  // upstream HTTP request as seen server-side

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t mix(uint64_t a, uint64_t b) { return splitmix64(a ^ splitmix64(b)); }

/// Deterministic per-stream generator. All draws go through uniform() so the
/// byte stream is identical across platforms (no std::*_distribution).
class Stream {
 public:
  explicit Stream(uint64_t seed) : eng_(seed) {}

  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double gauss() {
    double u1 = std::max(uniform(), 1e-300);
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  bool bernoulli(double p) { return p > 0.0 && uniform() < p; }

  uint64_t pick(uint64_t n) { return eng_() % n; }

 private:
  std::mt19937_64 eng_;
};

struct PathNodes {
  const NodeSpec* entry;
  const NodeSpec* middle;
  const NodeSpec* exit;
  const NodeSpec* server;
};

struct PacingState {
  double server_emit = 0.0;
  double exit_depart = 0.0;
  double middle_forward = 0.0;
  double entry_forward = 0.0;
  double first_entry_depart = -1.0;
};

void validate(const Scenario& s) {
  if (s.duration <= 0.0) throw ConfigError("duration must be positive");
  if (s.cell_payload >= s.cell_size) throw ConfigError("cell_payload must be < cell_size");
  if (s.cell_payload == 0 || s.server_segment == 0) throw ConfigError("payload sizes must be positive");
  if (s.link.latency < 0 || s.link.jitter < 0) throw ConfigError("link latency/jitter must be >= 0");
  if (s.link.loss < 0 || s.link.loss >= 1.0) throw ConfigError("link loss must be in [0, 1)");
  size_t clients = 0, relays = 0, servers = 0;
  for (const NodeSpec& n : s.nodes) {
    if (n.bandwidth_down <= 0 || n.bandwidth_up <= 0)
      throw ConfigError("node '" + n.name + "' has non-positive bandwidth");
    if (n.processing_delay < 0) throw ConfigError("node '" + n.name + "' has negative processing delay");
    switch (n.role) {
      case Role::Client: ++clients; break;
      case Role::Relay: ++relays; break;
      case Role::Server: ++servers; break;
    }
  }
  if (clients == 0) throw ConfigError("scenario has no clients");
  if (relays < 3) throw ConfigError("need at least 3 relays for a path");
  if (servers == 0) throw ConfigError("scenario has no servers");
  if (s.behaviors.size() != clients)
    throw ConfigError("behavior count " + std::to_string(s.behaviors.size()) +
                      " does not match client count " + std::to_string(clients));
  size_t victims = 0;
  for (const ClientBehavior& b : s.behaviors) {
    if (b.download_size == 0) throw ConfigError("download_size must be positive");
    if (b.pause < 0) throw ConfigError("pause must be >= 0");
    if (b.repetitions == 0) throw ConfigError("repetitions must be >= 1");
    if (b.pause > 0 && b.pause >= s.duration)
      throw ConfigError("duration too short for one download cycle (pause " +
                        std::to_string(b.pause) + "s >= duration)");
    if (b.injected_extra > 0) ++victims;
  }
  if (victims > 1) throw ConfigError("at most one victim (injected_extra > 0) per scenario");
}

}  // namespace

const char* preset_name(Preset p) {
  switch (p) {
    case Preset::Tiny: return "tiny";
    case Preset::Small: return "small";
    case Preset::PaperShape: return "papershape";
  }
  return "?";
}

Preset preset_from_name(const std::string& name) {
  if (name == "tiny") return Preset::Tiny;
  if (name == "small") return Preset::Small;
  if (name == "papershape") return Preset::PaperShape;
  throw ConfigError("unknown preset '" + name + "' (expected tiny, small or papershape)");
}

namespace {

void add_nodes(Scenario& s, size_t clients, size_t relays, size_t servers) {
  for (size_t i = 0; i < clients; ++i)
    s.nodes.push_back({"client" + std::to_string(i + 1), Role::Client, 12.5e6, 12.5e6, 0.0});
  for (size_t i = 0; i < relays; ++i)
    s.nodes.push_back({"relay" + std::to_string(i + 1), Role::Relay, 12.5e6, 12.5e6, 1e-4});
  for (size_t i = 0; i < servers; ++i)
    s.nodes.push_back({"server" + std::to_string(i + 1), Role::Server, 2.0e6, 12.5e6, 1e-3});
}

constexpr uint64_t kKiB = 1024, kMiB = 1024 * 1024;

ClientBehavior web_client(uint64_t size) { return {BehaviorKind::Web, size, 60.0, 2, 0}; }

}  // namespace

Scenario make_preset(Preset p, uint64_t seed) {
  Scenario s;
  s.seed = seed;
  s.link = {0.03, 0.002, 0.002};
  switch (p) {
    case Preset::Tiny:
      s.duration = 150.0;
      add_nodes(s, 5, 6, 2);
      for (int i = 0; i < 5; ++i) s.behaviors.push_back(web_client(350 * kKiB));
      break;
    case Preset::Small:
      s.duration = 150.0;
      add_nodes(s, 100, 30, 20);
      for (int i = 0; i < 97; ++i) s.behaviors.push_back(web_client(350 * kKiB));
      for (int i = 0; i < 2; ++i)
        s.behaviors.push_back({BehaviorKind::Bulk, 5 * kMiB, 0.0, 40, 0});
      {
        ClientBehavior victim = web_client(350 * kKiB);
        victim.injected_extra = 2 * kMiB;
        s.behaviors.push_back(victim);
      }
      break;
    case Preset::PaperShape:
      s.duration = 300.0;
      add_nodes(s, 1000, 400, 400);
      for (int i = 0; i < 983; ++i) s.behaviors.push_back(web_client(350 * kKiB));
      for (uint64_t size : {50 * kKiB, 1 * kMiB, 5 * kMiB}) {
        s.behaviors.push_back(web_client(size));
        s.behaviors.push_back(web_client(size));
      }
      for (int i = 0; i < 10; ++i)
        s.behaviors.push_back({BehaviorKind::Bulk, 5 * kMiB, 0.0, 100, 0});
      {
        ClientBehavior victim = web_client(350 * kKiB);
        victim.injected_extra = 2 * kMiB;
        s.behaviors.push_back(victim);
      }
      break;
  }
  return s;
}

SimulationResult simulate(const Scenario& scenario) {
  validate(scenario);

  std::vector<const NodeSpec*> clients, relays, servers;
  for (const NodeSpec& n : scenario.nodes) {
    if (n.role == Role::Client) clients.push_back(&n);
    if (n.role == Role::Relay) relays.push_back(&n);
    if (n.role == Role::Server) servers.push_back(&n);
  }

  const LinkSpec& link = scenario.link;
  const double cell = scenario.cell_size;

  // One hop: Bernoulli loss with fixed-timeout retransmission, then
  // latency + jitter (clamped non-negative).
  auto hop = [&](double t, Stream& rng) {
    while (rng.bernoulli(link.loss)) t += scenario.retx_timeout;
    return t + std::max(0.0, link.latency + rng.gauss() * link.jitter);
  };

  SimulationResult result;

  for (size_t c = 0; c < clients.size(); ++c) {
    const ClientBehavior& behavior = scenario.behaviors[c];
    Stream crng(mix(scenario.seed, 0x10000 + c));

    PathNodes path;
    path.entry = relays[crng.pick(relays.size())];
    do { path.middle = relays[crng.pick(relays.size())]; } while (path.middle == path.entry);
    do { path.exit = relays[crng.pick(relays.size())]; } while (path.exit == path.entry || path.exit == path.middle);
    path.server = servers[crng.pick(servers.size())];

    const std::string client_id = "C" + std::to_string(c + 1);
    const std::string server_id = "S" + std::to_string(c + 1);
    Flow client_flow{{client_id,
                      {clients[c]->name, static_cast<uint16_t>(50001 + c % 10000)},
                      {path.entry->name, 9001},
                      Side::ClientSide},
                     {}};
    Flow server_flow{{server_id,
                      {path.exit->name, static_cast<uint16_t>(40001 + c % 10000)},
                      {path.server->name, 80},
                      Side::ServerSide},
                     {}};

    const double window = behavior.pause > 0 ? std::min(behavior.pause, scenario.duration) : 1.0;
    double next_start = crng.uniform() * window * 0.9;
    PacingState pacing;
    const uint64_t payload = behavior.download_size + behavior.injected_extra;
    const uint64_t n_segments = (payload + scenario.server_segment - 1) / scenario.server_segment;
    const uint64_t n_cells = (payload + scenario.cell_payload - 1) / scenario.cell_payload;

    std::vector<double> segment_ready(n_segments);
    size_t downloads = 0;

    for (uint32_t k = 0; k < behavior.repetitions && next_start < scenario.duration; ++k, ++downloads) {
      Stream rng(mix(scenario.seed, mix(c + 1, k + 1)));
      double t = next_start;

      // Upstream request: one cell client -> entry -> middle -> exit, then a
      // small request packet to the server.
      double at_entry = hop(t, rng);
      client_flow.packets.push_back({at_entry, Direction::Upstream, scenario.cell_size});
      double at_middle = hop(at_entry + path.entry->processing_delay, rng);
      double at_exit = hop(at_middle + path.middle->processing_delay, rng);
      double at_server = hop(at_exit + path.exit->processing_delay, rng);
      server_flow.packets.push_back({at_server, Direction::Upstream, kRequestBytes});

      // Server response: a segment train paced by the server's downstream
      // bandwidth, observed on the exit<->server link.
      double response_start = at_server + path.server->processing_delay;
      pacing.server_emit = std::max(pacing.server_emit, response_start);
      double ready_prefix_max = 0.0;
      for (uint64_t i = 0; i < n_segments; ++i) {
        uint64_t seg_bytes = (i + 1 < n_segments)
                                 ? scenario.server_segment
                                 : payload - i * static_cast<uint64_t>(scenario.server_segment);
        pacing.server_emit += static_cast<double>(seg_bytes) / path.server->bandwidth_down;
        double arrival = hop(pacing.server_emit, rng);
        server_flow.packets.push_back({arrival, Direction::Downstream, seg_bytes});
        ready_prefix_max = std::max(ready_prefix_max, arrival);
        segment_ready[i] = ready_prefix_max;
      }

      // Exit re-quantizes the payload into fixed-size cells and forwards
      // them store-and-forward through middle and entry to the client.
      double completion = response_start;
      for (uint64_t j = 0; j < n_cells; ++j) {
        uint64_t last_byte = std::min<uint64_t>(payload, (j + 1) * scenario.cell_payload);
        double ready = segment_ready[(last_byte - 1) / scenario.server_segment];

        pacing.exit_depart = std::max(pacing.exit_depart, ready) + cell / path.exit->bandwidth_down;
        double tc = hop(pacing.exit_depart + path.exit->processing_delay, rng);

        pacing.middle_forward = std::max(pacing.middle_forward, tc) + cell / path.middle->bandwidth_down;
        tc = hop(pacing.middle_forward + path.middle->processing_delay, rng);

        pacing.entry_forward = std::max(pacing.entry_forward, tc) + cell / path.entry->bandwidth_down;
        double entry_depart = pacing.entry_forward + path.entry->processing_delay;
        if (pacing.first_entry_depart < 0) pacing.first_entry_depart = entry_depart;
        tc = hop(entry_depart, rng);

        client_flow.packets.push_back({tc, Direction::Downstream, scenario.cell_size});
        result.deliveries.push_back({ready, tc});
        completion = std::max(completion, tc);
      }

      next_start = behavior.pause > 0 ? next_start + behavior.pause : completion;
    }
    if (downloads == 0)
      throw ConfigError("duration too short for one download by '" + clients[c]->name + "'");

    // Stand-ins for overlay control traffic: extra downstream cells sent by
    // the entry after the first data cell of the connection.
    if (pacing.first_entry_depart >= 0) {
      for (uint32_t i = 0; i < scenario.control_cells; ++i) {
        double depart = pacing.first_entry_depart + 0.004 * (i + 1);
        client_flow.packets.push_back({hop(depart, crng), Direction::Downstream, scenario.cell_size});
      }
    }

    auto by_time = [](const PacketRecord& x, const PacketRecord& y) { return x.timestamp < y.timestamp; };
    std::stable_sort(client_flow.packets.begin(), client_flow.packets.end(), by_time);
    std::stable_sort(server_flow.packets.begin(), server_flow.packets.end(), by_time);

    result.truth[server_id] = client_id;
    if (behavior.injected_extra > 0) result.victim_client_id = client_id;
    result.client_flows.push_back(std::move(client_flow));
    result.server_flows.push_back(std::move(server_flow));
  }

  return result;
}

namespace {

const char* role_name(Role r) {
  switch (r) {
    case Role::Client: return "client";
    case Role::Relay: return "relay";
    case Role::Server: return "server";
  }
  return "?";
}

Role role_from_name(const std::string& s) {
  if (s == "client") return Role::Client;
  if (s == "relay") return Role::Relay;
  if (s == "server") return Role::Server;
  throw ConfigError("unknown node role '" + s + "'");
}

const char* kind_name(BehaviorKind k) {
  switch (k) {
    case BehaviorKind::Web: return "web";
    case BehaviorKind::Bulk: return "bulk";
    case BehaviorKind::Custom: return "custom";
  }
  return "?";
}

BehaviorKind kind_from_name(const std::string& s) {
  if (s == "web") return BehaviorKind::Web;
  if (s == "bulk") return BehaviorKind::Bulk;
  if (s == "custom") return BehaviorKind::Custom;
  throw ConfigError("unknown behavior kind '" + s + "'");
}

}  // namespace

std::string scenario_to_json(const Scenario& s) {
  json j;
  j["seed"] = s.seed;
  j["duration"] = s.duration;
  j["cell_size"] = s.cell_size;
  j["cell_payload"] = s.cell_payload;
  j["server_segment"] = s.server_segment;
  j["control_cells"] = s.control_cells;
  j["retx_timeout"] = s.retx_timeout;
  j["link"] = {{"latency", s.link.latency}, {"jitter", s.link.jitter}, {"loss", s.link.loss}};
  j["nodes"] = json::array();
  for (const NodeSpec& n : s.nodes)
    j["nodes"].push_back({{"name", n.name},
                          {"role", role_name(n.role)},
                          {"bandwidth_down", n.bandwidth_down},
                          {"bandwidth_up", n.bandwidth_up},
                          {"processing_delay", n.processing_delay}});
  j["behaviors"] = json::array();
  for (const ClientBehavior& b : s.behaviors)
    j["behaviors"].push_back({{"kind", kind_name(b.kind)},
                              {"download_size", b.download_size},
                              {"pause", b.pause},
                              {"repetitions", b.repetitions},
                              {"injected_extra", b.injected_extra}});
  return j.dump(2);
}

Scenario scenario_from_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("invalid scenario JSON in " + path + ": " + e.what());
  }

  try {
    Scenario s;
    s.seed = j.at("seed").get<uint64_t>();
    s.duration = j.at("duration").get<double>();
    s.cell_size = j.value("cell_size", s.cell_size);
    s.cell_payload = j.value("cell_payload", s.cell_payload);
    s.server_segment = j.value("server_segment", s.server_segment);
    s.control_cells = j.value("control_cells", s.control_cells);
    s.retx_timeout = j.value("retx_timeout", s.retx_timeout);
    if (j.contains("link")) {
      const json& l = j["link"];
      s.link = {l.value("latency", 0.0), l.value("jitter", 0.0), l.value("loss", 0.0)};
    }
    for (const json& n : j.at("nodes"))
      s.nodes.push_back({n.at("name").get<std::string>(), role_from_name(n.at("role").get<std::string>()),
                         n.at("bandwidth_down").get<double>(), n.at("bandwidth_up").get<double>(),
                         n.value("processing_delay", 0.0)});
    for (const json& b : j.at("behaviors"))
      s.behaviors.push_back({kind_from_name(b.value("kind", std::string("web"))),
                             b.at("download_size").get<uint64_t>(), b.value("pause", 0.0),
                             b.value("repetitions", 1u), b.value("injected_extra", uint64_t{0})});
    return s;
  } catch (const json::exception& e) {
    throw ConfigError("malformed scenario in " + path + ": " + e.what());
  }
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot hash missing file: " + path);
  uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i)
      h = (h ^ static_cast<unsigned char>(buf[i])) * 0x100000001b3ULL;
    if (!in) break;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

void write_outputs(const SimulationResult& result, const Scenario& scenario,
                   const std::string& preset_label, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string client_path = (fs::path(out_dir) / "client.csv").string();
  const std::string server_path = (fs::path(out_dir) / "server.csv").string();
  const std::string truth_path = (fs::path(out_dir) / "ground_truth.csv").string();

  write_trace(result.client_flows, client_path);
  write_trace(result.server_flows, server_path);
  write_ground_truth(result.truth, truth_path);

  json manifest;
  manifest["seed"] = scenario.seed;
  manifest["preset"] = preset_label;
  manifest["victim_client_id"] = result.victim_client_id;
  manifest["files"] = {{"client.csv", file_hash(client_path)},
                       {"server.csv", file_hash(server_path)},
                       {"ground_truth.csv", file_hash(truth_path)}};
  std::ofstream out(fs::path(out_dir) / "manifest.json", std::ios::binary);
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + (fs::path(out_dir) / "manifest.json").string());
}

}  // namespace flowcorr::sim
