#include "flowcorr/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace flowcorr {
namespace {

constexpr const char* kTraceHeader = "timestamp_s,conn_id,endpoint_a,endpoint_b,direction,bytes";
constexpr const char* kTruthHeader = "server_conn_id,client_conn_id";

[[noreturn]] void fail_line(const std::string& path, size_t line_no, const std::string& what) {
  throw ParseError(path + ":" + std::to_string(line_no) + ": " + what);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

EndpointTuple parse_endpoint(const std::string& token, const std::string& path, size_t line_no) {
  size_t colon = token.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == token.size())
    fail_line(path, line_no, "malformed endpoint '" + token + "'");
  unsigned long port = 0;
  auto [ptr, ec] = std::from_chars(token.data() + colon + 1, token.data() + token.size(), port);
  if (ec != std::errc() || ptr != token.data() + token.size())
    fail_line(path, line_no, "malformed port in endpoint '" + token + "'");
  if (port > 65535)
    throw ValidationError(path + ":" + std::to_string(line_no) + ": port out of range: " + token);
  return EndpointTuple{token.substr(0, colon), static_cast<uint16_t>(port)};
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

Side side_from_id(const std::string& conn_id) {
  if (!conn_id.empty() && conn_id.front() == 'S') return Side::ServerSide;
  if (!conn_id.empty() && conn_id.front() == 'C') return Side::ClientSide;
  throw ParseError("conn id '" + conn_id + "' has no side prefix (expected 'S' or 'C')");
}

std::string format_timestamp(double seconds) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", seconds);
  return buf;
}

std::vector<Flow> parse_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace file: " + path);

  std::string line;
  if (!std::getline(in, line)) return {};  // empty file: empty flow set
  strip_cr(line);
  if (line != kTraceHeader)
    fail_line(path, 1, "bad header, expected '" + std::string(kTraceHeader) + "'");

  std::map<std::string, Flow> by_conn;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != 6) fail_line(path, line_no, "expected 6 fields, got " + std::to_string(fields.size()));

    PacketRecord pkt;
    try {
      size_t used = 0;
      pkt.timestamp = std::stod(fields[0], &used);
      if (used != fields[0].size()) throw std::invalid_argument("trailing junk");
    } catch (const std::exception&) {
      fail_line(path, line_no, "malformed timestamp '" + fields[0] + "'");
    }
    if (!std::isfinite(pkt.timestamp) || pkt.timestamp < 0.0)
      throw ValidationError(path + ":" + std::to_string(line_no) + ": timestamp out of range");

    const std::string& conn_id = fields[1];
    Side side = side_from_id(conn_id);
    EndpointTuple a = parse_endpoint(fields[2], path, line_no);
    EndpointTuple b = parse_endpoint(fields[3], path, line_no);

    if (fields[4] == "down")
      pkt.direction = Direction::Downstream;
    else if (fields[4] == "up")
      pkt.direction = Direction::Upstream;
    else
      fail_line(path, line_no, "direction must be 'down' or 'up', got '" + fields[4] + "'");

    uint64_t size = 0;
    auto [ptr, ec] = std::from_chars(fields[5].data(), fields[5].data() + fields[5].size(), size);
    if (ec != std::errc() || ptr != fields[5].data() + fields[5].size())
      fail_line(path, line_no, "malformed byte count '" + fields[5] + "'");
    if (size < 1)
      throw ValidationError(path + ":" + std::to_string(line_no) + ": byte count must be >= 1");
    pkt.size = size;

    auto [it, inserted] = by_conn.try_emplace(conn_id);
    if (inserted) {
      it->second.conn = ConnectionId{conn_id, a, b, side};
    } else if (!(it->second.conn.a == a && it->second.conn.b == b)) {
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": conn id '" + conn_id + "' reused with different endpoints");
    }
    it->second.packets.push_back(pkt);
  }

  std::vector<Flow> flows;
  flows.reserve(by_conn.size());
  for (auto& [id, flow] : by_conn) {
    std::stable_sort(flow.packets.begin(), flow.packets.end(),
                     [](const PacketRecord& x, const PacketRecord& y) { return x.timestamp < y.timestamp; });
    flows.push_back(std::move(flow));
  }
  return flows;
}

void write_trace(const std::vector<Flow>& flows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open trace file for writing: " + path);
  out << kTraceHeader << '\n';
  for (const Flow& flow : flows) {
    std::string prefix = "," + flow.conn.id + "," + flow.conn.a.address + ":" +
                         std::to_string(flow.conn.a.port) + "," + flow.conn.b.address + ":" +
                         std::to_string(flow.conn.b.port) + ",";
    for (const PacketRecord& pkt : flow.packets) {
      out << format_timestamp(pkt.timestamp) << prefix
          << (pkt.direction == Direction::Downstream ? "down" : "up") << ','
          << pkt.size << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

GroundTruth load_ground_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ground-truth file: " + path);

  std::string line;
  if (!std::getline(in, line)) return {};
  strip_cr(line);
  if (line != kTruthHeader)
    fail_line(path, 1, "bad header, expected '" + std::string(kTruthHeader) + "'");

  GroundTruth truth;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != 2) fail_line(path, line_no, "expected 2 fields");
    if (side_from_id(fields[0]) != Side::ServerSide)
      throw ValidationError(path + ":" + std::to_string(line_no) + ": '" + fields[0] + "' is not server-side");
    if (side_from_id(fields[1]) != Side::ClientSide)
      throw ValidationError(path + ":" + std::to_string(line_no) + ": '" + fields[1] + "' is not client-side");
    auto [it, inserted] = truth.emplace(fields[0], fields[1]);
    if (!inserted)
      throw ValidationError(path + ":" + std::to_string(line_no) + ": duplicate server conn '" + fields[0] + "'");
  }
  return truth;
}

void write_ground_truth(const GroundTruth& truth, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open ground-truth file for writing: " + path);
  out << kTruthHeader << '\n';
  for (const auto& [server_id, client_id] : truth) out << server_id << ',' << client_id << '\n';
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace flowcorr
