#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowcorr {

/// Which side of the overlay a connection was observed on.
/// ServerSide = exit relay <-> web server (unencrypted),
/// ClientSide = client <-> entry relay (encrypted).
enum class Side { ServerSide, ClientSide };

enum class Direction { Downstream, Upstream };

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EndpointTuple {
  std::string address;  // IP literal or simulator node name
  uint16_t port = 0;

  bool operator==(const EndpointTuple&) const = default;
};

/// Identity of one observed connection. The id token is unique per
/// connection per side; its prefix encodes the side ('S' or 'C').
struct ConnectionId {
  std::string id;
  EndpointTuple a;
  EndpointTuple b;
  Side side = Side::ServerSide;

  bool operator==(const ConnectionId&) const = default;
};

struct PacketRecord {
  double timestamp = 0.0;  // seconds, microsecond resolution
  Direction direction = Direction::Downstream;
  uint64_t size = 0;       // bytes, >= 1

  bool operator==(const PacketRecord&) const = default;
};

/// Time-ordered packet sequence for one connection.
struct Flow {
  ConnectionId conn;
  std::vector<PacketRecord> packets;  // sorted non-decreasing by timestamp

  bool operator==(const Flow&) const = default;
};

/// Side implied by a conn_id token prefix ('S' or 'C'); throws ParseError otherwise.
Side side_from_id(const std::string& conn_id);

/// Formats seconds with exactly 6 fractional digits.
std::string format_timestamp(double seconds);

/// Reads a trace CSV and groups packets into flows. Flows come back sorted
/// by conn id, packets sorted by timestamp. Malformed input raises ParseError
/// naming the line number; range violations raise ValidationError.
std::vector<Flow> parse_trace(const std::string& path);

/// Writes flows in the trace CSV format. parse_trace(write_trace(f)) == f
/// for flow lists sorted by conn id.
void write_trace(const std::vector<Flow>& flows, const std::string& path);

/// Ground truth: server conn id -> client conn id, one client per server.
using GroundTruth = std::map<std::string, std::string>;

GroundTruth load_ground_truth(const std::string& path);
void write_ground_truth(const GroundTruth& truth, const std::string& path);

}  // namespace flowcorr
