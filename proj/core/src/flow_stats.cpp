#include "flowcorr/flow_stats.hpp"

#include <algorithm>

namespace flowcorr {

FlowStats compute_stats(const Flow& flow, Direction direction) {
  FlowStats stats;
  double first = 0.0, last = 0.0;
  bool seen = false;
  for (const PacketRecord& pkt : flow.packets) {
    if (pkt.direction != direction) continue;
    if (!seen) {
      first = last = pkt.timestamp;
      seen = true;
    } else {
      first = std::min(first, pkt.timestamp);
      last = std::max(last, pkt.timestamp);
    }
    ++stats.tp;
    stats.td += pkt.size;
  }
  if (!seen)
    throw EmptyFlowError("flow '" + flow.conn.id + "' has no packets in the requested direction");

  stats.frame = TimeFrame{first, last};
  if (stats.tp >= 2) {
    stats.tt = last - first;
    stats.at = stats.tt / static_cast<double>(stats.tp - 1);
  }
  return stats;
}

Flow time_slice(const Flow& flow, const TimeFrame& frame, double slack) {
  const double lo = frame.start - slack;
  const double hi = frame.end + slack;
  Flow out;
  out.conn = flow.conn;
  for (const PacketRecord& pkt : flow.packets)
    if (pkt.timestamp >= lo && pkt.timestamp <= hi) out.packets.push_back(pkt);
  return out;
}

}  // namespace flowcorr
