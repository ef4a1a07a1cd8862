#pragma once

#include <cstdint>

#include "flowcorr/trace.hpp"

namespace flowcorr {

struct EmptyFlowError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TimeFrame {
  double start = 0.0;
  double end = 0.0;

  double span() const { return end - start; }
  bool operator==(const TimeFrame&) const = default;
};

/// Four-metric connection fingerprint plus its time frame:
/// tp = packet count, at = mean gap between successive packets,
/// td = total bytes, tt = total duration.
struct FlowStats {
  uint64_t tp = 0;
  double at = 0.0;
  uint64_t td = 0;
  double tt = 0.0;
  TimeFrame frame;

  bool operator==(const FlowStats&) const = default;
};

/// Fingerprints the packets of `flow` matching `direction`.
/// tp <= 1 yields at = 0 and tt = 0. Throws EmptyFlowError when no packet
/// matches the direction.
FlowStats compute_stats(const Flow& flow, Direction direction);

/// Keeps exactly the packets with timestamp in [frame.start - slack,
/// frame.end + slack], order preserved. Result may be empty.
Flow time_slice(const Flow& flow, const TimeFrame& frame, double slack);

}  // namespace flowcorr
