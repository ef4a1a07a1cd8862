#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "flowcorr/flow_stats.hpp"
#include "flowcorr/trace.hpp"

namespace flowcorr {

/// Candidates with value <= this pass a stage whose reference metric is 0.
inline constexpr double kZeroReferenceEpsilon = 1e-9;

/// Per-metric relative tolerance bands. The filter starts at `initial`
/// (clamped to the stage maximum) and widens by `increment` while a stage
/// finds no survivors.
struct ToleranceSchedule {
  double initial = 0.05;
  double increment = 0.01;
  double max_tp = 0.0;
  double max_at = 0.0;
  double max_td = 0.0;
  double max_tt = 0.0;
};

enum class StageMetric { TimeFrame, PacketCount, AvgGap, TotalData, TotalTime };

const char* stage_metric_name(StageMetric m);

struct StageReport {
  StageMetric metric = StageMetric::TimeFrame;
  double final_tolerance = 0.0;
  size_t survivors = 0;
  bool exhausted = false;
};

struct CandidateSet {
  ConnectionId server_conn;
  std::vector<ConnectionId> candidates;  // sorted by conn id
  std::vector<StageReport> stages;
};

/// Optional instrumentation: counts similarity-predicate evaluations.
struct DetectMetrics {
  uint64_t similar_evaluations = 0;
};

/// Relative similarity band anchored on the server-side reference value:
/// |candidate - reference| <= tolerance * reference. A zero reference
/// accepts candidates <= kZeroReferenceEpsilon.
bool similar(double candidate_value, double reference_value, double tolerance);

using StatsPool = std::vector<std::pair<ConnectionId, FlowStats>>;

/// One adaptive filter stage: filters `pool` against `reference` on the
/// given metric, widening the tolerance until survivors appear or the
/// stage maximum is exhausted.
std::pair<StatsPool, StageReport> filter_stage(const StatsPool& pool,
                                               const FlowStats& reference,
                                               StageMetric metric,
                                               const ToleranceSchedule& schedule,
                                               DetectMetrics* metrics = nullptr);

/// Full cascade for one server connection: time-frame slicing first, then
/// packet count, mean gap, total data, total time. Any stage exhaustion
/// empties the candidate set.
CandidateSet detect(const Flow& server_flow, const std::vector<Flow>& client_flows,
                    const ToleranceSchedule& schedule, double slack,
                    DetectMetrics* metrics = nullptr);

struct BatchDetection {
  std::vector<CandidateSet> results;       // one per usable server flow, input order
  std::vector<std::string> skipped;        // conn id + reason for unusable flows
};

/// Runs detect over every server flow. Per-flow failures are recorded, not
/// fatal. `threads` > 1 distributes server connections over workers;
/// results are assembled in input order either way.
BatchDetection detect_all(const std::vector<Flow>& server_flows,
                          const std::vector<Flow>& client_flows,
                          const ToleranceSchedule& schedule, double slack,
                          unsigned threads = 1, DetectMetrics* metrics = nullptr);

}  // namespace flowcorr
