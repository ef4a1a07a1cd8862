#include "flowcorr/detector.hpp"

#include <algorithm>
#include <cmath>
#include <future>

namespace flowcorr {
namespace {

double metric_value(const FlowStats& s, StageMetric metric) {
  switch (metric) {
    case StageMetric::PacketCount: return static_cast<double>(s.tp);
    case StageMetric::AvgGap: return s.at;
    case StageMetric::TotalData: return static_cast<double>(s.td);
    case StageMetric::TotalTime: return s.tt;
    case StageMetric::TimeFrame: break;
  }
  throw std::logic_error("TimeFrame has no scalar metric");
}

double max_tolerance(const ToleranceSchedule& schedule, StageMetric metric) {
  switch (metric) {
    case StageMetric::PacketCount: return schedule.max_tp;
    case StageMetric::AvgGap: return schedule.max_at;
    case StageMetric::TotalData: return schedule.max_td;
    case StageMetric::TotalTime: return schedule.max_tt;
    case StageMetric::TimeFrame: break;
  }
  throw std::logic_error("TimeFrame has no tolerance");
}

constexpr StageMetric kCascade[] = {StageMetric::PacketCount, StageMetric::AvgGap,
                                    StageMetric::TotalData, StageMetric::TotalTime};

}  // namespace

const char* stage_metric_name(StageMetric m) {
  switch (m) {
    case StageMetric::TimeFrame: return "time_frame";
    case StageMetric::PacketCount: return "packet_count";
    case StageMetric::AvgGap: return "avg_gap";
    case StageMetric::TotalData: return "total_data";
    case StageMetric::TotalTime: return "total_time";
  }
  return "?";
}

bool similar(double candidate_value, double reference_value, double tolerance) {
  if (reference_value == 0.0) return candidate_value <= kZeroReferenceEpsilon;
  return std::abs(candidate_value - reference_value) <= tolerance * reference_value;
}

std::pair<StatsPool, StageReport> filter_stage(const StatsPool& pool,
                                               const FlowStats& reference,
                                               StageMetric metric,
                                               const ToleranceSchedule& schedule,
                                               DetectMetrics* metrics) {
  const double ref = metric_value(reference, metric);
  const double max = max_tolerance(schedule, metric);
  double tolerance = std::min(schedule.initial, max);

  while (true) {
    StatsPool survivors;
    for (const auto& entry : pool) {
      if (metrics) ++metrics->similar_evaluations;
      if (similar(metric_value(entry.second, metric), ref, tolerance))
        survivors.push_back(entry);
    }
    if (!survivors.empty()) {
      StageReport report{metric, tolerance, survivors.size(), false};
      return {std::move(survivors), report};
    }
    if (tolerance >= max)
      return {{}, StageReport{metric, tolerance, 0, true}};
    tolerance = std::min(tolerance + schedule.increment, max);
  }
}

CandidateSet detect(const Flow& server_flow, const std::vector<Flow>& client_flows,
                    const ToleranceSchedule& schedule, double slack, DetectMetrics* metrics) {
  const FlowStats reference = compute_stats(server_flow, Direction::Downstream);

  CandidateSet out;
  out.server_conn = server_flow.conn;

  // Stage 1: time-frame overlap. A client flow survives when its slice by
  // the server frame (+- slack) still contains downstream packets; its
  // fingerprint is recomputed over that slice only.
  StatsPool pool;
  for (const Flow& client : client_flows) {
    Flow sliced = time_slice(client, reference.frame, slack);
    bool has_down = std::any_of(sliced.packets.begin(), sliced.packets.end(),
                                [](const PacketRecord& p) { return p.direction == Direction::Downstream; });
    if (!has_down) continue;
    pool.emplace_back(client.conn, compute_stats(sliced, Direction::Downstream));
  }
  out.stages.push_back(StageReport{StageMetric::TimeFrame, 0.0, pool.size(), pool.empty()});
  if (pool.empty()) return out;

  for (StageMetric metric : kCascade) {
    auto [survivors, report] = filter_stage(pool, reference, metric, schedule, metrics);
    out.stages.push_back(report);
    if (report.exhausted) return out;  // Stop: whole pipeline aborts, no candidates
    pool = std::move(survivors);
  }

  out.candidates.reserve(pool.size());
  for (const auto& entry : pool) out.candidates.push_back(entry.first);
  std::sort(out.candidates.begin(), out.candidates.end(),
            [](const ConnectionId& x, const ConnectionId& y) { return x.id < y.id; });
  return out;
}

BatchDetection detect_all(const std::vector<Flow>& server_flows,
                          const std::vector<Flow>& client_flows,
                          const ToleranceSchedule& schedule, double slack,
                          unsigned threads, DetectMetrics* metrics) {
  BatchDetection batch;
  std::vector<const Flow*> usable;
  for (const Flow& flow : server_flows) {
    bool has_down = std::any_of(flow.packets.begin(), flow.packets.end(),
                                [](const PacketRecord& p) { return p.direction == Direction::Downstream; });
    if (has_down)
      usable.push_back(&flow);
    else
      batch.skipped.push_back(flow.conn.id + ": no downstream packets");
  }

  batch.results.resize(usable.size());
  if (threads <= 1 || usable.size() <= 1) {
    for (size_t i = 0; i < usable.size(); ++i)
      batch.results[i] = detect(*usable[i], client_flows, schedule, slack, metrics);
    return batch;
  }

  const unsigned workers = std::min<unsigned>(threads, static_cast<unsigned>(usable.size()));
  std::vector<DetectMetrics> per_worker(workers);
  std::vector<std::future<void>> futures;
  futures.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    futures.push_back(std::async(std::launch::async, [&, w] {
      for (size_t i = w; i < usable.size(); i += workers)
        batch.results[i] = detect(*usable[i], client_flows, schedule, slack, &per_worker[w]);
    }));
  }
  for (auto& f : futures) f.get();
  if (metrics)
    for (const DetectMetrics& m : per_worker) metrics->similar_evaluations += m.similar_evaluations;
  return batch;
}

}  // namespace flowcorr
