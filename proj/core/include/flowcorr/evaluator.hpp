#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flowcorr/detector.hpp"

namespace flowcorr {

/// Single-detection outcome against ground truth. There is exactly one
/// target per detection (t = 1), everything else is a non-target.
struct ConfusionMatrix {
  int tp = 0;          // 0 or 1
  int fn = 0;          // 1 - tp
  int64_t fp = 0;
  int64_t tn = 0;
  int64_t t = 1;
  int64_t nt = 0;      // n_clients - 1
};

struct KpiVector {
  double se = 0.0;
  double sp = 0.0;
  double fpr = 0.0;
  double fnr = 0.0;
  std::optional<double> ppv;  // undefined when tp + fp = 0
  std::optional<double> npv;  // undefined when fn + tn = 0
};

struct KpiStat {
  double mean = 0.0;
  double stddev = 0.0;   // population std
  size_t excluded = 0;   // undefined entries left out of the aggregate
};

struct KpiSummary {
  KpiStat se, sp, fpr, fnr, ppv, npv;
  size_t count = 0;
};

/// Scores one candidate set against the true client.
/// Throws ValidationError if the candidate count cannot fit n_clients.
ConfusionMatrix confusion(const CandidateSet& candidates,
                          const std::string& truth_client_id, size_t n_clients);

KpiVector kpis(const ConfusionMatrix& m);

/// Per-KPI mean and population standard deviation; undefined ppv/npv are
/// excluded per-KPI, never coerced to 0. Throws ValidationError on empty input.
KpiSummary summarize(const std::vector<KpiVector>& vectors);

/// One column of a Table-style performance comparison.
struct ReportColumn {
  std::string name;
  KpiSummary summary;
  std::optional<bool> victim_detected;
};

/// Aligned text table: one row per KPI (se, sp, fpr, fnr, ppv, npv), one
/// column per entry, values as mean±std at 3 decimals (single values when
/// count == 1), plus a Victim Detected row when any column carries it.
std::string render_report_table(const std::vector<ReportColumn>& columns);

/// Same content as CSV.
std::string render_report_csv(const std::vector<ReportColumn>& columns);

}  // namespace flowcorr
