#include "flowcorr/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace flowcorr {
namespace {

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string stat_cell(const KpiStat& stat, size_t count) {
  if (count == 1) return fmt3(stat.mean);
  return fmt3(stat.mean) + "\xC2\xB1" + fmt3(stat.stddev);  // mean±std
}

struct KpiAccessor {
  const char* name;
  KpiStat KpiSummary::* stat;
};

constexpr KpiAccessor kKpiRows[] = {
    {"se", &KpiSummary::se},   {"sp", &KpiSummary::sp},   {"fpr", &KpiSummary::fpr},
    {"fnr", &KpiSummary::fnr}, {"ppv", &KpiSummary::ppv}, {"npv", &KpiSummary::npv},
};

KpiStat aggregate(const std::vector<double>& values, size_t excluded) {
  KpiStat stat;
  stat.excluded = excluded;
  if (values.empty()) return stat;
  double sum = 0.0;
  for (double v : values) sum += v;
  stat.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - stat.mean) * (v - stat.mean);
  stat.stddev = std::sqrt(sq / static_cast<double>(values.size()));  // population std
  return stat;
}

}  // namespace

ConfusionMatrix confusion(const CandidateSet& candidates, const std::string& truth_client_id,
                          size_t n_clients) {
  if (n_clients < 1) throw ValidationError("n_clients must be >= 1");
  ConfusionMatrix m;
  m.nt = static_cast<int64_t>(n_clients) - 1;
  bool hit = std::any_of(candidates.candidates.begin(), candidates.candidates.end(),
                         [&](const ConnectionId& c) { return c.id == truth_client_id; });
  m.tp = hit ? 1 : 0;
  m.fn = 1 - m.tp;
  m.fp = static_cast<int64_t>(candidates.candidates.size()) - m.tp;
  if (m.fp > m.nt)
    throw ValidationError("candidate count " + std::to_string(candidates.candidates.size()) +
                          " impossible for " + std::to_string(n_clients) + " clients");
  m.tn = m.nt - m.fp;
  return m;
}

KpiVector kpis(const ConfusionMatrix& m) {
  KpiVector v;
  v.se = static_cast<double>(m.tp) / static_cast<double>(m.t);
  v.fnr = 1.0 - v.se;
  // sp = tn/nt with no non-targets means nothing was misclassified
  v.sp = m.nt > 0 ? static_cast<double>(m.tn) / static_cast<double>(m.nt) : 1.0;
  v.fpr = 1.0 - v.sp;  // equals fp/nt, derived so the identity is exact
  if (m.tp + m.fp > 0)
    v.ppv = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
  if (m.fn + m.tn > 0)
    v.npv = static_cast<double>(m.tn) / static_cast<double>(m.fn + m.tn);
  return v;
}

KpiSummary summarize(const std::vector<KpiVector>& vectors) {
  if (vectors.empty()) throw ValidationError("cannot summarize an empty KPI list");
  KpiSummary out;
  out.count = vectors.size();

  std::vector<double> se, sp, fpr, fnr, ppv, npv;
  size_t ppv_excluded = 0, npv_excluded = 0;
  for (const KpiVector& v : vectors) {
    se.push_back(v.se);
    sp.push_back(v.sp);
    fpr.push_back(v.fpr);
    fnr.push_back(v.fnr);
    if (v.ppv) ppv.push_back(*v.ppv); else ++ppv_excluded;
    if (v.npv) npv.push_back(*v.npv); else ++npv_excluded;
  }
  out.se = aggregate(se, 0);
  out.sp = aggregate(sp, 0);
  out.fpr = aggregate(fpr, 0);
  out.fnr = aggregate(fnr, 0);
  out.ppv = aggregate(ppv, ppv_excluded);
  out.npv = aggregate(npv, npv_excluded);
  return out;
}

std::string render_report_table(const std::vector<ReportColumn>& columns) {
  bool any_victim = std::any_of(columns.begin(), columns.end(),
                                [](const ReportColumn& c) { return c.victim_detected.has_value(); });

  std::vector<std::vector<std::string>> cells;  // rows x (1 + columns)
  std::vector<std::string> header{""};
  for (const ReportColumn& c : columns) header.push_back(c.name);
  cells.push_back(header);
  for (const KpiAccessor& row : kKpiRows) {
    std::vector<std::string> line{row.name};
    for (const ReportColumn& c : columns) line.push_back(stat_cell(c.summary.*(row.stat), c.summary.count));
    cells.push_back(line);
  }
  if (any_victim) {
    std::vector<std::string> line{"Victim Detected:"};
    for (const ReportColumn& c : columns)
      line.push_back(c.victim_detected ? (*c.victim_detected ? "True" : "False") : "-");
    cells.push_back(line);
  }

  std::vector<size_t> widths(cells[0].size(), 0);
  for (const auto& line : cells)
    for (size_t i = 0; i < line.size(); ++i) {
      // the ± sign is two bytes but one column
      size_t display = line[i].size() - (line[i].find("\xC2\xB1") != std::string::npos ? 1 : 0);
      widths[i] = std::max(widths[i], display);
    }

  std::ostringstream out;
  for (const auto& line : cells) {
    for (size_t i = 0; i < line.size(); ++i) {
      size_t display = line[i].size() - (line[i].find("\xC2\xB1") != std::string::npos ? 1 : 0);
      out << line[i] << std::string(widths[i] - display + (i + 1 < line.size() ? 2 : 0), ' ');
    }
    out << '\n';
  }
  return out.str();
}

std::string render_report_csv(const std::vector<ReportColumn>& columns) {
  std::ostringstream out;
  out << "kpi";
  for (const ReportColumn& c : columns) out << ',' << c.name << "_mean," << c.name << "_std," << c.name << "_excluded";
  out << '\n';
  for (const KpiAccessor& row : kKpiRows) {
    out << row.name;
    for (const ReportColumn& c : columns) {
      const KpiStat& stat = c.summary.*(row.stat);
      out << ',' << fmt3(stat.mean) << ',' << fmt3(stat.stddev) << ',' << stat.excluded;
    }
    out << '\n';
  }
  out << "victim_detected";
  for (const ReportColumn& c : columns)
    out << ',' << (c.victim_detected ? (*c.victim_detected ? "true" : "false") : "") << ",,";
  out << '\n';
  return out.str();
}

}  // namespace flowcorr
