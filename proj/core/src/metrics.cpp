#include "ctta/metrics.hpp"

#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace ctta::harness {

std::string fmt_double(double v) {
  // Shortest round-trip form: folds over the file reproduce in-memory folds.
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_steps_header(std::ostream& out, int classes,
                        std::uint64_t config_hash) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, config_hash);
  out << "# config_hash=" << buf << "\n";
  out << "step,segment,domain_id,severity,batch_error,domain_cum_error,"
         "loss_st,loss_pce,loss_crp,lambda_crp,loss_total,buffer_size";
  for (int c = 0; c < classes; ++c) out << ",hist_" << c;
  out << "\n";
}

void write_record(std::ostream& out, const MetricsRecord& r) {
  out << r.step << ',' << r.segment << ',' << r.domain_id << ',' << r.severity
      << ',' << fmt_double(r.batch_error) << ',' << fmt_double(r.domain_cum_error)
      << ',' << fmt_double(r.loss.st) << ',' << fmt_double(r.loss.pce) << ','
      << fmt_double(r.loss.crp) << ',' << fmt_double(r.loss.lambda_crp) << ','
      << fmt_double(r.loss.total) << ',' << r.buffer_size;
  for (int h : r.label_hist) out << ',' << h;
  out << "\n";
}

std::vector<MetricsRecord> read_steps_file(const std::string& path,
                                           std::uint64_t* config_hash_out) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("# config_hash=", 0) != 0)
    throw IoError(path + ": missing config hash line");
  if (config_hash_out)
    *config_hash_out = std::stoull(line.substr(14), nullptr, 16);
  if (!std::getline(in, line) || line.rfind("step,", 0) != 0)
    throw IoError(path + ": missing header line");

  std::vector<MetricsRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    MetricsRecord r;
    auto next = [&]() -> std::string {
      if (!std::getline(ss, field, ',')) throw IoError(path + ": short row");
      return field;
    };
    r.step = std::stoll(next());
    r.segment = std::stoi(next());
    r.domain_id = std::stoi(next());
    r.severity = std::stoi(next());
    r.batch_error = std::stod(next());
    r.domain_cum_error = std::stod(next());
    r.loss.st = std::stod(next());
    r.loss.pce = std::stod(next());
    r.loss.crp = std::stod(next());
    r.loss.lambda_crp = std::stod(next());
    r.loss.total = std::stod(next());
    r.buffer_size = std::stoi(next());
    while (std::getline(ss, field, ','))
      r.label_hist.push_back(std::stoi(field));
    records.push_back(std::move(r));
  }
  return records;
}

RunSummary fold_records(
    const std::vector<MetricsRecord>& records,
    const std::vector<stream::StreamSchedule::Segment>& segments) {
  RunSummary s;
  s.segments.reserve(segments.size());
  std::vector<double> seg_sum(segments.size(), 0.0);
  std::vector<int> seg_count(segments.size(), 0);
  for (const auto& r : records) {
    if (r.segment < 0 || static_cast<std::size_t>(r.segment) >= segments.size())
      throw InputError("record references unknown segment");
    seg_sum[static_cast<std::size_t>(r.segment)] += r.batch_error;
    seg_count[static_cast<std::size_t>(r.segment)] += 1;
  }

  int max_round = 0;
  for (const auto& seg : segments) max_round = std::max(max_round, seg.round);
  std::vector<double> round_sum(static_cast<std::size_t>(max_round) + 1, 0.0);
  std::vector<int> round_count(static_cast<std::size_t>(max_round) + 1, 0);

  double total = 0.0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    SegmentSummary seg;
    seg.segment = static_cast<int>(i);
    seg.domain_id = segments[i].spec.id;
    seg.kind = segments[i].spec.kind;
    seg.severity = segments[i].spec.severity;
    seg.round = segments[i].round;
    seg.batches = seg_count[i];
    seg.mean_error = seg_count[i] ? seg_sum[i] / seg_count[i] : 0.0;
    total += seg.mean_error;
    round_sum[static_cast<std::size_t>(seg.round)] += seg.mean_error;
    round_count[static_cast<std::size_t>(seg.round)] += 1;
    s.segments.push_back(seg);
  }
  s.mean_error = s.segments.empty() ? 0.0 : total / static_cast<double>(s.segments.size());
  for (std::size_t r = 0; r < round_sum.size(); ++r)
    s.round_means.push_back(round_count[r] ? round_sum[r] / round_count[r] : 0.0);
  return s;
}

void write_summary_csv(std::ostream& out, const RunSummary& s,
                       std::uint64_t config_hash) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, config_hash);
  out << "# config_hash=" << buf << "\n";
  out << "row,segment,domain_id,kind,severity,round,batches,mean_error\n";
  for (const auto& seg : s.segments) {
    out << "segment," << seg.segment << ',' << seg.domain_id << ','
        << stream::transform_name(seg.kind) << ',' << seg.severity << ','
        << seg.round << ',' << seg.batches << ',' << fmt_double(seg.mean_error)
        << "\n";
  }
  for (std::size_t r = 0; r < s.round_means.size(); ++r)
    out << "round,,,,," << r << ",," << fmt_double(s.round_means[r]) << "\n";
  out << "mean,,,,,,," << fmt_double(s.mean_error) << "\n";
}

void write_summary_text(std::ostream& out, const RunSummary& s) {
  char line[160];
  out << "segment  domain  kind         sev  round  batches  mean_error\n";
  for (const auto& seg : s.segments) {
    std::snprintf(line, sizeof line, "%-8d %-7d %-12s %-4d %-6d %-8d %.4f\n",
                  seg.segment, seg.domain_id, stream::transform_name(seg.kind),
                  seg.severity, seg.round, seg.batches, seg.mean_error);
    out << line;
  }
  if (s.round_means.size() > 1) {
    out << "\nper-round mean error:\n";
    for (std::size_t r = 0; r < s.round_means.size(); ++r) {
      std::snprintf(line, sizeof line, "  round %-3zu %.4f\n", r,
                    s.round_means[r]);
      out << line;
    }
  }
  std::snprintf(line, sizeof line, "\nmean error over segments: %.4f\n",
                s.mean_error);
  out << line;
}

}  // namespace ctta::harness
