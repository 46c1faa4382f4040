#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ctta/losses.hpp"
#include "ctta/stream.hpp"

namespace ctta::harness {

// One adaptation step's worth of bookkeeping. Everything downstream
// (summaries, ablation tables) is a pure fold over these.
struct MetricsRecord {
  std::int64_t step = 0;
  int segment = 0;
  int domain_id = 0;
  int severity = 0;
  double batch_error = 0.0;       // online, predictions before the update
  double domain_cum_error = 0.0;  // running mean within the current segment
  losses::LossBreakdown loss;
  int buffer_size = 0;
  std::vector<int> label_hist;
};

// steps.csv: one comment line carrying the config hash, a header line, then
// one row per step. Doubles use %.17g so folds over the file reproduce
// in-memory folds bit-exactly.
void write_steps_header(std::ostream& out, int classes,
                        std::uint64_t config_hash);
void write_record(std::ostream& out, const MetricsRecord& r);
std::vector<MetricsRecord> read_steps_file(const std::string& path,
                                           std::uint64_t* config_hash_out);

struct SegmentSummary {
  int segment = 0;
  int domain_id = 0;
  stream::TransformKind kind = stream::TransformKind::kIdentity;
  int severity = 0;
  int round = 0;
  int batches = 0;
  double mean_error = 0.0;
};

struct RunSummary {
  std::vector<SegmentSummary> segments;
  std::vector<double> round_means;  // one entry per cyclic round
  double mean_error = 0.0;          // mean over segment means
};

RunSummary fold_records(const std::vector<MetricsRecord>& records,
                        const std::vector<stream::StreamSchedule::Segment>& segments);

void write_summary_csv(std::ostream& out, const RunSummary& s,
                       std::uint64_t config_hash);
void write_summary_text(std::ostream& out, const RunSummary& s);

// Full-precision double formatting shared by every CSV writer.
std::string fmt_double(double v);

}  // namespace ctta::harness
