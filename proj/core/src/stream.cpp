#include "ctta/stream.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace ctta::stream {

const char* transform_name(TransformKind k) {
  switch (k) {
    case TransformKind::kIdentity:
      return "identity";
    case TransformKind::kRotation:
      return "rotation";
    case TransformKind::kTranslation:
      return "translation";
    case TransformKind::kNoise:
      return "noise";
    case TransformKind::kScaling:
      return "scaling";
    case TransformKind::kDropout:
      return "dropout";
  }
  return "?";
}

TransformKind transform_from_name(const std::string& name) {
  if (name == "identity") return TransformKind::kIdentity;
  if (name == "rotation") return TransformKind::kRotation;
  if (name == "translation") return TransformKind::kTranslation;
  if (name == "noise") return TransformKind::kNoise;
  if (name == "scaling") return TransformKind::kScaling;
  if (name == "dropout") return TransformKind::kDropout;
  throw ConfigError("unknown transform kind: " + name);
}

namespace {

double default_unit(TransformKind k) {
  switch (k) {
    case TransformKind::kIdentity:
      return 0.0;
    case TransformKind::kRotation:
      return 0.26179938779914941;  // 15 degrees per severity level
    case TransformKind::kTranslation:
      return 0.60;
    case TransformKind::kNoise:
      return 0.35;
    case TransformKind::kScaling:
      return 0.25;
    case TransformKind::kDropout:
      return 0.12;  // fraction of coordinates zeroed per severity level
  }
  return 0.0;
}

}  // namespace

void DomainSpec::validate() const {
  if (kind == TransformKind::kIdentity) return;
  if (severity < 0 || severity > 5)
    throw ConfigError("severity must lie in [0, 5]");
  if (magnitude < 0.0) throw ConfigError("magnitude must be non-negative");
}

double DomainSpec::strength() const {
  const double unit = magnitude > 0.0 ? magnitude : default_unit(kind);
  return unit * static_cast<double>(severity);
}

const char* schedule_mode_name(ScheduleMode m) {
  switch (m) {
    case ScheduleMode::kAbrupt:
      return "abrupt";
    case ScheduleMode::kGradual:
      return "gradual";
    case ScheduleMode::kCyclic:
      return "cyclic";
  }
  return "?";
}

ScheduleMode schedule_mode_from_name(const std::string& name) {
  if (name == "abrupt") return ScheduleMode::kAbrupt;
  if (name == "gradual") return ScheduleMode::kGradual;
  if (name == "cyclic") return ScheduleMode::kCyclic;
  throw ConfigError("unknown schedule mode: " + name);
}

void StreamSchedule::validate() const {
  if (domains.empty()) throw ConfigError("schedule has no domains");
  if (batch_size <= 0) throw ConfigError("batch size must be positive");
  if (cycles <= 0) throw ConfigError("cycle count must be positive");
  for (const auto& [spec, count] : domains) {
    spec.validate();
    if (count <= 0) throw ConfigError("per-domain batch count must be positive");
  }
}

std::vector<StreamSchedule::Segment> StreamSchedule::expand() const {
  validate();
  std::vector<Segment> out;
  const int rounds = (mode == ScheduleMode::kCyclic) ? cycles : 1;
  int first = 0;
  for (int r = 0; r < rounds; ++r) {
    for (const auto& [spec, count] : domains) {
      if (mode == ScheduleMode::kGradual &&
          spec.kind != TransformKind::kIdentity) {
        // Severity ramp 1..5..1; the domain's batch budget is spread as
        // evenly as possible over the nine stops.
        static constexpr int kRamp[9] = {1, 2, 3, 4, 5, 4, 3, 2, 1};
        const int base = count / 9;
        const int extra = count % 9;
        for (int i = 0; i < 9; ++i) {
          const int batches = base + (i < extra ? 1 : 0);
          if (batches == 0) continue;
          DomainSpec s = spec;
          s.severity = kRamp[i];
          out.push_back({s, batches, r, first});
          first += batches;
        }
      } else {
        out.push_back({spec, count, r, first});
        first += count;
      }
    }
  }
  return out;
}

int StreamSchedule::total_batches() const {
  int total = 0;
  for (const auto& seg : expand()) total += seg.batches;
  return total;
}

void SourceSpec::validate() const {
  if (classes < 2) throw ConfigError("source needs at least 2 classes");
  if (dim <= 0) throw ConfigError("source dimension must be positive");
  if (per_class <= 0)
    throw ConfigError("per-class sample count must be positive");
  if (cluster_std <= 0.0) throw ConfigError("cluster std must be positive");
}

Matrix class_means(std::uint64_t seed, const SourceSpec& spec) {
  spec.validate();
  Rng rng = split(Rng::from_seed(seed), RngStream::kSourceMeans);
  Matrix means(spec.classes, spec.dim);
  for (int c = 0; c < spec.classes; ++c) {
    Eigen::RowVectorXd dir(spec.dim);
    for (int j = 0; j < spec.dim; ++j) dir(j) = rng.next_gaussian();
    means.row(c) = dir * (spec.mean_scale / dir.norm());
  }
  return means;
}

LabeledDataset make_source_dataset(std::uint64_t seed, const SourceSpec& spec) {
  spec.validate();
  const Matrix means = class_means(seed, spec);
  Rng rng = split(Rng::from_seed(seed), RngStream::kSourceData);
  LabeledDataset ds;
  ds.x.resize(spec.classes * spec.per_class, spec.dim);
  ds.y.resize(static_cast<std::size_t>(spec.classes * spec.per_class));
  Eigen::Index row = 0;
  for (int c = 0; c < spec.classes; ++c) {
    for (int i = 0; i < spec.per_class; ++i, ++row) {
      for (int j = 0; j < spec.dim; ++j)
        ds.x(row, j) = means(c, j) + spec.cluster_std * rng.next_gaussian();
      ds.y[static_cast<std::size_t>(row)] = c;
    }
  }
  return ds;
}

namespace {

Rng domain_rng(std::uint64_t seed, int domain_id) {
  return split(Rng::from_seed(seed), RngStream::kDomainParams)
      .split(static_cast<std::uint64_t>(domain_id));
}

// Deterministic coordinate permutation for the dropout mask.
std::vector<int> domain_permutation(Rng rng, int dim) {
  std::vector<int> perm(static_cast<std::size_t>(dim));
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = dim - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(i + 1)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  return perm;
}

void sample_source_rows(const Matrix& means, const SourceSpec& spec, Rng& rng,
                        Matrix& x, std::vector<int>& y) {
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int c = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(spec.classes)));
    y[static_cast<std::size_t>(i)] = c;
    for (int j = 0; j < spec.dim; ++j)
      x(i, j) = means(c, j) + spec.cluster_std * rng.next_gaussian();
  }
}

}  // namespace

void apply_transform(const DomainSpec& spec, std::uint64_t seed,
                     Rng& noise_rng, Matrix& x) {
  spec.validate();
  if (spec.kind == TransformKind::kIdentity || spec.severity == 0) return;
  const double s = spec.strength();
  const int dim = static_cast<int>(x.cols());
  Rng drng = domain_rng(seed, spec.id);

  switch (spec.kind) {
    case TransformKind::kIdentity:
      break;
    case TransformKind::kRotation: {
      // Givens rotations in the fixed planes (0,1), (2,3), ...; each plane
      // gets a per-domain sign so repeated rotation domains differ.
      for (int p = 0; p + 1 < dim; p += 2) {
        const double sign = (drng.next_u64() & 1) ? 1.0 : -1.0;
        const double c = std::cos(sign * s);
        const double sn = std::sin(sign * s);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
          const double a = x(i, p);
          const double b = x(i, p + 1);
          x(i, p) = c * a - sn * b;
          x(i, p + 1) = sn * a + c * b;
        }
      }
      break;
    }
    case TransformKind::kTranslation: {
      Eigen::RowVectorXd dir(dim);
      for (int j = 0; j < dim; ++j) dir(j) = drng.next_gaussian();
      dir /= dir.norm();
      x.rowwise() += dir * s;
      break;
    }
    case TransformKind::kNoise: {
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j)
          x(i, j) += s * noise_rng.next_gaussian();
      break;
    }
    case TransformKind::kScaling: {
      x *= 1.0 / (1.0 + s);
      break;
    }
    case TransformKind::kDropout: {
      const auto perm = domain_permutation(drng, dim);
      const int k = std::min(dim, static_cast<int>(std::lround(s * dim)));
      for (int j = 0; j < k; ++j)
        x.col(perm[static_cast<std::size_t>(j)]).setZero();
      break;
    }
  }
}

StreamCursor::StreamCursor(std::uint64_t seed, SourceSpec source,
                           StreamSchedule schedule)
    : seed_(seed), source_(std::move(source)), schedule_(std::move(schedule)) {
  source_.validate();
  segments_ = schedule_.expand();
  means_ = class_means(seed_, source_);
  for (const auto& seg : segments_) total_ += seg.batches;
}

std::optional<LabeledBatch> StreamCursor::next() {
  if (pos_ >= total_) return std::nullopt;

  // Locate the segment containing the current batch index.
  int seg_idx = 0;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const auto& seg = segments_[i];
    if (pos_ >= seg.first_batch && pos_ < seg.first_batch + seg.batches) {
      seg_idx = static_cast<int>(i);
      break;
    }
  }
  const auto& seg = segments_[static_cast<std::size_t>(seg_idx)];

  LabeledBatch batch;
  batch.features.resize(schedule_.batch_size, source_.dim);
  batch.labels.resize(static_cast<std::size_t>(schedule_.batch_size));
  batch.domain_id = seg.spec.id;
  batch.severity = seg.spec.severity;
  batch.segment = seg_idx;
  batch.step = pos_;

  Rng rng = split(Rng::from_seed(seed_), RngStream::kAdaptBatch)
                .split(static_cast<std::uint64_t>(pos_));
  sample_source_rows(means_, source_, rng, batch.features, batch.labels);
  apply_transform(seg.spec, seed_, rng, batch.features);

  ++pos_;
  return batch;
}

void StreamCursor::seek(std::int64_t batch_index) {
  if (batch_index < 0 || batch_index > total_)
    throw ConfigError("seek position outside the stream");
  pos_ = batch_index;
}

LabeledBatch eval_split(std::uint64_t seed, const SourceSpec& source,
                        const DomainSpec& domain, int n) {
  source.validate();
  domain.validate();
  if (n <= 0) throw ConfigError("eval split size must be positive");

  const Matrix means = class_means(seed, source);
  Rng rng = split(Rng::from_seed(seed), RngStream::kEvalSplit)
                .split(static_cast<std::uint64_t>(domain.id))
                .split(static_cast<std::uint64_t>(domain.kind) * 8 +
                       static_cast<std::uint64_t>(domain.severity));

  LabeledBatch batch;
  batch.features.resize(n, source.dim);
  batch.labels.resize(static_cast<std::size_t>(n));
  batch.domain_id = domain.id;
  batch.severity = domain.severity;
  sample_source_rows(means, source, rng, batch.features, batch.labels);
  apply_transform(domain, seed, rng, batch.features);
  return batch;
}

void write_manifest(std::ostream& out,
                    const std::vector<StreamSchedule::Segment>& segments) {
  out << "# batch domain_id kind severity segment round\n";
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& seg = segments[i];
    for (int b = 0; b < seg.batches; ++b) {
      out << (seg.first_batch + b) << ' ' << seg.spec.id << ' '
          << transform_name(seg.spec.kind) << ' ' << seg.spec.severity << ' '
          << i << ' ' << seg.round << '\n';
    }
  }
}

}  // namespace ctta::stream
