#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "ctta/errors.hpp"
#include "ctta/net.hpp"
#include "ctta/rng.hpp"

namespace ctta::buffer {

using nn::Matrix;
using nn::Vector;

// Shannon entropy in nats, -sum p log p with 0 log 0 = 0. Validates that the
// input is a probability vector (entries >= 0, sum within 1e-6 of 1).
double entropy(const Vector& probs);

// H0 = alpha * ln C, the admission gate.
struct UncertaintyThreshold {
  double alpha = 0.1;
  int classes = 0;

  void validate() const;
  double h0() const;
};

struct BufferEntry {
  Vector input;              // raw sample as seen on the stream
  int pseudo_label = 0;      // teacher argmax at admission
  double entropy = 0.0;      // student entropy at admission, nats
  std::int64_t admit_step = 0;
};

enum class AdmitStatus { kRejected, kInserted, kReplaced };

struct AdmitOutcome {
  AdmitStatus status = AdmitStatus::kRejected;
  std::optional<BufferEntry> evicted;  // set for kReplaced
};

// kUncertainty is the production policy; reservoir and FIFO exist only as
// ablation baselines and skip the entropy gate.
enum class BufferPolicy { kUncertainty, kReservoir, kFifo };

const char* buffer_policy_name(BufferPolicy p);

// Capacity-bounded sample store. Under the uncertainty policy, admission is
// gated on the candidate's entropy being below H0, a full buffer evicts its
// highest-entropy entry, and (in strict mode) only for a candidate that is
// strictly more certain than that entry.
class UncertaintyBuffer {
 public:
  UncertaintyBuffer() = default;
  UncertaintyBuffer(std::size_t capacity, UncertaintyThreshold threshold,
                    BufferPolicy policy = BufferPolicy::kUncertainty,
                    bool strict_eviction = true);

  // teacher_probs supply the pseudo-label, student_probs the gating entropy.
  // `rng` is consulted only by the reservoir policy.
  AdmitOutcome admit(const Vector& input, const Vector& teacher_probs,
                     const Vector& student_probs, std::int64_t step,
                     Rng* rng = nullptr);

  struct ReplayBatch {
    Matrix inputs;            // k x d, empty when the buffer is empty
    std::vector<int> labels;  // pseudo-labels aligned with rows
    bool empty() const { return labels.empty(); }
  };

  // Uniform draw of batch_size entries: distinct entries when the buffer
  // holds at least batch_size, with replacement otherwise.
  ReplayBatch sample_replay(int batch_size, Rng& rng) const;

  // All entries in admission-slot order (for whole-buffer graph estimation).
  ReplayBatch all_entries() const;

  const BufferEntry& max_entropy_entry() const;  // throws InputError on empty

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return entries_.empty(); }
  const BufferEntry& entry(std::size_t i) const { return entries_[i]; }
  const UncertaintyThreshold& threshold() const { return threshold_; }
  BufferPolicy policy() const { return policy_; }
  bool strict_eviction() const { return strict_; }
  std::int64_t seen_count() const { return seen_; }

  std::vector<int> pseudo_label_histogram(int classes) const;

  // Structured-text audit export: capacity, entropies, label histogram.
  void write_snapshot(std::ostream& out, int classes) const;

  // Checkpoint support: exact state round-trip.
  struct Snapshot {
    std::size_t capacity;
    UncertaintyThreshold threshold;
    BufferPolicy policy;
    bool strict;
    std::int64_t seen;
    std::vector<BufferEntry> entries;
  };
  Snapshot snapshot() const;
  static UncertaintyBuffer restore(Snapshot s);

 private:
  // Max-heap order: higher entropy first, older admission step breaking ties.
  bool heap_less(std::size_t a, std::size_t b) const;
  void heap_swap(std::size_t i, std::size_t j);
  void sift_up(std::size_t i);
  void sift_down(std::size_t i);
  void heap_push(std::size_t slot);
  std::size_t heap_pop_root();
  void rebuild_heap();

  BufferEntry remove_slot(std::size_t slot);
  void insert_entry(BufferEntry e);

  std::size_t capacity_ = 0;
  UncertaintyThreshold threshold_;
  BufferPolicy policy_ = BufferPolicy::kUncertainty;
  bool strict_ = true;

  std::vector<BufferEntry> entries_;   // dense slots
  std::vector<std::size_t> heap_;      // heap of slot indices
  std::vector<std::size_t> pos_;       // slot -> heap position
  std::int64_t seen_ = 0;              // admitted-candidate counter (reservoir)
};

}  // namespace ctta::buffer
