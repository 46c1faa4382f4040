#include "ctta/buffer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace ctta::buffer {

double entropy(const Vector& probs) {
  if (probs.size() == 0) throw InputError("entropy: empty vector");
  double sum = 0.0;
  double h = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const double p = probs(i);
    if (!(p >= 0.0)) throw InputError("entropy: negative or NaN entry");
    sum += p;
    if (p > 0.0) h -= p * std::log(p);
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw InputError("entropy: probabilities sum to " + std::to_string(sum));
  return h;
}

void UncertaintyThreshold::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (classes < 2) throw ConfigError("threshold needs class count >= 2");
}

double UncertaintyThreshold::h0() const {
  validate();
  return alpha * std::log(static_cast<double>(classes));
}

const char* buffer_policy_name(BufferPolicy p) {
  switch (p) {
    case BufferPolicy::kUncertainty:
      return "uncertainty";
    case BufferPolicy::kReservoir:
      return "reservoir";
    case BufferPolicy::kFifo:
      return "fifo";
  }
  return "?";
}

UncertaintyBuffer::UncertaintyBuffer(std::size_t capacity,
                                     UncertaintyThreshold threshold,
                                     BufferPolicy policy, bool strict_eviction)
    : capacity_(capacity),
      threshold_(threshold),
      policy_(policy),
      strict_(strict_eviction) {
  if (capacity_ > 0) threshold_.validate();
  entries_.reserve(capacity_);
}

bool UncertaintyBuffer::heap_less(std::size_t a, std::size_t b) const {
  // "less" in heap priority: a should sit below b.
  const auto& ea = entries_[a];
  const auto& eb = entries_[b];
  if (ea.entropy != eb.entropy) return ea.entropy < eb.entropy;
  if (ea.admit_step != eb.admit_step)
    return ea.admit_step > eb.admit_step;  // older entry wins ties
  return a > b;  // total order, keeps restore() exact
}

void UncertaintyBuffer::heap_swap(std::size_t i, std::size_t j) {
  std::swap(heap_[i], heap_[j]);
  pos_[heap_[i]] = i;
  pos_[heap_[j]] = j;
}

void UncertaintyBuffer::sift_up(std::size_t i) {
  while (i > 0) {
    const std::size_t parent = (i - 1) / 2;
    if (!heap_less(heap_[parent], heap_[i])) break;
    heap_swap(parent, i);
    i = parent;
  }
}

void UncertaintyBuffer::sift_down(std::size_t i) {
  const std::size_t n = heap_.size();
  while (true) {
    std::size_t best = i;
    const std::size_t l = 2 * i + 1;
    const std::size_t r = 2 * i + 2;
    if (l < n && heap_less(heap_[best], heap_[l])) best = l;
    if (r < n && heap_less(heap_[best], heap_[r])) best = r;
    if (best == i) break;
    heap_swap(i, best);
    i = best;
  }
}

void UncertaintyBuffer::heap_push(std::size_t slot) {
  if (pos_.size() <= slot) pos_.resize(slot + 1);
  heap_.push_back(slot);
  pos_[slot] = heap_.size() - 1;
  sift_up(heap_.size() - 1);
}

std::size_t UncertaintyBuffer::heap_pop_root() {
  const std::size_t slot = heap_[0];
  heap_swap(0, heap_.size() - 1);
  heap_.pop_back();
  if (!heap_.empty()) sift_down(0);
  return slot;
}

void UncertaintyBuffer::rebuild_heap() {
  heap_.resize(entries_.size());
  pos_.resize(entries_.size());
  std::iota(heap_.begin(), heap_.end(), std::size_t{0});
  std::iota(pos_.begin(), pos_.end(), std::size_t{0});
  if (heap_.size() > 1)
    for (std::size_t i = heap_.size() / 2; i-- > 0;) sift_down(i);
}

BufferEntry UncertaintyBuffer::remove_slot(std::size_t slot) {
  // Detach from heap first.
  const std::size_t hp = pos_[slot];
  heap_swap(hp, heap_.size() - 1);
  heap_.pop_back();
  if (hp < heap_.size()) {
    sift_down(hp);
    sift_up(hp);
  }
  // Swap-remove from the dense slot array, fixing the moved slot's heap ref.
  BufferEntry removed = std::move(entries_[slot]);
  const std::size_t last = entries_.size() - 1;
  if (slot != last) {
    entries_[slot] = std::move(entries_[last]);
    const std::size_t moved_hp = pos_[last];
    heap_[moved_hp] = slot;
    pos_[slot] = moved_hp;
  }
  entries_.pop_back();
  pos_.pop_back();
  return removed;
}

void UncertaintyBuffer::insert_entry(BufferEntry e) {
  entries_.push_back(std::move(e));
  heap_push(entries_.size() - 1);
}

AdmitOutcome UncertaintyBuffer::admit(const Vector& input,
                                      const Vector& teacher_probs,
                                      const Vector& student_probs,
                                      std::int64_t step, Rng* rng) {
  if (capacity_ == 0) return {AdmitStatus::kRejected, std::nullopt};

  const double h = entropy(student_probs);
  Eigen::Index label_idx = 0;
  teacher_probs.maxCoeff(&label_idx);

  BufferEntry candidate{input, static_cast<int>(label_idx), h, step};

  switch (policy_) {
    case BufferPolicy::kUncertainty: {
      if (!(h < threshold_.h0())) return {AdmitStatus::kRejected, std::nullopt};
      if (entries_.size() < capacity_) {
        insert_entry(std::move(candidate));
        return {AdmitStatus::kInserted, std::nullopt};
      }
      const BufferEntry& worst = entries_[heap_[0]];
      if (strict_ && !(h < worst.entropy))
        return {AdmitStatus::kRejected, std::nullopt};
      BufferEntry evicted = remove_slot(heap_[0]);
      insert_entry(std::move(candidate));
      return {AdmitStatus::kReplaced, std::move(evicted)};
    }
    case BufferPolicy::kReservoir: {
      // Algorithm R over the whole stream; no certainty gate.
      seen_ += 1;
      if (entries_.size() < capacity_) {
        insert_entry(std::move(candidate));
        return {AdmitStatus::kInserted, std::nullopt};
      }
      if (rng == nullptr) throw InputError("reservoir policy needs an RNG");
      const auto j = rng->next_below(static_cast<std::uint64_t>(seen_));
      if (j >= capacity_) return {AdmitStatus::kRejected, std::nullopt};
      BufferEntry evicted = remove_slot(static_cast<std::size_t>(j));
      insert_entry(std::move(candidate));
      return {AdmitStatus::kReplaced, std::move(evicted)};
    }
    case BufferPolicy::kFifo: {
      if (entries_.size() < capacity_) {
        insert_entry(std::move(candidate));
        return {AdmitStatus::kInserted, std::nullopt};
      }
      // Evict the oldest admission step.
      std::size_t oldest = 0;
      for (std::size_t i = 1; i < entries_.size(); ++i)
        if (entries_[i].admit_step < entries_[oldest].admit_step) oldest = i;
      BufferEntry evicted = remove_slot(oldest);
      insert_entry(std::move(candidate));
      return {AdmitStatus::kReplaced, std::move(evicted)};
    }
  }
  return {AdmitStatus::kRejected, std::nullopt};
}

UncertaintyBuffer::ReplayBatch UncertaintyBuffer::sample_replay(
    int batch_size, Rng& rng) const {
  ReplayBatch batch;
  if (entries_.empty() || batch_size <= 0) return batch;

  std::vector<std::size_t> picks;
  picks.reserve(static_cast<std::size_t>(batch_size));
  if (entries_.size() >= static_cast<std::size_t>(batch_size)) {
    // Distinct entries: partial Fisher-Yates over the slot indices.
    std::vector<std::size_t> idx(entries_.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (int i = 0; i < batch_size; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.next_below(idx.size() - i));
      std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
      picks.push_back(idx[static_cast<std::size_t>(i)]);
    }
  } else {
    for (int i = 0; i < batch_size; ++i)
      picks.push_back(static_cast<std::size_t>(rng.next_below(entries_.size())));
  }

  batch.inputs.resize(batch_size, entries_[0].input.size());
  batch.labels.resize(static_cast<std::size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i) {
    const auto& e = entries_[picks[static_cast<std::size_t>(i)]];
    batch.inputs.row(i) = e.input.transpose();
    batch.labels[static_cast<std::size_t>(i)] = e.pseudo_label;
  }
  return batch;
}

UncertaintyBuffer::ReplayBatch UncertaintyBuffer::all_entries() const {
  ReplayBatch batch;
  if (entries_.empty()) return batch;
  batch.inputs.resize(static_cast<Eigen::Index>(entries_.size()),
                      entries_[0].input.size());
  batch.labels.resize(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    batch.inputs.row(static_cast<Eigen::Index>(i)) = entries_[i].input.transpose();
    batch.labels[i] = entries_[i].pseudo_label;
  }
  return batch;
}

const BufferEntry& UncertaintyBuffer::max_entropy_entry() const {
  if (entries_.empty())
    throw InputError("max_entropy_entry: buffer is empty");
  return entries_[heap_[0]];
}

std::vector<int> UncertaintyBuffer::pseudo_label_histogram(int classes) const {
  std::vector<int> hist(static_cast<std::size_t>(classes), 0);
  for (const auto& e : entries_)
    if (e.pseudo_label >= 0 && e.pseudo_label < classes)
      hist[static_cast<std::size_t>(e.pseudo_label)] += 1;
  return hist;
}

void UncertaintyBuffer::write_snapshot(std::ostream& out, int classes) const {
  out << "capacity " << capacity_ << "\n";
  out << "size " << entries_.size() << "\n";
  out << "policy " << buffer_policy_name(policy_) << "\n";
  if (capacity_ > 0 && policy_ == BufferPolicy::kUncertainty)
    out << "h0 " << threshold_.h0() << "\n";
  out << "label_histogram";
  for (int c : pseudo_label_histogram(classes)) out << ' ' << c;
  out << "\nentropies";
  std::vector<double> hs;
  hs.reserve(entries_.size());
  for (const auto& e : entries_) hs.push_back(e.entropy);
  std::sort(hs.begin(), hs.end());
  for (double h : hs) out << ' ' << h;
  out << "\n";
}

UncertaintyBuffer::Snapshot UncertaintyBuffer::snapshot() const {
  return Snapshot{capacity_, threshold_, policy_, strict_, seen_, entries_};
}

UncertaintyBuffer UncertaintyBuffer::restore(Snapshot s) {
  UncertaintyBuffer b(s.capacity, s.threshold, s.policy, s.strict);
  b.seen_ = s.seen;
  b.entries_ = std::move(s.entries);
  b.rebuild_heap();
  return b;
}

}  // namespace ctta::buffer
