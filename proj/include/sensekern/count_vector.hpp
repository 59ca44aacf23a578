#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sensekern/error.hpp"

namespace sensekern {

using WordId = std::uint32_t;
using Count = std::uint64_t;

struct CountEntry {
  WordId word = 0;
  Count count = 0;
  friend bool operator==(const CountEntry&, const CountEntry&) = default;
};

// Sparse word-count vector over a vocabulary of size W. Entries are sorted by
// word id, every stored count is >= 1, and total() is the document length N.
// The empty document (N = 0) is representable; kernels that need frequencies
// reject it.
class CountVector {
 public:
  CountVector() = default;

  CountVector(std::size_t vocab_size, std::vector<CountEntry> entries)
      : vocab_size_(vocab_size), entries_(std::move(entries)) {
    if (vocab_size_ == 0) throw UsageError("CountVector: vocabulary size must be positive");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (e.word >= vocab_size_) {
        throw UsageError("CountVector: word id " + std::to_string(e.word) +
                         " out of range for vocabulary of size " + std::to_string(vocab_size_));
      }
      if (e.count == 0) throw UsageError("CountVector: stored counts must be >= 1");
      if (i > 0 && entries_[i - 1].word >= e.word) {
        throw UsageError("CountVector: word ids must be strictly increasing");
      }
      total_ += e.count;
    }
  }

  static CountVector from_dense(std::span<const Count> counts) {
    std::vector<CountEntry> entries;
    for (std::size_t w = 0; w < counts.size(); ++w) {
      if (counts[w] > 0) entries.push_back({static_cast<WordId>(w), counts[w]});
    }
    return CountVector(counts.size(), std::move(entries));
  }

  static CountVector from_dense(std::initializer_list<Count> counts) {
    std::vector<Count> v(counts);
    return from_dense(std::span<const Count>(v));
  }

  // Histogram of a bag of word ids.
  static CountVector from_words(std::size_t vocab_size, std::span<const WordId> words) {
    std::vector<WordId> sorted(words.begin(), words.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<CountEntry> entries;
    for (WordId w : sorted) {
      if (!entries.empty() && entries.back().word == w) {
        ++entries.back().count;
      } else {
        entries.push_back({w, 1});
      }
    }
    return CountVector(vocab_size, std::move(entries));
  }

  std::size_t vocab_size() const { return vocab_size_; }
  Count total() const { return total_; }
  bool empty() const { return total_ == 0; }
  std::span<const CountEntry> entries() const { return entries_; }
  std::size_t nnz() const { return entries_.size(); }

  Count count(WordId w) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), w,
                               [](const CountEntry& e, WordId id) { return e.word < id; });
    return (it != entries_.end() && it->word == w) ? it->count : 0;
  }

  std::vector<Count> dense() const {
    std::vector<Count> out(vocab_size_, 0);
    for (const auto& e : entries_) out[e.word] = e.count;
    return out;
  }

  CountVector scaled(Count factor) const {
    if (factor == 0) throw UsageError("CountVector::scaled: factor must be positive");
    auto entries = entries_;
    for (auto& e : entries) e.count *= factor;
    return CountVector(vocab_size_, std::move(entries));
  }

  friend bool operator==(const CountVector&, const CountVector&) = default;

 private:
  std::size_t vocab_size_ = 1;
  std::vector<CountEntry> entries_;
  Count total_ = 0;
};

struct FrequencyEntry {
  WordId word = 0;
  double frequency = 0.0;
};

// Normalised word counts x / N of a non-empty document.
class FrequencyVector {
 public:
  FrequencyVector() = default;

  explicit FrequencyVector(const CountVector& counts) : vocab_size_(counts.vocab_size()) {
    if (counts.empty()) throw UsageError("FrequencyVector: empty document has no frequencies");
    const auto n = static_cast<double>(counts.total());
    entries_.reserve(counts.nnz());
    for (const auto& e : counts.entries()) {
      entries_.push_back({e.word, static_cast<double>(e.count) / n});
    }
  }

  // Dense frequencies; must be non-negative and sum to 1 within 1e-12.
  static FrequencyVector from_dense(std::span<const double> freqs) {
    FrequencyVector f;
    f.vocab_size_ = freqs.size();
    if (f.vocab_size_ == 0) throw UsageError("FrequencyVector: vocabulary size must be positive");
    double sum = 0.0;
    for (std::size_t w = 0; w < freqs.size(); ++w) {
      if (!(freqs[w] >= 0.0)) throw UsageError("FrequencyVector: frequencies must be non-negative");
      if (freqs[w] > 0.0) f.entries_.push_back({static_cast<WordId>(w), freqs[w]});
      sum += freqs[w];
    }
    if (std::abs(sum - 1.0) > 1e-12) throw UsageError("FrequencyVector: frequencies must sum to 1");
    return f;
  }

  std::size_t vocab_size() const { return vocab_size_; }
  std::span<const FrequencyEntry> entries() const { return entries_; }

 private:
  std::size_t vocab_size_ = 1;
  std::vector<FrequencyEntry> entries_;
};

// A count vector together with its dataset-stable identifier. The identifier
// keys per-document random substreams (resampling) and Gram row/column labels.
struct Document {
  std::string id;
  CountVector counts;
};

}  // namespace sensekern
