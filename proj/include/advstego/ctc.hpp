#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "advstego/linalg.hpp"

namespace advstego {

using Transcript = std::string;

/// Character label space: 'a'-'z', space, and a trailing blank class.
class Alphabet {
public:
  /// The default 27-symbol alphabet.
  Alphabet();
  /// Throws AlphabetError on duplicates.
  explicit Alphabet(std::string symbols);

  const std::string& symbols() const noexcept { return symbols_; }
  int blank() const noexcept { return static_cast<int>(symbols_.size()); }
  int num_classes() const noexcept { return blank() + 1; }

  bool contains(char c) const noexcept;
  /// Throws AlphabetError for characters outside the alphabet.
  int index_of(char c) const;
  char symbol(int index) const;

  std::vector<int> encode(std::string_view text) const;
  Transcript decode(std::span<const int> labels) const;

  friend bool operator==(const Alphabet&, const Alphabet&) = default;

private:
  std::string symbols_;
};

/// Minimum number of frames a CTC alignment of `labels` needs: one per
/// label plus one separating blank per adjacent repeat.
std::size_t ctc_min_frames(std::span<const int> labels);

struct CtcResult {
  double loss = 0.0;  // -log P(target | logits); +inf when infeasible
  Matrix grad;        // d loss / d logits, T x classes; zero when infeasible
  bool feasible = true;
};

/// Log-space forward-backward CTC over raw (unnormalized) logits.
/// Labels must lie in [0, classes) and differ from `blank`.
CtcResult ctc_loss(const Matrix& logits, std::span<const int> labels, int blank);
CtcResult ctc_loss(const Matrix& logits, std::string_view target, const Alphabet& alphabet);

/// Best path: per-frame argmax (lowest index wins ties), merge repeats, drop blanks.
std::vector<int> greedy_decode(const Matrix& logits, int blank);
Transcript greedy_decode(const Matrix& logits, const Alphabet& alphabet);

}  // namespace advstego
