#include "advstego/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "advstego/error.hpp"

namespace advstego {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace

Alphabet::Alphabet() : symbols_("abcdefghijklmnopqrstuvwxyz ") {}

Alphabet::Alphabet(std::string symbols) : symbols_(std::move(symbols)) {
  if (symbols_.empty()) throw AlphabetError("alphabet must not be empty");
  std::string sorted = symbols_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw AlphabetError("alphabet symbols must be unique");
  }
}

bool Alphabet::contains(char c) const noexcept { return symbols_.find(c) != std::string::npos; }

int Alphabet::index_of(char c) const {
  const auto pos = symbols_.find(c);
  if (pos == std::string::npos) throw AlphabetError(std::string("character '") + c + "' is not in the alphabet");
  return static_cast<int>(pos);
}

char Alphabet::symbol(int index) const {
  if (index < 0 || index >= blank()) throw AlphabetError("label index out of range");
  return symbols_[static_cast<std::size_t>(index)];
}

std::vector<int> Alphabet::encode(std::string_view text) const {
  std::vector<int> labels;
  labels.reserve(text.size());
  for (char c : text) labels.push_back(index_of(c));
  return labels;
}

Transcript Alphabet::decode(std::span<const int> labels) const {
  Transcript out;
  out.reserve(labels.size());
  for (int l : labels) out.push_back(symbol(l));
  return out;
}

std::size_t ctc_min_frames(std::span<const int> labels) {
  std::size_t n = labels.size();
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (labels[i] == labels[i - 1]) ++n;
  }
  return n;
}

CtcResult ctc_loss(const Matrix& logits, std::span<const int> labels, int blank) {
  const Eigen::Index frames = logits.rows();
  const Eigen::Index classes = logits.cols();
  if (frames < 1) throw ShapeError("CTC needs at least one frame");
  if (blank < 0 || blank >= classes) throw InvalidArgument("blank index out of range");
  for (int l : labels) {
    if (l < 0 || l >= classes || l == blank) throw AlphabetError("target label out of range or equal to blank");
  }
  if (!logits.allFinite()) throw InvalidArgument("CTC logits must be finite");

  CtcResult result;
  if (static_cast<std::size_t>(frames) < ctc_min_frames(labels)) {
    result.loss = std::numeric_limits<double>::infinity();
    result.grad = Matrix::Zero(frames, classes);
    result.feasible = false;
    return result;
  }

  // Row-wise log-softmax.
  Matrix log_probs(frames, classes);
  for (Eigen::Index t = 0; t < frames; ++t) {
    const double m = logits.row(t).maxCoeff();
    const double lse = m + std::log((logits.row(t).array() - m).exp().sum());
    log_probs.row(t) = logits.row(t).array() - lse;
  }

  // Blank-interleaved extended target.
  const auto states = static_cast<Eigen::Index>(2 * labels.size() + 1);
  std::vector<int> ext(static_cast<std::size_t>(states), blank);
  for (std::size_t i = 0; i < labels.size(); ++i) ext[2 * i + 1] = labels[i];
  auto can_skip = [&](Eigen::Index s) {  // transition s-2 -> s allowed
    return s >= 2 && ext[static_cast<std::size_t>(s)] != blank &&
           ext[static_cast<std::size_t>(s)] != ext[static_cast<std::size_t>(s - 2)];
  };
  auto lp = [&](Eigen::Index t, Eigen::Index s) { return log_probs(t, ext[static_cast<std::size_t>(s)]); };

  // alpha includes the emission at t; beta covers frames t+1..T-1 only.
  Matrix alpha = Matrix::Constant(frames, states, kNegInf);
  Matrix beta = Matrix::Constant(frames, states, kNegInf);
  alpha(0, 0) = lp(0, 0);
  if (states > 1) alpha(0, 1) = lp(0, 1);
  for (Eigen::Index t = 1; t < frames; ++t) {
    for (Eigen::Index s = 0; s < states; ++s) {
      double a = alpha(t - 1, s);
      if (s >= 1) a = log_add(a, alpha(t - 1, s - 1));
      if (can_skip(s)) a = log_add(a, alpha(t - 1, s - 2));
      alpha(t, s) = a == kNegInf ? kNegInf : a + lp(t, s);
    }
  }
  beta(frames - 1, states - 1) = 0.0;
  if (states > 1) beta(frames - 1, states - 2) = 0.0;
  for (Eigen::Index t = frames - 2; t >= 0; --t) {
    for (Eigen::Index s = 0; s < states; ++s) {
      double b = beta(t + 1, s) + lp(t + 1, s);
      if (s + 1 < states) b = log_add(b, beta(t + 1, s + 1) + lp(t + 1, s + 1));
      if (s + 2 < states && can_skip(s + 2)) b = log_add(b, beta(t + 1, s + 2) + lp(t + 1, s + 2));
      beta(t, s) = b;
    }
  }

  double log_p = alpha(frames - 1, states - 1);
  if (states > 1) log_p = log_add(log_p, alpha(frames - 1, states - 2));
  result.loss = -log_p;

  result.grad = log_probs.array().exp();
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index s = 0; s < states; ++s) {
      const double lg = alpha(t, s) + beta(t, s);
      if (lg == kNegInf) continue;
      result.grad(t, ext[static_cast<std::size_t>(s)]) -= std::exp(lg - log_p);
    }
  }
  return result;
}

CtcResult ctc_loss(const Matrix& logits, std::string_view target, const Alphabet& alphabet) {
  if (logits.cols() != alphabet.num_classes()) {
    throw ShapeError("logit width " + std::to_string(logits.cols()) + " does not match alphabet classes " +
                     std::to_string(alphabet.num_classes()));
  }
  const auto labels = alphabet.encode(target);
  return ctc_loss(logits, labels, alphabet.blank());
}

std::vector<int> greedy_decode(const Matrix& logits, int blank) {
  std::vector<int> out;
  int previous = -1;
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < logits.cols(); ++k) {
      if (logits(t, k) > logits(t, best)) best = k;
    }
    const int label = static_cast<int>(best);
    if (label != previous && label != blank) out.push_back(label);
    previous = label;
  }
  return out;
}

Transcript greedy_decode(const Matrix& logits, const Alphabet& alphabet) {
  if (logits.cols() != alphabet.num_classes()) throw ShapeError("logit width does not match alphabet");
  return alphabet.decode(greedy_decode(logits, alphabet.blank()));
}

}  // namespace advstego
