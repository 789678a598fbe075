/*
 * Copyright 2026 raes authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "raes/corpus.hpp"
#include "raes/error.hpp"
#include "raes/matrix.hpp"
#include "raes/rng.hpp"

namespace raes {

// Training-time data augmentation: pairing high-scoring essays with wrong
// prompts (teaches relevance), permuting word spans of lowest-label essays
// (teaches coherence), and a contrastive term over same-score essay pairs
// across grade levels (teaches grade awareness).

enum class Provenance { normal, swapped, distorted, swapped_distorted };

inline const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::normal:
      return "normal";
    case Provenance::swapped:
      return "swapped";
    case Provenance::distorted:
      return "distorted";
    case Provenance::swapped_distorted:
      return "swapped_distorted";
  }
  return "?";
}

inline Provenance provenance_from_name(const std::string& name) {
  if (name == "normal") return Provenance::normal;
  if (name == "swapped") return Provenance::swapped;
  if (name == "distorted") return Provenance::distorted;
  if (name == "swapped_distorted") return Provenance::swapped_distorted;
  throw ValidationError("unknown provenance '" + name + "'");
}

struct AugmentedSample {
  std::int64_t essay_id = 0;
  int base_prompt_id = 0;
  int prompt_id_used = 0;
  std::string text;
  double label = 0.0;  // normalized to [0,1]
  Provenance provenance = Provenance::normal;
  int raw_score = 0;   // of the base essay
  int grade_level = 0;
  // Distortion span in word indices, for inspection; [-1, -1) when intact.
  int distort_lo = -1;
  int distort_hi = -1;
};

struct AugmentConfig {
  int swap_count = 0;
  int distort_count = 0;
  double distort_rate = 1.0;  // test-time span fraction
  bool gm_enabled = false;

  void validate() const {
    if (swap_count < 0 || distort_count < 0) {
      throw ConfigError("augmentation counts must be >= 0");
    }
    if (distort_rate <= 0.0 || distort_rate > 1.0) {
      throw ConfigError("distort_rate must be in (0, 1]");
    }
  }
};

inline AugmentedSample make_normal_sample(const EssayRecord& record,
                                          const ScoreScale& scale) {
  AugmentedSample s;
  s.essay_id = record.essay_id;
  s.base_prompt_id = record.prompt_id;
  s.prompt_id_used = record.prompt_id;
  s.text = record.text;
  s.label = normalize_score(record.raw_score, scale);
  s.provenance = Provenance::normal;
  s.raw_score = record.raw_score;
  s.grade_level = record.grade_level;
  return s;
}

/// Mean normalized label, the eligibility threshold for prompt swapping.
inline double mean_normalized_label(const std::vector<EssayRecord>& records,
                                    const ScoreScale& scale) {
  if (records.empty()) throw ConfigError("mean over empty record list");
  double sum = 0.0;
  for (const EssayRecord& r : records) {
    sum += normalize_score(r.raw_score, scale);
  }
  return sum / static_cast<double>(records.size());
}

namespace detail {

/// k distinct indices drawn uniformly from pool (all of pool when k exceeds
/// its size), via partial Fisher-Yates.
inline std::vector<std::size_t> sample_without_replacement(
    std::vector<std::size_t> pool, std::size_t k, Rng& rng) {
  if (k > pool.size()) k = pool.size();
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j =
        i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

inline std::vector<std::string> words_of(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(text);
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

inline std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out += ' ';
    out += words[i];
  }
  return out;
}

/// Permutes words[lo, hi) in place, redrawing identity permutations up to
/// ten times. Returns false if the result still equals the input.
inline bool permute_span(std::vector<std::string>& words, std::size_t lo,
                         std::size_t hi, Rng& rng) {
  const std::vector<std::string> original(words.begin() +
                                              static_cast<std::ptrdiff_t>(lo),
                                          words.begin() +
                                              static_cast<std::ptrdiff_t>(hi));
  for (int tries = 0; tries < 10; ++tries) {
    for (std::size_t i = hi - 1; i > lo; --i) {
      const std::size_t j =
          lo + static_cast<std::size_t>(rng.below(i - lo + 1));
      std::swap(words[i], words[j]);
    }
    if (!std::equal(original.begin(), original.end(),
                    words.begin() + static_cast<std::ptrdiff_t>(lo))) {
      return true;
    }
  }
  return false;
}

}  // namespace detail

/// Appends up to k prompt-mismatched copies of eligible batch samples.
/// Eligible means normalized label strictly above score_mean; the copy gets
/// a different prompt from the group and label 0.
inline std::vector<AugmentedSample> prompt_swap(
    std::vector<AugmentedSample> batch, int k, const RubricGroup& group,
    double score_mean, Rng& rng) {
  if (group.prompt_ids.size() < 2) {
    throw NotApplicableError("prompt swap needs >= 2 prompts; group '" +
                             group.group_id + "' has " +
                             std::to_string(group.prompt_ids.size()));
  }
  if (k <= 0) return batch;

  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].provenance == Provenance::normal &&
        batch[i].label > score_mean) {
      eligible.push_back(i);
    }
  }
  const std::vector<std::size_t> chosen = detail::sample_without_replacement(
      std::move(eligible), static_cast<std::size_t>(k), rng);
  for (std::size_t index : chosen) {
    AugmentedSample copy = batch[index];
    std::vector<int> others;
    for (int pid : group.prompt_ids) {
      if (pid != copy.base_prompt_id) others.push_back(pid);
    }
    copy.prompt_id_used =
        others[static_cast<std::size_t>(rng.below(others.size()))];
    copy.label = 0.0;
    copy.provenance = Provenance::swapped;
    batch.push_back(std::move(copy));
  }
  return batch;
}

/// Appends up to k span-permuted copies of zero-label batch samples. The
/// copy keeps the source's prompt assignment and label 0; sources that came
/// from prompt swapping yield provenance swapped_distorted.
inline std::vector<AugmentedSample> response_distort(
    std::vector<AugmentedSample> batch, int k, Rng& rng) {
  if (k <= 0) return batch;
  std::vector<std::size_t> sources;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].label == 0.0) sources.push_back(i);
  }
  const std::vector<std::size_t> chosen = detail::sample_without_replacement(
      std::move(sources), static_cast<std::size_t>(k), rng);
  for (std::size_t index : chosen) {
    const AugmentedSample& src = batch[index];
    std::vector<std::string> words = detail::words_of(src.text);
    const std::size_t w = words.size();
    if (w < 2) continue;
    std::size_t lo = 0, hi = 0;
    do {
      lo = static_cast<std::size_t>(rng.below(w + 1));
      hi = static_cast<std::size_t>(rng.below(w + 1));
      if (lo > hi) std::swap(lo, hi);
    } while (hi - lo < 2);
    if (!detail::permute_span(words, lo, hi, rng)) continue;

    AugmentedSample copy = src;
    copy.text = detail::join_words(words);
    copy.label = 0.0;
    copy.provenance = src.provenance == Provenance::swapped
                          ? Provenance::swapped_distorted
                          : Provenance::distorted;
    copy.distort_lo = static_cast<int>(lo);
    copy.distort_hi = static_cast<int>(hi);
    batch.push_back(std::move(copy));
  }
  return batch;
}

/// Test-time distortion: permutes one contiguous span covering round(rate*w)
/// words at a uniform start. Returns nothing when the text is too short to
/// change (the caller counts skips).
inline std::optional<std::string> distort_for_test(const EssayRecord& record,
                                                   double rate, Rng& rng) {
  if (rate <= 0.0 || rate > 1.0) {
    throw ConfigError("distort rate must be in (0, 1]");
  }
  std::vector<std::string> words = detail::words_of(record.text);
  const std::size_t w = words.size();
  if (w < 2) return std::nullopt;
  const std::size_t span = static_cast<std::size_t>(
      std::lround(rate * static_cast<double>(w)));
  if (span < 2) return std::nullopt;
  const std::size_t start =
      static_cast<std::size_t>(rng.below(w - span + 1));
  if (!detail::permute_span(words, start, start + span, rng)) {
    return std::nullopt;
  }
  return detail::join_words(words);
}

/// Result of enriching a batch with contrastive pairs.
struct GradeMatchBatch {
  std::vector<AugmentedSample> batch;
  int added = 0;  // the k of the composite loss
};

/// For each non-swapped batch item, draws one positive (same score, same
/// grade) and one negative (same score different grade, or same grade
/// different score) from the pool, excluding essays already in the batch.
/// Items without a qualifying candidate simply contribute no pair. The
/// drawn partners are appended after the original items; they exist for the
/// contrastive pair sums and carry no squared-error weight of their own.
inline GradeMatchBatch grade_match_pairs(std::vector<AugmentedSample> batch,
                                         const std::vector<EssayRecord>& pool,
                                         const ScoreScale& scale, Rng& rng) {
  std::vector<std::int64_t> batch_ids;
  for (const AugmentedSample& s : batch) batch_ids.push_back(s.essay_id);
  auto in_batch = [&](std::int64_t id) {
    return std::find(batch_ids.begin(), batch_ids.end(), id) !=
           batch_ids.end();
  };

  GradeMatchBatch out;
  const std::size_t original = batch.size();
  for (std::size_t i = 0; i < original; ++i) {
    const AugmentedSample& item = batch[i];
    if (item.provenance != Provenance::normal) continue;
    std::vector<std::size_t> positives, negatives;
    for (std::size_t p = 0; p < pool.size(); ++p) {
      const EssayRecord& cand = pool[p];
      if (in_batch(cand.essay_id)) continue;
      const bool same_score = cand.raw_score == item.raw_score;
      const bool same_grade = cand.grade_level == item.grade_level;
      if (same_score && same_grade) positives.push_back(p);
      if ((same_score && !same_grade) || (!same_score && same_grade)) {
        negatives.push_back(p);
      }
    }
    if (!positives.empty()) {
      const EssayRecord& cand =
          pool[positives[static_cast<std::size_t>(rng.below(positives.size()))]];
      batch.push_back(make_normal_sample(cand, scale));
      ++out.added;
    }
    if (!negatives.empty()) {
      const EssayRecord& cand =
          pool[negatives[static_cast<std::size_t>(rng.below(negatives.size()))]];
      batch.push_back(make_normal_sample(cand, scale));
      ++out.added;
    }
  }
  out.batch = std::move(batch);
  return out;
}

/// Pair sums of the contrastive objective over unordered distinct pairs.
/// c_s: same grade and same score. c_d: same score with different grade,
/// plus same grade with different score.
struct GradeMatchTerms {
  double c_s = 0.0;
  double c_d = 0.0;
  int pairs_s = 0;
  int pairs_d = 0;
};

inline GradeMatchTerms grade_match_terms(const Matrix& Z,
                                         const std::vector<int>& scores,
                                         const std::vector<int>& grades) {
  const std::size_t b = Z.rows();
  if (scores.size() != b || grades.size() != b) {
    throw ShapeError("grade match: " + std::to_string(b) + " rows vs " +
                     std::to_string(scores.size()) + " scores, " +
                     std::to_string(grades.size()) + " grades");
  }
  GradeMatchTerms terms;
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = i + 1; j < b; ++j) {
      const bool same_score = scores[i] == scores[j];
      const bool same_grade = grades[i] == grades[j];
      if (same_score && same_grade) {
        terms.c_s += cosine(Z.row(i), Z.row(j));
        ++terms.pairs_s;
      } else if (same_score != same_grade) {
        terms.c_d += cosine(Z.row(i), Z.row(j));
        ++terms.pairs_d;
      }
    }
  }
  return terms;
}

/// Composite loss: base MSE minus (c_s - c_d) scaled by the augmentation
/// sample count k.
inline double grade_match_loss(const Matrix& Z, const std::vector<int>& scores,
                               const std::vector<int>& grades, int k,
                               double base_mse) {
  if (k <= 0) throw ConfigError("grade match k must be > 0");
  const GradeMatchTerms terms = grade_match_terms(Z, scores, grades);
  return base_mse - (terms.c_s - terms.c_d) / static_cast<double>(k);
}

/// Gradient of -(c_s - c_d)/k with respect to each row of Z.
inline Matrix grade_match_backward(const Matrix& Z,
                                   const std::vector<int>& scores,
                                   const std::vector<int>& grades, int k) {
  if (k <= 0) throw ConfigError("grade match k must be > 0");
  const std::size_t b = Z.rows();
  const std::size_t d = Z.cols();
  Matrix dZ(b, d);
  auto add_pair_grad = [&](std::size_t i, std::size_t j, double sign) {
    const auto zi = Z.row(i);
    const auto zj = Z.row(j);
    const double ni = norm(zi);
    const double nj = norm(zj);
    const double cos_ij = cosine(zi, zj);
    // d cos(u,v)/du = v/(|u||v|) - cos * u/|u|^2
    const double coeff = -sign / static_cast<double>(k);
    for (std::size_t c = 0; c < d; ++c) {
      dZ(i, c) += coeff * (zj[c] / (ni * nj) - cos_ij * zi[c] / (ni * ni));
      dZ(j, c) += coeff * (zi[c] / (ni * nj) - cos_ij * zj[c] / (nj * nj));
    }
  };
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = i + 1; j < b; ++j) {
      const bool same_score = scores[i] == scores[j];
      const bool same_grade = grades[i] == grades[j];
      if (same_score && same_grade) {
        add_pair_grad(i, j, +1.0);
      } else if (same_score != same_grade) {
        add_pair_grad(i, j, -1.0);
      }
    }
  }
  return dZ;
}

}  // namespace raes
