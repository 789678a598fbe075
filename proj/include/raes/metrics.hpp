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
#include <cctype>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "raes/augment.hpp"
#include "raes/corpus.hpp"
#include "raes/error.hpp"
#include "raes/model.hpp"
#include "raes/rng.hpp"

namespace raes {

// Agreement and detection metrics: quadratic weighted kappa over a fixed
// scale, detection rates for prompt-swapped and span-permuted responses,
// paired significance tests across folds, and per-sentence prompt
// attention summaries.

struct RatingPairs {
  std::vector<int> human;
  std::vector<int> machine;
  ScoreScale scale;
};

/// Quadratic weighted kappa. The contingency table is indexed over the full
/// scale range so folds with unobserved categories stay comparable.
inline double qwk(const RatingPairs& pairs) {
  const std::size_t n = pairs.human.size();
  if (n == 0 || pairs.machine.size() != n) {
    throw ConfigError("qwk needs two nonempty rating vectors of equal "
                      "length, got " + std::to_string(n) + " and " +
                      std::to_string(pairs.machine.size()));
  }
  const int categories = pairs.scale.categories();
  if (categories < 2) {
    throw ConfigError("qwk needs a scale with >= 2 categories");
  }
  const std::size_t N = static_cast<std::size_t>(categories);
  auto index_of = [&](int rating) {
    if (rating < pairs.scale.min_score || rating > pairs.scale.max_score) {
      throw ValidationError("rating " + std::to_string(rating) +
                            " outside scale " +
                            std::to_string(pairs.scale.min_score) + ".." +
                            std::to_string(pairs.scale.max_score));
    }
    return static_cast<std::size_t>(rating - pairs.scale.min_score);
  };

  Matrix observed(N, N);
  std::vector<double> hist_h(N, 0.0), hist_m(N, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t i = index_of(pairs.human[s]);
    const std::size_t j = index_of(pairs.machine[s]);
    observed(i, j) += 1.0;
    hist_h[i] += 1.0;
    hist_m[j] += 1.0;
  }

  const double denom_sq = static_cast<double>((N - 1) * (N - 1));
  double weighted_o = 0.0, weighted_e = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      const double diff = static_cast<double>(i) - static_cast<double>(j);
      const double w = diff * diff / denom_sq;
      weighted_o += w * observed(i, j);
      weighted_e += w * hist_h[i] * hist_m[j] / static_cast<double>(n);
    }
  }
  if (weighted_e == 0.0) {
    throw DegenerateError("qwk undefined: expected-disagreement mass is zero");
  }
  return 1.0 - weighted_o / weighted_e;
}

inline double qwk(const std::vector<int>& human,
                  const std::vector<int>& machine, const ScoreScale& scale) {
  return qwk(RatingPairs{human, machine, scale});
}

struct DetectionOutcome {
  int total = 0;
  int detected = 0;
  int skipped = 0;  // inputs too short to build a distorted variant

  double rate() const {
    if (total <= 0) throw ConfigError("detection rate over zero samples");
    return static_cast<double>(detected) / static_cast<double>(total);
  }
};

/// Model output for one augmented sample, normalized to [0, 1] range.
using SamplePredictor = std::function<double(const AugmentedSample&)>;

/// Raw model output for one record scored with the given (possibly
/// rewritten) response text.
using RecordPredictor =
    std::function<double(const EssayRecord&, const std::string& text)>;

/// Fraction of prompt-swapped samples the model sends to the scale minimum.
inline DetectionOutcome irrelevant_detection_rate(
    const SamplePredictor& predict,
    const std::vector<AugmentedSample>& samples, const ScoreScale& scale) {
  if (samples.empty()) {
    throw ConfigError("irrelevant detection over empty sample set");
  }
  DetectionOutcome outcome;
  for (const AugmentedSample& s : samples) {
    if (s.provenance != Provenance::swapped) {
      throw ValidationError("irrelevant detection expects swapped samples, "
                            "got " + std::string(provenance_name(
                                s.provenance)));
    }
    ++outcome.total;
    if (denormalize_score(predict(s), scale) == scale.min_score) {
      ++outcome.detected;
    }
  }
  return outcome;
}

/// Fraction of records whose span-permuted variant scores strictly below the
/// original. Ties count as failures; records too short to permute are
/// skipped and counted separately.
inline DetectionOutcome distorted_detection_rate(
    const RecordPredictor& predict, const std::vector<EssayRecord>& records,
    double rate, Rng& rng) {
  if (records.empty()) {
    throw ConfigError("distorted detection over empty record set");
  }
  DetectionOutcome outcome;
  for (const EssayRecord& r : records) {
    const std::optional<std::string> distorted =
        distort_for_test(r, rate, rng);
    if (!distorted.has_value()) {
      ++outcome.skipped;
      continue;
    }
    ++outcome.total;
    if (predict(r, r.text) > predict(r, *distorted)) ++outcome.detected;
  }
  if (outcome.total == 0) {
    throw ConfigError("all records too short to distort");
  }
  return outcome;
}

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  std::size_t n = 0;
};

/// Two-sided paired t-test with n-1 degrees of freedom.
inline TTestResult paired_t_test(const std::vector<double>& a,
                                 const std::vector<double>& b) {
  const std::size_t n = a.size();
  if (n < 2 || b.size() != n) {
    throw ConfigError("paired t-test needs two vectors of equal length "
                      ">= 2, got " + std::to_string(n) + " and " +
                      std::to_string(b.size()));
  }
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i] - mean;
    var += d * d;
  }
  var /= static_cast<double>(n - 1);
  if (var == 0.0) {
    throw DegenerateError("paired t-test undefined: zero variance of "
                          "differences");
  }
  TTestResult result;
  result.n = n;
  result.t = mean / std::sqrt(var / static_cast<double>(n));
  const boost::math::students_t dist(static_cast<double>(n - 1));
  result.p = 2.0 * boost::math::cdf(boost::math::complement(
                       dist, std::abs(result.t)));
  return result;
}

/// Footnote marker for a p value: ** below 0.01, * below 0.05, and a middle
/// dot below 0.1.
inline std::string significance_marker(double p) {
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  if (p < 0.1) return "·";
  return "";
}

inline double macro_average(const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("macro average over empty list");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

/// Splits on ., ! or ? runs followed by whitespace (or end of text). Not a
/// general sentence splitter; adequate for prompt texts.
inline std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> sentences;
  std::string current;
  auto flush = [&]() {
    std::size_t lo = current.find_first_not_of(" \t\r\n");
    std::size_t hi = current.find_last_not_of(" \t\r\n");
    if (lo != std::string::npos) {
      sentences.push_back(current.substr(lo, hi - lo + 1));
    }
    current.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    current += text[i];
    if (text[i] == '.' || text[i] == '!' || text[i] == '?') {
      std::size_t j = i + 1;
      while (j < text.size() &&
             (text[j] == '.' || text[j] == '!' || text[j] == '?')) {
        current += text[j];
        ++j;
      }
      if (j >= text.size() || std::isspace(static_cast<unsigned char>(
                                  text[j]))) {
        flush();
      }
      i = j - 1;
    }
  }
  flush();
  return sentences;
}

struct SentenceScore {
  std::string sentence;
  double score = 0.0;
};

/// Per-sentence share of the response-prompt attention row for the response
/// summary position, averaged over the given responses. Scores partition
/// the attention mass, so they sum to 1.
inline std::vector<SentenceScore> attention_report(
    ModelParams& params, const Vocabulary& vocab, const EncoderConfig& config,
    const std::string& prompt_text,
    const std::vector<std::string>& responses) {
  const std::vector<std::string> sentences = split_sentences(prompt_text);
  if (sentences.empty()) {
    throw ValidationError("prompt has no sentences to report on");
  }
  if (responses.empty()) {
    throw ConfigError("attention report needs >= 1 response");
  }

  // Sentence boundaries in collapsed token positions. The tokenizer drops
  // punctuation, so per-sentence counts add up to the whole prompt.
  std::vector<std::size_t> ends;
  std::size_t cursor = 0;
  for (const std::string& s : sentences) {
    cursor += tokenize(s, vocab, Source::prompt).ids.size();
    ends.push_back(cursor);
  }

  const PromptCache prompt = encode_prompt(prompt_text, params, vocab, config);
  std::vector<double> sums(sentences.size(), 0.0);
  for (const std::string& response : responses) {
    SampleCache cache;
    forward_sample(response, prompt, params, vocab, config, &cache);
    const auto row = cache.cross_cache.A.row(0);
    std::size_t sentence = 0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j >= ends.back()) break;  // trailing window padding carries 0
      while (j >= ends[sentence]) ++sentence;
      sums[sentence] += row[j];
    }
  }

  std::vector<SentenceScore> report;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    report.push_back(
        {sentences[i], sums[i] / static_cast<double>(responses.size())});
  }
  std::stable_sort(report.begin(), report.end(),
                   [](const SentenceScore& x, const SentenceScore& y) {
                     return x.score > y.score;
                   });
  return report;
}

}  // namespace raes
