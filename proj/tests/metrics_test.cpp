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

#include "raes/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace raes {
namespace {

// Direct-summation kappa: recounts every contingency cell by scanning the
// rating vectors, no shared code with the library implementation.
std::optional<double> oracle_qwk(const std::vector<int>& h,
                                 const std::vector<int>& m, int min_score,
                                 int max_score) {
  const int N = max_score - min_score + 1;
  const double n = static_cast<double>(h.size());
  double num = 0.0, den = 0.0;
  for (int a = 0; a < N; ++a) {
    for (int b = 0; b < N; ++b) {
      double o_ab = 0.0, h_a = 0.0, m_b = 0.0;
      for (std::size_t s = 0; s < h.size(); ++s) {
        if (h[s] - min_score == a && m[s] - min_score == b) o_ab += 1.0;
        if (h[s] - min_score == a) h_a += 1.0;
        if (m[s] - min_score == b) m_b += 1.0;
      }
      const double w = static_cast<double>((a - b) * (a - b)) /
                       static_cast<double>((N - 1) * (N - 1));
      num += w * o_ab;
      den += w * h_a * m_b / n;
    }
  }
  if (den == 0.0) return std::nullopt;
  return 1.0 - num / den;
}

TEST(Qwk, PerfectAgreementIsOne) {
  const ScoreScale scale = scale_for_prompt(3);
  const std::vector<int> a = {0, 1, 2, 3, 1, 2};
  EXPECT_DOUBLE_EQ(qwk(a, a, scale), 1.0);
}

TEST(Qwk, PerfectReversalIsMinusOne) {
  const ScoreScale scale = scale_for_prompt(3);
  const std::vector<int> h = {0, 1, 2, 3};
  const std::vector<int> m = {3, 2, 1, 0};
  EXPECT_NEAR(qwk(h, m, scale), -1.0, 1e-12);
  EXPECT_NEAR(qwk(h, m, scale), *oracle_qwk(h, m, 0, 3), 1e-12);
}

TEST(Qwk, MatchesDirectSummationOracleOnRandomVectors) {
  const ScoreScale scale = scale_for_prompt(1);  // 2..12
  Rng rng(2024);
  int compared = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(39);
    std::vector<int> h(n), m(n);
    for (std::size_t i = 0; i < n; ++i) {
      h[i] = rng.range(scale.min_score, scale.max_score);
      m[i] = rng.range(scale.min_score, scale.max_score);
    }
    const auto want = oracle_qwk(h, m, scale.min_score, scale.max_score);
    if (!want.has_value()) {
      EXPECT_THROW(qwk(h, m, scale), DegenerateError);
      continue;
    }
    EXPECT_NEAR(qwk(h, m, scale), *want, 1e-12);
    ++compared;
  }
  EXPECT_GT(compared, 900);
}

TEST(Qwk, IndependentRatingsScoreNearZero) {
  const ScoreScale scale = scale_for_prompt(3);
  Rng rng(12345);
  const std::size_t n = 10000;
  std::vector<int> h(n), m(n);
  for (std::size_t i = 0; i < n; ++i) {
    h[i] = rng.range(0, 3);
    m[i] = rng.range(0, 3);
  }
  EXPECT_LT(std::abs(qwk(h, m, scale)), 0.05);
}

TEST(Qwk, SymmetricInItsArguments) {
  const ScoreScale scale = scale_for_prompt(5);
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3 + rng.below(20);
    std::vector<int> h(n), m(n);
    for (std::size_t i = 0; i < n; ++i) {
      h[i] = rng.range(0, 4);
      m[i] = rng.range(0, 4);
    }
    try {
      const double forward = qwk(h, m, scale);
      EXPECT_NEAR(forward, qwk(m, h, scale), 1e-12);
    } catch (const DegenerateError&) {
    }
  }
}

TEST(Qwk, InvariantUnderOrderReversingRelabelOfBothVectors) {
  const ScoreScale scale = scale_for_prompt(7);  // 0..30
  Rng rng(88);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 4 + rng.below(30);
    std::vector<int> h(n), m(n), rh(n), rm(n);
    for (std::size_t i = 0; i < n; ++i) {
      h[i] = rng.range(scale.min_score, scale.max_score);
      m[i] = rng.range(scale.min_score, scale.max_score);
      rh[i] = scale.min_score + scale.max_score - h[i];
      rm[i] = scale.min_score + scale.max_score - m[i];
    }
    try {
      EXPECT_NEAR(qwk(h, m, scale), qwk(rh, rm, scale), 1e-12);
    } catch (const DegenerateError&) {
    }
  }
}

TEST(Qwk, RejectsBadInput) {
  const ScoreScale scale = scale_for_prompt(3);
  EXPECT_THROW(qwk({}, {}, scale), ConfigError);
  EXPECT_THROW(qwk({1, 2}, {1}, scale), ConfigError);
  EXPECT_THROW(qwk({1, 4}, {1, 2}, scale), ValidationError);
  // Both raters constant and equal: no expected disagreement mass.
  EXPECT_THROW(qwk({2, 2, 2}, {2, 2, 2}, scale), DegenerateError);
}

AugmentedSample swapped_sample(std::int64_t id) {
  AugmentedSample s;
  s.essay_id = id;
  s.base_prompt_id = 3;
  s.prompt_id_used = 4;
  s.text = "text";
  s.label = 0.0;
  s.provenance = Provenance::swapped;
  return s;
}

TEST(IrrelevantDetection, ConstantMinimumPredictorDetectsEverything) {
  const ScoreScale scale = scale_for_prompt(3);
  std::vector<AugmentedSample> samples = {swapped_sample(1),
                                          swapped_sample(2)};
  const auto all = irrelevant_detection_rate(
      [](const AugmentedSample&) { return 0.0; }, samples, scale);
  EXPECT_EQ(all.total, 2);
  EXPECT_DOUBLE_EQ(all.rate(), 1.0);
  const auto none = irrelevant_detection_rate(
      [](const AugmentedSample&) { return 1.0; }, samples, scale);
  EXPECT_DOUBLE_EQ(none.rate(), 0.0);
}

TEST(IrrelevantDetection, CountsOnlyExactScaleMinimum) {
  const ScoreScale scale = scale_for_prompt(3);  // 0..3, bins of 1/3
  std::vector<AugmentedSample> samples = {swapped_sample(1),
                                          swapped_sample(2),
                                          swapped_sample(3)};
  int call = 0;
  const std::vector<double> preds = {0.1, 0.2, 0.9};  // rounds to 0, 1, 3
  const auto outcome = irrelevant_detection_rate(
      [&](const AugmentedSample&) { return preds[call++]; }, samples, scale);
  EXPECT_EQ(outcome.detected, 1);
  EXPECT_EQ(outcome.total, 3);
}

TEST(IrrelevantDetection, RejectsEmptyAndWrongProvenance) {
  const ScoreScale scale = scale_for_prompt(3);
  EXPECT_THROW(irrelevant_detection_rate(
                   [](const AugmentedSample&) { return 0.0; }, {}, scale),
               ConfigError);
  AugmentedSample normal = swapped_sample(1);
  normal.provenance = Provenance::normal;
  EXPECT_THROW(irrelevant_detection_rate(
                   [](const AugmentedSample&) { return 0.0; }, {normal},
                   scale),
               ValidationError);
  DetectionOutcome empty;
  EXPECT_THROW(empty.rate(), ConfigError);
}

EssayRecord record_with_text(std::int64_t id, std::string text) {
  EssayRecord r;
  r.essay_id = id;
  r.prompt_id = 3;
  r.text = std::move(text);
  r.raw_score = 2;
  r.grade_level = 10;
  r.genre = Genre::RES;
  return r;
}

TEST(DistortedDetection, ConstantPredictorFailsAllTies) {
  const std::vector<EssayRecord> records = {
      record_with_text(1, "a b c d e f"),
      record_with_text(2, "g h i j k l"),
  };
  Rng rng(5);
  const auto outcome = distorted_detection_rate(
      [](const EssayRecord&, const std::string&) { return 0.5; }, records,
      1.0, rng);
  EXPECT_EQ(outcome.total, 2);
  EXPECT_DOUBLE_EQ(outcome.rate(), 0.0);
}

TEST(DistortedDetection, OrderSensitivePredictorDetectsEverything) {
  const std::vector<EssayRecord> records = {
      record_with_text(1, "a b c d e f"),
      record_with_text(2, "g h i j k l"),
      record_with_text(3, "m n o p q r"),
  };
  Rng rng(7);
  const auto outcome = distorted_detection_rate(
      [](const EssayRecord& r, const std::string& text) {
        return text == r.text ? 1.0 : 0.0;
      },
      records, 1.0, rng);
  EXPECT_EQ(outcome.total, 3);
  EXPECT_DOUBLE_EQ(outcome.rate(), 1.0);
}

TEST(DistortedDetection, ShortRecordsAreSkippedNotFailed) {
  const std::vector<EssayRecord> records = {
      record_with_text(1, "a b c d e f"),
      record_with_text(2, "single"),
  };
  Rng rng(9);
  const auto outcome = distorted_detection_rate(
      [](const EssayRecord& r, const std::string& text) {
        return text == r.text ? 1.0 : 0.0;
      },
      records, 1.0, rng);
  EXPECT_EQ(outcome.total, 1);
  EXPECT_EQ(outcome.skipped, 1);
}

TEST(DistortedDetection, AllTooShortIsAConfigError) {
  const std::vector<EssayRecord> records = {record_with_text(1, "one")};
  Rng rng(11);
  EXPECT_THROW(distorted_detection_rate(
                   [](const EssayRecord&, const std::string&) { return 0.0; },
                   records, 1.0, rng),
               ConfigError);
}

TEST(DistortedDetection, DeterministicGivenSeed) {
  std::vector<EssayRecord> records;
  for (int i = 0; i < 10; ++i) {
    records.push_back(record_with_text(
        i, "w0 w1 w2 w3 w4 w5 w6 w7 w" + std::to_string(i + 8)));
  }
  auto predict = [](const EssayRecord& r, const std::string& text) {
    // Arbitrary text-sensitive score.
    double acc = 0.0;
    for (char c : text) acc += c * 0.01;
    return acc - r.text.size() * 0.001;
  };
  Rng rng_a(13), rng_b(13);
  const auto a = distorted_detection_rate(predict, records, 0.5, rng_a);
  const auto b = distorted_detection_rate(predict, records, 0.5, rng_b);
  EXPECT_EQ(a.detected, b.detected);
  EXPECT_EQ(a.total, b.total);
}

// Expected values frozen from an independent statistics package.
struct TFixture {
  std::vector<double> a, b;
  double t, p;
  const char* marker;
};

TEST(PairedTTest, MatchesFrozenReferenceValues) {
  const std::vector<TFixture> fixtures = {
      {{0.72, 0.68, 0.75, 0.70, 0.71},
       {0.65, 0.60, 0.69, 0.66, 0.64},
       9.4362851939133918, 0.00070325280940990316, "**"},
      {{0.80, 0.74, 0.78, 0.81, 0.77},
       {0.76, 0.72, 0.74, 0.79, 0.74},
       6.7082039324993694, 0.0025702607653999305, "**"},
      {{0.70, 0.66, 0.73, 0.69, 0.72},
       {0.67, 0.65, 0.69, 0.68, 0.68},
       3.8334908600273168, 0.018562564501560606, "*"},
      {{0.70, 0.66, 0.73, 0.652, 0.72},
       {0.67, 0.65, 0.69, 0.650, 0.68},
       3.114921819247809, 0.035701467939068567, "*"},
      {{0.70, 0.66, 0.73, 0.645, 0.72},
       {0.67, 0.65, 0.69, 0.655, 0.68},
       2.2691267417693441, 0.085810378440044424, "·"},
      {{0.72, 0.68, 0.75, 0.70, 0.71},
       {0.70, 0.69, 0.72, 0.68, 0.70},
       2.0641873861685673, 0.1079388222922756, ""},
      {{0.5, 0.6, 0.4, 0.7, 0.55},
       {0.52, 0.58, 0.45, 0.66, 0.56},
       -0.25503068522533645, 0.81127526924115034, ""},
      {{1.0, 2.0}, {0.5, 1.8}, 2.333333333333333, 0.25776211681831313, ""},
  };
  for (const TFixture& f : fixtures) {
    const TTestResult r = paired_t_test(f.a, f.b);
    EXPECT_NEAR(r.t, f.t, 1e-12);
    EXPECT_NEAR(r.p, f.p, 1e-12);
    EXPECT_EQ(significance_marker(r.p), f.marker);
    EXPECT_EQ(r.n, f.a.size());
  }
}

TEST(PairedTTest, MatchesHandFormulaOnToyVectors) {
  const std::vector<double> a = {1.0, 2.0, 3.0, 4.0, 5.0};
  const std::vector<double> b = {0.9, 2.2, 2.7, 4.1, 4.5};
  std::vector<double> d(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d[i] = a[i] - b[i];
    mean += d[i];
  }
  mean /= 5.0;
  double sd = 0.0;
  for (double x : d) sd += (x - mean) * (x - mean);
  sd = std::sqrt(sd / 4.0);
  const double want_t = mean / (sd / std::sqrt(5.0));
  EXPECT_NEAR(paired_t_test(a, b).t, want_t, 1e-12);
}

TEST(PairedTTest, DegenerateAndInvalidInputs) {
  const std::vector<double> a = {0.5, 0.6, 0.7};
  EXPECT_THROW(paired_t_test(a, a), DegenerateError);
  // Constant shift: zero variance of differences.
  EXPECT_THROW(paired_t_test(a, {0.4, 0.5, 0.6}), DegenerateError);
  EXPECT_THROW(paired_t_test(a, {0.5, 0.6}), ConfigError);
  EXPECT_THROW(paired_t_test({1.0}, {2.0}), ConfigError);
}

TEST(SignificanceMarker, ThresholdsAreHalfOpen) {
  EXPECT_EQ(significance_marker(0.001), "**");
  EXPECT_EQ(significance_marker(0.01), "*");
  EXPECT_EQ(significance_marker(0.049), "*");
  EXPECT_EQ(significance_marker(0.05), "·");
  EXPECT_EQ(significance_marker(0.099), "·");
  EXPECT_EQ(significance_marker(0.1), "");
  EXPECT_EQ(significance_marker(0.9), "");
}

TEST(MacroAverage, MeansValuesAndRejectsEmpty) {
  EXPECT_DOUBLE_EQ(macro_average({0.2, 0.4, 0.9}), 0.5);
  EXPECT_THROW(macro_average({}), ConfigError);
}

TEST(SplitSentences, HandlesTerminatorsAndRuns) {
  const auto simple = split_sentences("one two. three! four?");
  ASSERT_EQ(simple.size(), 3u);
  EXPECT_EQ(simple[0], "one two.");
  EXPECT_EQ(simple[1], "three!");
  EXPECT_EQ(simple[2], "four?");
  const auto unterminated = split_sentences("no terminal punctuation");
  ASSERT_EQ(unterminated.size(), 1u);
  const auto runs = split_sentences("wait... really?! yes");
  ASSERT_EQ(runs.size(), 3u);
  EXPECT_EQ(runs[0], "wait...");
  EXPECT_EQ(runs[1], "really?!");
  EXPECT_TRUE(split_sentences("   ").empty());
}

struct ReportFixture {
  Vocabulary vocab;
  EncoderConfig config;
  ModelParams params;

  ReportFixture(std::size_t d, int k_max, std::size_t window_len,
                const std::vector<std::string>& texts, std::uint64_t seed)
      : params(build_vocab(texts), d, k_max) {
    config.window_len = window_len;
    config.embed_dim = d;
    Rng rng(seed);
    params.init(rng);
  }

  int build_vocab(const std::vector<std::string>& texts) {
    for (const std::string& t : texts) {
      for (const std::string& w : split_tokens(t)) vocab.add(w);
    }
    return vocab.size();
  }
};

TEST(AttentionReport, SingleSentencePromptGetsFullMass) {
  const std::string prompt = "explain the main idea.";
  const std::vector<std::string> responses = {"the idea is explained here"};
  ReportFixture f(6, 4, 5, {prompt, responses[0]}, 3);
  const auto report =
      attention_report(f.params, f.vocab, f.config, prompt, responses);
  ASSERT_EQ(report.size(), 1u);
  EXPECT_EQ(report[0].sentence, "explain the main idea.");
  EXPECT_NEAR(report[0].score, 1.0, 1e-9);
}

TEST(AttentionReport, ScoresPartitionTheAttentionRow) {
  const std::string prompt =
      "read the passage carefully. think about the key ideas. write what "
      "you learned!";
  const std::vector<std::string> responses = {
      "i learned about the passage",
      "the key ideas were hard",
  };
  ReportFixture f(8, 6, 4, {prompt, responses[0], responses[1]}, 11);
  const auto report =
      attention_report(f.params, f.vocab, f.config, prompt, responses);
  ASSERT_EQ(report.size(), 3u);
  double total = 0.0;
  for (const auto& row : report) total += row.score;
  EXPECT_NEAR(total, 1.0, 1e-9);
  EXPECT_GE(report[0].score, report[1].score);
  EXPECT_GE(report[1].score, report[2].score);
}

TEST(AttentionReport, UniformAttentionScoresByTokenShare) {
  const std::string prompt = "aa bb. cc dd ee f1.";
  const std::vector<std::string> responses = {"aa cc words"};
  ReportFixture f(6, 4, 3, {prompt, responses[0]}, 17);
  // Zero query projection: every cross-attention logit collapses to 0 and
  // the row is uniform over real prompt tokens.
  for (std::size_t i = 0; i < f.params.cross_attn.wq.value.data().size();
       ++i) {
    f.params.cross_attn.wq.value[i] = 0.0;
  }
  const auto report =
      attention_report(f.params, f.vocab, f.config, prompt, responses);
  ASSERT_EQ(report.size(), 2u);
  // 6 tokens total: 4 in one sentence, 2 in the other.
  EXPECT_EQ(report[0].sentence, "cc dd ee f1.");
  EXPECT_NEAR(report[0].score, 4.0 / 6.0, 1e-9);
  EXPECT_NEAR(report[1].score, 2.0 / 6.0, 1e-9);
}

TEST(AttentionReport, RejectsEmptyInputs) {
  const std::string prompt = "a prompt sentence.";
  ReportFixture f(4, 3, 4, {prompt, "a response"}, 5);
  EXPECT_THROW(attention_report(f.params, f.vocab, f.config, prompt, {}),
               ConfigError);
  EXPECT_THROW(
      attention_report(f.params, f.vocab, f.config, "  ", {"a response"}),
      ValidationError);
}

}  // namespace
}  // namespace raes
