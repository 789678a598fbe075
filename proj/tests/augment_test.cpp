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

#include "raes/augment.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "raes/grad_check.hpp"
#include "raes/param.hpp"

namespace raes {
namespace {

EssayRecord make_record(std::int64_t id, int prompt_id, std::string text,
                        int raw_score, int grade) {
  EssayRecord r;
  r.essay_id = id;
  r.prompt_id = prompt_id;
  r.text = std::move(text);
  r.raw_score = raw_score;
  r.grade_level = grade;
  r.genre = prompt_info(prompt_id).genre;
  return r;
}

std::vector<std::string> words_of(const std::string& text) {
  std::vector<std::string> out;
  std::string w;
  for (char c : text) {
    if (c == ' ') {
      if (!w.empty()) out.push_back(w);
      w.clear();
    } else {
      w += c;
    }
  }
  if (!w.empty()) out.push_back(w);
  return out;
}

TEST(AugmentConfig, RejectsBadValues) {
  AugmentConfig c;
  c.swap_count = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = AugmentConfig{};
  c.distort_rate = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.distort_rate = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c.distort_rate = 1.0;
  EXPECT_NO_THROW(c.validate());
}

TEST(MeanLabel, AveragesNormalizedScores) {
  const ScoreScale scale = scale_for_prompt(3);  // 0..3
  std::vector<EssayRecord> records = {
      make_record(1, 3, "a", 0, 10),
      make_record(2, 3, "b", 3, 10),
  };
  EXPECT_DOUBLE_EQ(mean_normalized_label(records, scale), 0.5);
  EXPECT_THROW(mean_normalized_label({}, scale), ConfigError);
}

TEST(PromptSwap, HighScoringEssayMovesToOtherPromptWithZeroLabel) {
  const ScoreScale scale = scale_for_prompt(4);
  std::vector<AugmentedSample> batch = {
      make_normal_sample(make_record(4, 4, "the essay text", 3, 10), scale),
  };
  Rng rng(7);
  const auto out =
      prompt_swap(std::move(batch), 1, group_by_id("3-4"), 0.5, rng);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[1].essay_id, 4);
  EXPECT_EQ(out[1].base_prompt_id, 4);
  EXPECT_EQ(out[1].prompt_id_used, 3);
  EXPECT_DOUBLE_EQ(out[1].label, 0.0);
  EXPECT_EQ(out[1].provenance, Provenance::swapped);
  EXPECT_EQ(out[1].text, "the essay text");
  // The original stays untouched.
  EXPECT_EQ(out[0].prompt_id_used, 4);
  EXPECT_DOUBLE_EQ(out[0].label, 1.0);
}

TEST(PromptSwap, SingletonGroupIsNotApplicable) {
  const ScoreScale scale = scale_for_prompt(7);
  std::vector<AugmentedSample> batch = {
      make_normal_sample(make_record(1, 7, "text", 25, 7), scale),
  };
  Rng rng(1);
  EXPECT_THROW(prompt_swap(std::move(batch), 1, group_by_id("7"), 0.1, rng),
               NotApplicableError);
}

TEST(PromptSwap, NoEligibleOrZeroCountLeavesBatchUnchanged) {
  const ScoreScale scale = scale_for_prompt(3);
  std::vector<AugmentedSample> batch = {
      make_normal_sample(make_record(1, 3, "low", 1, 10), scale),
      make_normal_sample(make_record(2, 3, "low too", 1, 10), scale),
  };
  Rng rng(3);
  auto same = prompt_swap(batch, 1, group_by_id("3-4"), 0.9, rng);
  EXPECT_EQ(same.size(), 2u);
  same = prompt_swap(batch, 0, group_by_id("3-4"), 0.0, rng);
  EXPECT_EQ(same.size(), 2u);
}

TEST(PromptSwap, TakesAllEligibleWhenCountExceedsThem) {
  const ScoreScale scale = scale_for_prompt(5);  // 0..4
  std::vector<AugmentedSample> batch;
  for (int i = 0; i < 6; ++i) {
    batch.push_back(make_normal_sample(
        make_record(i + 1, 5, "text " + std::to_string(i), i % 5, 8), scale));
  }
  Rng rng(11);
  const auto out = prompt_swap(std::move(batch), 100, group_by_id("5-6"),
                               0.5, rng);
  // Labels above 0.5 are 0.75 (score 3) and 1.0 (score 4): two essays.
  EXPECT_EQ(out.size(), 8u);
  for (std::size_t i = 6; i < out.size(); ++i) {
    EXPECT_EQ(out[i].provenance, Provenance::swapped);
    EXPECT_EQ(out[i].prompt_id_used, 6);
    EXPECT_DOUBLE_EQ(out[i].label, 0.0);
  }
}

TEST(PromptSwap, PropertyEveryAppendedSampleIsEligibleAndMismatched) {
  const ScoreScale scale = scale_for_prompt(6);
  const RubricGroup group = group_by_id("5-6");
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<AugmentedSample> batch;
    std::vector<EssayRecord> records;
    const int n = 4 + static_cast<int>(rng.below(8));
    for (int i = 0; i < n; ++i) {
      const int pid = rng.below(2) == 0 ? 5 : 6;
      records.push_back(make_record(trial * 100 + i, pid, "w",
                                    static_cast<int>(rng.below(5)), 8));
      batch.push_back(make_normal_sample(records.back(), scale));
    }
    const double mean = mean_normalized_label(records, scale);
    const std::size_t before = batch.size();
    const auto out = prompt_swap(std::move(batch), 3, group, mean, rng);
    for (std::size_t i = before; i < out.size(); ++i) {
      EXPECT_EQ(out[i].provenance, Provenance::swapped);
      EXPECT_NE(out[i].prompt_id_used, out[i].base_prompt_id);
      EXPECT_TRUE(std::find(group.prompt_ids.begin(), group.prompt_ids.end(),
                            out[i].prompt_id_used) != group.prompt_ids.end());
      EXPECT_DOUBLE_EQ(out[i].label, 0.0);
      EXPECT_GT(normalize_score(out[i].raw_score, scale), mean);
    }
  }
}

TEST(ResponseDistort, OnlyZeroLabelSamplesAreSources) {
  const ScoreScale scale = scale_for_prompt(3);
  std::vector<AugmentedSample> batch = {
      make_normal_sample(
          make_record(1, 3, "alpha beta gamma delta epsilon zeta", 2, 10),
          scale),
      make_normal_sample(
          make_record(2, 3, "one two three four five six seven", 0, 10),
          scale),
  };
  Rng rng(5);
  const auto out = response_distort(std::move(batch), 4, rng);
  for (std::size_t i = 2; i < out.size(); ++i) {
    EXPECT_EQ(out[i].essay_id, 2);
    EXPECT_EQ(out[i].provenance, Provenance::distorted);
    EXPECT_DOUBLE_EQ(out[i].label, 0.0);
  }
  EXPECT_GT(out.size(), 2u);
}

TEST(ResponseDistort, NoZeroLabelSourceLeavesBatchUnchanged) {
  const ScoreScale scale = scale_for_prompt(3);
  std::vector<AugmentedSample> batch = {
      make_normal_sample(make_record(1, 3, "a b c d", 2, 10), scale),
  };
  Rng rng(5);
  const auto out = response_distort(std::move(batch), 2, rng);
  EXPECT_EQ(out.size(), 1u);
}

TEST(ResponseDistort, PreservesMultisetAndOrderOutsideSpan) {
  const ScoreScale scale = scale_for_prompt(4);
  const std::string text = "w00 w01 w02 w03 w04 w05 w06 w07 w08 w09 w10 w11";
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<AugmentedSample> batch = {
        make_normal_sample(make_record(1, 4, text, 0, 10), scale),
    };
    const auto out = response_distort(std::move(batch), 1, rng);
    if (out.size() == 1u) continue;  // identity redraws exhausted
    const AugmentedSample& d = out[1];
    const auto original = words_of(text);
    const auto permuted = words_of(d.text);
    ASSERT_EQ(permuted.size(), original.size());
    ASSERT_GE(d.distort_lo, 0);
    ASSERT_GT(d.distort_hi, d.distort_lo + 1);
    ASSERT_LE(d.distort_hi, static_cast<int>(original.size()));
    // Outside the recorded span, order is intact.
    for (int i = 0; i < d.distort_lo; ++i) {
      EXPECT_EQ(permuted[static_cast<std::size_t>(i)],
                original[static_cast<std::size_t>(i)]);
    }
    for (std::size_t i = static_cast<std::size_t>(d.distort_hi);
         i < original.size(); ++i) {
      EXPECT_EQ(permuted[i], original[i]);
    }
    // Inside, the multiset matches but the order differs.
    auto in_span = [&](const std::vector<std::string>& v) {
      return std::multiset<std::string>(
          v.begin() + d.distort_lo, v.begin() + d.distort_hi);
    };
    EXPECT_EQ(in_span(permuted), in_span(original));
    EXPECT_NE(d.text, text);
  }
}

TEST(ResponseDistort, SwappedSourceYieldsSwappedDistorted) {
  const ScoreScale scale = scale_for_prompt(4);
  std::vector<AugmentedSample> batch = {
      make_normal_sample(
          make_record(9, 4, "p q r s t u v w x y z", 3, 10), scale),
  };
  Rng rng(23);
  batch = prompt_swap(std::move(batch), 1, group_by_id("3-4"), 0.5, rng);
  ASSERT_EQ(batch.size(), 2u);
  const auto out = response_distort(std::move(batch), 1, rng);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[2].provenance, Provenance::swapped_distorted);
  EXPECT_EQ(out[2].prompt_id_used, out[1].prompt_id_used);
  EXPECT_DOUBLE_EQ(out[2].label, 0.0);
}

TEST(DistortForTest, FullRatePermutesWholeText) {
  const EssayRecord r =
      make_record(1, 3, "aa bb cc dd ee ff gg hh", 0, 10);
  Rng rng(31);
  const auto result = distort_for_test(r, 1.0, rng);
  ASSERT_TRUE(result.has_value());
  EXPECT_NE(*result, r.text);
  auto a = words_of(r.text);
  auto b = words_of(*result);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
}

TEST(DistortForTest, HalfRateTouchesOneConsecutiveWindow) {
  const EssayRecord r =
      make_record(1, 3, "aa bb cc dd ee ff gg hh ii jj", 0, 10);
  const auto original = words_of(r.text);
  Rng rng(37);
  for (int trial = 0; trial < 50; ++trial) {
    const auto result = distort_for_test(r, 0.5, rng);
    if (!result.has_value()) continue;
    const auto permuted = words_of(*result);
    ASSERT_EQ(permuted.size(), original.size());
    std::vector<std::size_t> changed;
    for (std::size_t i = 0; i < original.size(); ++i) {
      if (permuted[i] != original[i]) changed.push_back(i);
    }
    ASSERT_FALSE(changed.empty());
    EXPECT_LT(changed.back() - changed.front(), 5u);
  }
}

TEST(DistortForTest, TooShortTextReturnsNothing) {
  Rng rng(41);
  EXPECT_FALSE(distort_for_test(make_record(1, 3, "word", 0, 10), 1.0, rng)
                   .has_value());
  // span = round(0.33 * 3) = 1 < 2
  EXPECT_FALSE(distort_for_test(make_record(1, 3, "a b c", 0, 10), 0.33, rng)
                   .has_value());
}

TEST(DistortForTest, RejectsOutOfRangeRate) {
  Rng rng(43);
  const EssayRecord r = make_record(1, 3, "a b c d", 0, 10);
  EXPECT_THROW(distort_for_test(r, 0.0, rng), ConfigError);
  EXPECT_THROW(distort_for_test(r, 1.0001, rng), ConfigError);
}

TEST(GradeMatchPairs, DrawsPositiveAndNegativeFromOutsideBatch) {
  const ScoreScale scale = scale_for_prompt(5);
  std::vector<AugmentedSample> batch = {
      make_normal_sample(make_record(1, 5, "anchor", 3, 7), scale),
  };
  const std::vector<EssayRecord> pool = {
      make_record(1, 5, "anchor", 3, 7),          // in batch, excluded
      make_record(2, 5, "same both", 3, 7),       // positive
      make_record(3, 6, "same score", 3, 10),     // negative
      make_record(4, 5, "unrelated", 1, 10),      // neither
  };
  Rng rng(47);
  const auto out = grade_match_pairs(std::move(batch), pool, scale, rng);
  EXPECT_EQ(out.added, 2);
  ASSERT_EQ(out.batch.size(), 3u);
  std::set<std::int64_t> ids = {out.batch[1].essay_id, out.batch[2].essay_id};
  EXPECT_TRUE(ids.count(2));
  EXPECT_TRUE(ids.count(3));
}

TEST(GradeMatchPairs, NegativeMayShareGradeWithDifferentScore) {
  const ScoreScale scale = scale_for_prompt(5);
  std::vector<AugmentedSample> batch = {
      make_normal_sample(make_record(1, 5, "anchor", 3, 7), scale),
  };
  const std::vector<EssayRecord> pool = {
      make_record(5, 5, "same grade diff score", 1, 7),
  };
  Rng rng(53);
  const auto out = grade_match_pairs(std::move(batch), pool, scale, rng);
  EXPECT_EQ(out.added, 1);
  ASSERT_EQ(out.batch.size(), 2u);
  EXPECT_EQ(out.batch[1].essay_id, 5);
}

TEST(GradeMatchPairs, SwappedItemsAndEmptyPoolsContributeNothing) {
  const ScoreScale scale = scale_for_prompt(5);
  std::vector<AugmentedSample> batch = {
      make_normal_sample(make_record(1, 5, "high essay text here", 4, 7),
                         scale),
  };
  Rng rng(59);
  batch = prompt_swap(std::move(batch), 1, group_by_id("5-6"), 0.5, rng);
  ASSERT_EQ(batch.size(), 2u);
  // Pool only contains the batch essay itself; swapped copies are skipped
  // and the anchor finds no candidate outside the batch.
  const std::vector<EssayRecord> pool = {
      make_record(1, 5, "high essay text here", 4, 7),
  };
  const auto out = grade_match_pairs(std::move(batch), pool, scale, rng);
  EXPECT_EQ(out.added, 0);
  EXPECT_EQ(out.batch.size(), 2u);
}

// Independent pair enumeration with its own cosine, for cross-checking.
struct OracleTerms {
  double c_s = 0.0;
  double c_d = 0.0;
};

OracleTerms oracle_terms(const Matrix& Z, const std::vector<int>& scores,
                         const std::vector<int>& grades) {
  auto cos_rows = [&](std::size_t i, std::size_t j) {
    double dot = 0.0, ni = 0.0, nj = 0.0;
    for (std::size_t c = 0; c < Z.cols(); ++c) {
      dot += Z(i, c) * Z(j, c);
      ni += Z(i, c) * Z(i, c);
      nj += Z(j, c) * Z(j, c);
    }
    return dot / (std::sqrt(ni) * std::sqrt(nj));
  };
  OracleTerms t;
  for (std::size_t i = 0; i < Z.rows(); ++i) {
    for (std::size_t j = i + 1; j < Z.rows(); ++j) {
      if (scores[i] == scores[j] && grades[i] == grades[j]) {
        t.c_s += cos_rows(i, j);
      } else if (scores[i] == scores[j] || grades[i] == grades[j]) {
        t.c_d += cos_rows(i, j);
      }
    }
  }
  return t;
}

TEST(GradeMatchTerms, MatchesPairEnumerationOracle) {
  Rng rng(61);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t b = 2 + rng.below(7);
    const std::size_t d = 2 + rng.below(5);
    Matrix Z(b, d);
    for (std::size_t i = 0; i < Z.data().size(); ++i) {
      Z[i] = rng.uniform(-1.0, 1.0);
    }
    std::vector<int> scores, grades;
    for (std::size_t i = 0; i < b; ++i) {
      scores.push_back(static_cast<int>(rng.below(3)));
      grades.push_back(static_cast<int>(rng.below(2)) == 0 ? 7 : 10);
    }
    const GradeMatchTerms got = grade_match_terms(Z, scores, grades);
    const OracleTerms want = oracle_terms(Z, scores, grades);
    EXPECT_NEAR(got.c_s, want.c_s, 1e-10);
    EXPECT_NEAR(got.c_d, want.c_d, 1e-10);
    const double loss = grade_match_loss(Z, scores, grades, 4, 0.25);
    EXPECT_NEAR(loss, 0.25 - (want.c_s - want.c_d) / 4.0, 1e-10);
  }
}

TEST(GradeMatchTerms, IdenticalRowsSameBucketGiveBinomialPairSum) {
  const std::size_t b = 5;
  Matrix Z(b, 3);
  for (std::size_t i = 0; i < b; ++i) {
    Z(i, 0) = 1.0;
    Z(i, 1) = 2.0;
    Z(i, 2) = -1.0;
  }
  const std::vector<int> scores(b, 2);
  const std::vector<int> grades(b, 7);
  const GradeMatchTerms t = grade_match_terms(Z, scores, grades);
  EXPECT_EQ(t.pairs_s, 10);  // C(5,2)
  EXPECT_EQ(t.pairs_d, 0);
  EXPECT_NEAR(t.c_s, 10.0, 1e-12);
  EXPECT_NEAR(grade_match_loss(Z, scores, grades, 5, 0.5), 0.5 - 2.0, 1e-12);
}

TEST(GradeMatchTerms, NoQualifyingPairsReducesToMse) {
  Matrix Z(2, 2);
  Z(0, 0) = 1.0;
  Z(1, 1) = 1.0;
  // Different score and different grade: neither sum applies.
  const std::vector<int> scores = {1, 2};
  const std::vector<int> grades = {7, 10};
  EXPECT_DOUBLE_EQ(grade_match_loss(Z, scores, grades, 3, 0.125), 0.125);
}

TEST(GradeMatchTerms, PartitionCoversAllPairs) {
  Rng rng(67);
  const std::size_t b = 12;
  Matrix Z(b, 2);
  std::vector<int> scores, grades;
  for (std::size_t i = 0; i < b; ++i) {
    Z(i, 0) = rng.uniform(-1.0, 1.0);
    Z(i, 1) = rng.uniform(-1.0, 1.0);
    scores.push_back(static_cast<int>(rng.below(4)));
    grades.push_back(static_cast<int>(rng.below(3)));
  }
  const GradeMatchTerms t = grade_match_terms(Z, scores, grades);
  int neither = 0;
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = i + 1; j < b; ++j) {
      if (scores[i] != scores[j] && grades[i] != grades[j]) ++neither;
    }
  }
  EXPECT_EQ(t.pairs_s + t.pairs_d + neither,
            static_cast<int>(b * (b - 1) / 2));
}

TEST(GradeMatchTerms, CloserNegativePairRaisesLoss) {
  const std::vector<int> scores = {2, 2};
  const std::vector<int> grades = {7, 10};  // same score, different grade
  Matrix far(2, 2);
  far(0, 0) = 1.0;
  far(1, 1) = 1.0;  // cosine 0
  Matrix near_(2, 2);
  near_(0, 0) = 1.0;
  near_(1, 0) = 1.0;  // cosine 1
  const double l_far = grade_match_loss(far, scores, grades, 2, 0.0);
  const double l_near = grade_match_loss(near_, scores, grades, 2, 0.0);
  EXPECT_GT(l_near, l_far);
  EXPECT_THROW(grade_match_loss(far, scores, grades, 0, 0.0), ConfigError);
}

TEST(GradeMatchBackward, MatchesFiniteDifferences) {
  Rng rng(71);
  const std::size_t b = 5;
  const std::size_t d = 4;
  const std::vector<int> scores = {1, 1, 2, 2, 1};
  const std::vector<int> grades = {7, 7, 7, 10, 10};
  const int k = 3;
  ParamTensor Z("Z", b, d);
  Z.init_uniform(rng, 0.8);
  auto loss = [&](bool with_grad) {
    const GradeMatchTerms t = grade_match_terms(Z.value, scores, grades);
    if (with_grad) {
      Z.zero_grad();
      accumulate(Z.grad, grade_match_backward(Z.value, scores, grades, k));
    }
    return -(t.c_s - t.c_d) / static_cast<double>(k);
  };
  std::vector<ParamTensor*> params = {&Z};
  const GradCheckResult result = grad_check(loss, params, 1e-5, 1e-4);
  EXPECT_TRUE(result.passed()) << result.summary();
}

}  // namespace
}  // namespace raes
