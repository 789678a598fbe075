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
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "raes/corpus.hpp"
#include "raes/error.hpp"
#include "raes/rng.hpp"

namespace raes {

// Synthetic corpus generator. Every essay is laid out as four fixed regions:
//
//   [title][body slots][coherence chain][body slots]
//
// The raw score is a deterministic function of two generator knobs:
//   o — how many of the prompt's keywords appear (relevance),
//   f — how much of the coherence chain is in canonical order (fluency).
// The title restates the prompt's passage title, so essay and prompt always
// share a constant prompt-specific token run; pairing an essay with the
// wrong prompt text breaks that overlap for every essay, not just keyword
// bearing ones. The title is identical within a prompt and carries no score
// information.
// Relevance is carried by token identity alone: keywords are scattered
// uniformly over the body slots (minus the two slots bordering the chain,
// which keeps keywords and chain tokens from ever being adjacent), so no
// position is informative about them.
// Fluency is carried purely by token order (the chain region always holds
// the same token multiset), so scoring it requires order-sensitive features.
// Every natural essay keeps an ordered chain run of at least
// synth_run_floor words (higher for grade 10), and fluency only stretches
// that run further, so the natural fluency contrast is a subtle run-length
// difference while any text whose chain run is destroyed outright sits far
// outside the natural range. Because the run floors overlap across grades,
// a given run length maps to different fluency at different grade levels.
// Zero keywords or zero fluency gates the score to the scale minimum: an
// off-topic essay and a barely coherent one both sit at the bottom no matter
// how strong the other trait is, which guarantees lowest-label mass that
// spans the whole relevance range. The ordered chain run sits at the
// front for grade-10 writers and at the back for younger writers, and is
// longer for higher grades, so the mapping from surface order to fluency
// differs by grade level.

struct SynthSpec {
  int n_per_prompt = 100;
  std::vector<int> prompt_ids;
  int vocab_size = 256;
  std::uint64_t seed = 1;
  // Share of essays pinned at the scale minimum. Negative keeps the minimum
  // inside the uniform score cycle; >= 0 moves the cycle to the remaining
  // categories and seeds exactly max(2%, this) of essays at the minimum.
  double min_score_share = -1.0;
  // Probability that an essay takes the least-ordered knob pair realizing its
  // target score instead of a uniform draw over all realizing pairs.
  double low_order_bias = 0.0;
};

struct SynthCorpus {
  std::vector<EssayRecord> records;
  std::map<int, std::string> prompt_texts;
};

inline int synth_keyword_count() { return 8; }

/// Number of fluency levels for a prompt; f ranges over 0..levels.
inline int synth_fluency_levels(int prompt_id) {
  const PromptInfo& info = prompt_info(prompt_id);
  return std::max(4, info.max_score - info.min_score);
}

inline std::string synth_keyword(int prompt_id, int k) {
  if (k < 0 || k >= synth_keyword_count()) {
    throw ConfigError("keyword index " + std::to_string(k) + " outside 0..7");
  }
  return "kw" + std::to_string(prompt_id) +
         std::string(1, static_cast<char>('a' + k));
}

inline constexpr int kSynthTitleLen = 6;

/// Title words for a prompt; every essay opens with them and the prompt text
/// quotes them, so they tie an essay to its home prompt.
inline std::vector<std::string> synth_header_words(int prompt_id) {
  std::vector<std::string> header;
  for (int i = 0; i < kSynthTitleLen; ++i) {
    header.push_back("h" + std::to_string(prompt_id) +
                     std::string(1, static_cast<char>('a' + i)));
  }
  return header;
}

/// Length of the coherence chain; longer for higher grade levels.
inline int synth_chain_len(int grade_level) {
  switch (grade_level) {
    case 7:
      return 8;
    case 8:
      return 9;
    case 10:
      return 10;
  }
  throw ConfigError("unknown grade level " + std::to_string(grade_level));
}

inline std::string synth_chain_word(int index) {
  std::string num = std::to_string(index + 1);
  if (num.size() < 2) num.insert(num.begin(), '0');
  return "c" + num;
}

inline constexpr int kSynthFillerPool = 8;
inline constexpr int kSynthTailLen = 6;
// Shortest ordered chain run in any natural essay (the f = 0 case).
inline constexpr int kSynthRunFloor = 4;

/// Word index where the coherence chain starts (title plus leading body
/// slots come first; trailing body slots follow the chain).
inline int synth_chain_offset() {
  return kSynthTitleLen + synth_keyword_count();
}

/// Shortest ordered chain run a natural essay of this grade ever shows.
/// Grade-10 writers keep longer runs even at f = 0, so overlapping run
/// lengths mean different fluency at different grades: the same visible run
/// reads as strong for a younger writer but weak for an older one.
inline int synth_run_floor(int grade_level) {
  return grade_level == 10 ? kSynthRunFloor + 2 : kSynthRunFloor;
}

/// Ordered-run length for fluency f; spans synth_run_floor..chain_len-2 so
/// the run never covers the whole chain and f = 0 still leaves a visible run.
inline int synth_run_len(int grade_level, int f, int levels) {
  const int chain_len = synth_chain_len(grade_level);
  const int run_max = chain_len - 2;
  const int floor = synth_run_floor(grade_level);
  return floor + static_cast<int>(std::lround(static_cast<double>(f) /
                                              levels * (run_max - floor)));
}

inline std::string synth_filler_word(Rng& rng) {
  return "w" + std::to_string(rng.below(kSynthFillerPool) + 1);
}

/// Weight of the relevance knob in the score blend; the rest goes to
/// fluency. Grade-8 rubrics weigh coherence over content, so the mapping
/// from the same pair of knobs to a score differs by grade level and a
/// grade-blind fit must compromise between the two rubrics.
inline double synth_relevance_weight(int grade_level) {
  return grade_level == 8 ? 0.3 : 0.8;
}

/// Deterministic score for relevance o (0..8) and fluency f (0..levels).
inline int synth_score(int prompt_id, int o, int f) {
  const PromptInfo& info = prompt_info(prompt_id);
  const int levels = synth_fluency_levels(prompt_id);
  if (o < 0 || o > synth_keyword_count()) {
    throw ConfigError("relevance " + std::to_string(o) + " outside 0..8");
  }
  if (f < 0 || f > levels) {
    throw ConfigError("fluency " + std::to_string(f) + " outside 0.." +
                      std::to_string(levels));
  }
  if (o == 0 || f == 0) return info.min_score;
  const double w_o = synth_relevance_weight(info.grade_level);
  // Blend rescaled so (o=1, f=1) sits at 0 and (o=8, f=max) at 1; without the
  // shift the one-keyword floor strands the bottom of wide scales.
  const double blend = w_o * (static_cast<double>(o) / 8.0) +
                       (1.0 - w_o) * (static_cast<double>(f) / levels);
  const double floor = w_o / 8.0 + (1.0 - w_o) / levels;
  const double quality = (blend - floor) / (1.0 - floor);
  const double mapped = quality * (info.max_score - info.min_score);
  return info.min_score + static_cast<int>(std::lround(mapped));
}

namespace detail {

inline bool chain_sorted(const std::vector<std::string>& words,
                         std::size_t lo, std::size_t hi) {
  return std::is_sorted(words.begin() + static_cast<std::ptrdiff_t>(lo),
                        words.begin() + static_cast<std::ptrdiff_t>(hi));
}

// Shuffles words[lo, hi); redraws a few times if the result comes out fully
// ordered, so the shuffled part never mimics a longer canonical run.
inline void shuffle_span(std::vector<std::string>& words, std::size_t lo,
                         std::size_t hi, Rng& rng) {
  if (hi - lo < 2) return;
  for (int tries = 0; tries < 5; ++tries) {
    for (std::size_t i = hi - 1; i > lo; --i) {
      const std::size_t j = lo + static_cast<std::size_t>(
                                     rng.below(static_cast<std::uint64_t>(
                                         i - lo + 1)));
      std::swap(words[i], words[j]);
    }
    if (!chain_sorted(words, lo, hi)) return;
  }
}

}  // namespace detail

/// Builds one essay's word list for the given knobs.
inline std::vector<std::string> synth_essay_words(int prompt_id, int o, int f,
                                                  Rng& rng) {
  const PromptInfo& info = prompt_info(prompt_id);
  const int levels = synth_fluency_levels(prompt_id);
  (void)synth_score(prompt_id, o, f);  // validates o and f ranges

  std::vector<std::string> words = synth_header_words(prompt_id);

  // The o chosen keywords are scattered uniformly over the body slots
  // (canonical keyword order is kept across the chosen slots), so keyword
  // position carries no relevance information and relevance must be read
  // from token identity.
  std::vector<int> kw_ids(static_cast<std::size_t>(synth_keyword_count()));
  for (std::size_t i = 0; i < kw_ids.size(); ++i) {
    kw_ids[i] = static_cast<int>(i);
  }
  rng.shuffle(kw_ids);
  std::vector<int> chosen(kw_ids.begin(), kw_ids.begin() + o);
  std::sort(chosen.begin(), chosen.end());

  const int pre_slots = synth_keyword_count();
  const int body_slots = pre_slots + kSynthTailLen;
  // Body slots surround the chain on both sides. The last pre slot and the
  // first tail slot border the chain region and never take a keyword, so no
  // natural essay puts a keyword next to a chain token; a keyword touching
  // a chain token can only come from reshuffled text, and the strength of
  // that signature grows with the keyword count.
  std::vector<int> slot_ids;
  for (int i = 0; i < body_slots; ++i) {
    if (i == pre_slots - 1 || i == pre_slots) continue;
    slot_ids.push_back(i);
  }
  rng.shuffle(slot_ids);
  std::vector<int> kw_slots(slot_ids.begin(), slot_ids.begin() + o);
  std::sort(kw_slots.begin(), kw_slots.end());
  std::vector<std::string> body(static_cast<std::size_t>(body_slots));
  for (int i = 0; i < o; ++i) {
    body[static_cast<std::size_t>(kw_slots[static_cast<std::size_t>(i)])] =
        synth_keyword(prompt_id, chosen[static_cast<std::size_t>(i)]);
  }
  for (std::string& slot : body) {
    if (slot.empty()) slot = synth_filler_word(rng);
  }
  words.insert(words.end(), body.begin(), body.begin() + pre_slots);

  // Coherence chain: canonical run of length r, remainder shuffled. The run
  // sits at the chain front for grade 10, at the chain back otherwise.
  const int chain_len = synth_chain_len(info.grade_level);
  const int run = synth_run_len(info.grade_level, f, levels);
  const std::size_t chain_lo = words.size();
  for (int i = 0; i < chain_len; ++i) words.push_back(synth_chain_word(i));
  const std::size_t chain_hi = words.size();
  // The chain starts fully sorted, so keeping a run ordered means shuffling
  // only the complementary span.
  if (info.grade_level == 10) {
    detail::shuffle_span(words, chain_lo + static_cast<std::size_t>(run),
                         chain_hi, rng);
  } else {
    detail::shuffle_span(words, chain_lo,
                         chain_hi - static_cast<std::size_t>(run), rng);
  }

  words.insert(words.end(), body.begin() + pre_slots, body.end());
  return words;
}

inline std::string synth_prompt_text(int prompt_id) {
  std::string text = "the passage title is";
  for (const std::string& word : synth_header_words(prompt_id)) {
    text += " " + word;
  }
  text +=
      " . please read the passage below and think about the main ideas . "
      "write a response that explains your answer to the task . "
      "strong answers use the key ideas";
  for (int k = 0; k < synth_keyword_count(); ++k) {
    text += " " + synth_keyword(prompt_id, k);
  }
  text += " .";
  return text;
}

namespace detail {

inline int synth_generic_word_count() {
  // Distinct tokens of synth_prompt_text that are neither keywords nor title
  // words.
  return 25;
}

// All (o, f) knob pairs realizing each raw score; o = 0 pairs only with
// f = 0 (an off-topic essay is also incoherent).
inline std::map<int, std::vector<std::pair<int, int>>> feasible_knobs(
    int prompt_id) {
  std::map<int, std::vector<std::pair<int, int>>> table;
  const int levels = synth_fluency_levels(prompt_id);
  table[synth_score(prompt_id, 0, 0)].push_back({0, 0});
  for (int o = 1; o <= synth_keyword_count(); ++o) {
    for (int f = 0; f <= levels; ++f) {
      table[synth_score(prompt_id, o, f)].push_back({o, f});
    }
  }
  return table;
}

}  // namespace detail

/// Generates a deterministic corpus: per prompt, target scores cycle through
/// the whole scale and the scale minimum is seeded at >= 2% frequency.
inline SynthCorpus synth_corpus(const SynthSpec& spec) {
  if (spec.n_per_prompt < 1) {
    throw ConfigError("n_per_prompt must be >= 1");
  }
  if (spec.prompt_ids.empty()) {
    throw ConfigError("no prompt ids given");
  }
  if (spec.min_score_share > 1.0) {
    throw ConfigError("min_score_share must be <= 1");
  }
  if (spec.low_order_bias < 0.0 || spec.low_order_bias > 1.0) {
    throw ConfigError("low_order_bias must be in [0, 1]");
  }
  for (int pid : spec.prompt_ids) (void)prompt_info(pid);

  const int required =
      3 /* reserved ids */ + synth_chain_len(10) + kSynthFillerPool +
      detail::synth_generic_word_count() +
      (synth_keyword_count() + kSynthTitleLen) *
          static_cast<int>(spec.prompt_ids.size());
  if (spec.vocab_size < required) {
    throw ConfigError("vocab_size " + std::to_string(spec.vocab_size) +
                      " too small for " +
                      std::to_string(spec.prompt_ids.size()) +
                      " keyword sets; need >= " + std::to_string(required));
  }

  SynthCorpus corpus;
  Rng root(spec.seed);
  for (int pid : spec.prompt_ids) {
    corpus.prompt_texts[pid] = synth_prompt_text(pid);
    Rng rng = root.fork(static_cast<std::uint64_t>(pid));
    const PromptInfo& info = prompt_info(pid);
    const int categories = info.max_score - info.min_score + 1;
    const auto feasible = detail::feasible_knobs(pid);
    const double quota_share =
        spec.min_score_share < 0.0 ? 0.02 : std::max(0.02, spec.min_score_share);
    const int low_quota = std::max(
        2, static_cast<int>(std::ceil(quota_share * spec.n_per_prompt)));

    for (int e = 0; e < spec.n_per_prompt; ++e) {
      int target;
      if (e < low_quota) {
        target = info.min_score;
      } else if (spec.min_score_share >= 0.0 && categories > 1) {
        target = info.min_score + 1 + e % (categories - 1);
      } else {
        target = info.min_score + e % categories;
      }
      auto it = feasible.find(target);
      if (it == feasible.end()) {
        // Nearest realizable score stands in for an unrealizable target.
        int best_dist = std::numeric_limits<int>::max();
        for (const auto& [score, knobs] : feasible) {
          const int dist = std::abs(score - target);
          if (dist < best_dist) {
            best_dist = dist;
            it = feasible.find(score);
          }
        }
      }
      const auto& knobs = it->second;
      std::pair<int, int> pick;
      if (spec.low_order_bias > 0.0 && rng.uniform() < spec.low_order_bias) {
        std::vector<std::pair<int, int>> flattest;
        int best_f = std::numeric_limits<int>::max();
        for (const auto& kn : knobs) best_f = std::min(best_f, kn.second);
        for (const auto& kn : knobs) {
          if (kn.second == best_f) flattest.push_back(kn);
        }
        pick = flattest[static_cast<std::size_t>(rng.below(flattest.size()))];
      } else {
        pick = knobs[static_cast<std::size_t>(rng.below(knobs.size()))];
      }
      const auto [o, f] = pick;

      EssayRecord rec;
      rec.essay_id = static_cast<std::int64_t>(pid) * 100000 + e + 1;
      rec.prompt_id = pid;
      rec.raw_score = synth_score(pid, o, f);
      rec.grade_level = info.grade_level;
      rec.genre = info.genre;
      const std::vector<std::string> words =
          synth_essay_words(pid, o, f, rng);
      for (std::size_t i = 0; i < words.size(); ++i) {
        if (i > 0) rec.text += ' ';
        rec.text += words[i];
      }
      corpus.records.push_back(std::move(rec));
    }
  }
  return corpus;
}

}  // namespace raes
