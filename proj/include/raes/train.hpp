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
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "raes/augment.hpp"
#include "raes/checkpoint.hpp"
#include "raes/config.hpp"
#include "raes/corpus.hpp"
#include "raes/error.hpp"
#include "raes/metrics.hpp"
#include "raes/model.hpp"
#include "raes/runlog.hpp"
#include "raes/sha1.hpp"

namespace raes {

// Training orchestration: rubric-group data loading, the epoch/batch loop
// with the three augmentations, dev-QWK checkpoint selection, and the test
// metric sweep shared with standalone evaluation.

struct GroupData {
  RubricGroup group;
  ScoreScale scale;
  std::vector<EssayRecord> records;  // group records, file order
  std::map<int, std::string> prompt_texts;
};

inline GroupData load_group_data(const ExperimentConfig& config) {
  GroupData data;
  data.group = group_by_id(config.group);
  data.scale = scale_for_prompt(data.group.prompt_ids.front());
  for (int pid : data.group.prompt_ids) {
    const ScoreScale other = scale_for_prompt(pid);
    if (other.min_score != data.scale.min_score ||
        other.max_score != data.scale.max_score) {
      throw ConfigError("group " + config.group +
                        " mixes score scales; cannot pool ratings");
    }
  }
  for (EssayRecord& r : load_tsv(config.data)) {
    if (std::find(data.group.prompt_ids.begin(), data.group.prompt_ids.end(),
                  r.prompt_id) != data.group.prompt_ids.end()) {
      data.records.push_back(std::move(r));
    }
  }
  if (data.records.empty()) {
    throw ConfigError("no records for group " + config.group + " in " +
                      config.data);
  }
  const auto prompts = load_prompts_tsv(config.prompts);
  for (int pid : data.group.prompt_ids) {
    const auto it = prompts.find(pid);
    if (it == prompts.end()) {
      throw ConfigError("missing prompt text for prompt " +
                        std::to_string(pid) + " in " + config.prompts);
    }
    data.prompt_texts[pid] = it->second;
  }
  return data;
}

namespace detail {

inline Vocabulary build_vocab(const std::vector<EssayRecord>& records,
                              const std::map<int, std::string>& prompts) {
  Vocabulary vocab;
  for (const EssayRecord& r : records) {
    for (const std::string& w : split_tokens(r.text)) vocab.add(w);
  }
  for (const auto& [pid, text] : prompts) {
    for (const std::string& w : split_tokens(text)) vocab.add(w);
  }
  return vocab;
}

inline std::vector<EssayRecord> records_for_ids(
    const std::vector<EssayRecord>& records,
    const std::vector<std::int64_t>& ids) {
  const std::set<std::int64_t> wanted(ids.begin(), ids.end());
  std::vector<EssayRecord> out;
  for (const EssayRecord& r : records) {
    if (wanted.count(r.essay_id)) out.push_back(r);
  }
  return out;
}

}  // namespace detail

/// Prompt caches plus scoring entry points for a fixed parameter state.
/// Rebuild after any parameter update.
class ModelScorer {
 public:
  ModelScorer(ModelParams& params, const Vocabulary& vocab,
              const EncoderConfig& config,
              const std::map<int, std::string>& prompt_texts)
      : params_(params), vocab_(vocab), config_(config) {
    for (const auto& [pid, text] : prompt_texts) {
      caches_.emplace(pid, encode_prompt(text, params, vocab, config));
    }
  }

  double score(int prompt_id, const std::string& text) const {
    return forward_sample(text, caches_.at(prompt_id), params_, vocab_,
                          config_);
  }

  double score_record(const EssayRecord& r) const {
    return score(r.prompt_id, r.text);
  }

 private:
  ModelParams& params_;
  const Vocabulary& vocab_;
  const EncoderConfig& config_;
  std::map<int, PromptCache> caches_;
};

namespace detail {

struct DevMetrics {
  double mse = 0.0;
  double qwk = std::numeric_limits<double>::quiet_NaN();
  bool degenerate = false;
};

inline DevMetrics dev_metrics(const ModelScorer& scorer,
                              const std::vector<EssayRecord>& dev,
                              const ScoreScale& scale) {
  DevMetrics out;
  std::vector<double> preds, labels;
  std::vector<int> human, machine;
  for (const EssayRecord& r : dev) {
    const double pred = scorer.score_record(r);
    preds.push_back(pred);
    labels.push_back(normalize_score(r.raw_score, scale));
    human.push_back(r.raw_score);
    machine.push_back(denormalize_score(pred, scale));
  }
  out.mse = mse_loss(preds, labels);
  try {
    out.qwk = qwk(human, machine, scale);
  } catch (const DegenerateError&) {
    out.degenerate = true;
  }
  return out;
}

/// Test-time metric sweep: per-prompt QWK, swapped-sample detection at a 10%
/// generation rate, and distorted detection at the three standard rates.
inline void evaluate_fold(const ModelScorer& scorer, const GroupData& data,
                          const std::vector<EssayRecord>& test, Rng& rng,
                          FoldResult& fr, std::vector<std::string>& notes) {
  const ScoreScale& scale = data.scale;
  std::vector<double> prompt_qwks;
  for (int pid : data.group.prompt_ids) {
    std::vector<int> human, machine;
    for (const EssayRecord& r : test) {
      if (r.prompt_id != pid) continue;
      human.push_back(r.raw_score);
      machine.push_back(denormalize_score(scorer.score_record(r), scale));
    }
    if (human.empty()) {
      notes.push_back("fold " + std::to_string(fr.fold_index) +
                      ": no test records for prompt " + std::to_string(pid));
      continue;
    }
    try {
      const double value = qwk(human, machine, scale);
      fr.test_qwk_by_prompt.emplace_back(pid, value);
      prompt_qwks.push_back(value);
    } catch (const DegenerateError&) {
      notes.push_back("fold " + std::to_string(fr.fold_index) +
                      ": degenerate test qwk for prompt " +
                      std::to_string(pid));
    }
  }
  fr.test_qwk_mean = prompt_qwks.empty()
                         ? std::numeric_limits<double>::quiet_NaN()
                         : macro_average(prompt_qwks);

  fr.swap_applicable = data.group.prompt_ids.size() >= 2;
  if (fr.swap_applicable) {
    std::vector<AugmentedSample> batch;
    for (const EssayRecord& r : test) {
      batch.push_back(make_normal_sample(r, scale));
    }
    const double mean = mean_normalized_label(test, scale);
    const int k = std::max(
        1, static_cast<int>(std::lround(0.10 * static_cast<double>(
                                                   test.size()))));
    const std::size_t before = batch.size();
    batch = prompt_swap(std::move(batch), k, data.group, mean, rng);
    std::vector<AugmentedSample> swapped(batch.begin() + before, batch.end());
    if (swapped.empty()) {
      notes.push_back("fold " + std::to_string(fr.fold_index) +
                      ": no swap-eligible test records");
    } else {
      const DetectionOutcome outcome = irrelevant_detection_rate(
          [&](const AugmentedSample& s) {
            return scorer.score(s.prompt_id_used, s.text);
          },
          swapped, scale);
      fr.swap_total = outcome.total;
      fr.swap_detected = outcome.detected;
    }
  }

  for (const double rate : {0.25, 0.5, 1.0}) {
    try {
      const DetectionOutcome outcome = distorted_detection_rate(
          [&](const EssayRecord& r, const std::string& text) {
            return scorer.score(r.prompt_id, text);
          },
          test, rate, rng);
      fr.distort.push_back(
          {rate, outcome.total, outcome.detected, outcome.skipped});
    } catch (const ConfigError&) {
      notes.push_back("fold " + std::to_string(fr.fold_index) +
                      ": all test records too short to distort at rate " +
                      detail::real_str(rate));
    }
  }
}

}  // namespace detail

struct TrainOutput {
  RunLog log;
  std::vector<std::string> checkpoint_paths;
  std::string runlog_path;
};

inline TrainOutput cmd_train(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  const GroupData data = load_group_data(config);
  std::filesystem::create_directories(config.out_dir);

  TrainOutput out;
  RunLog& log = out.log;
  log.config_kv = config_to_kv(config);
  log.data_hash = blob_hash_file(config.data);
  log.n_records = static_cast<int>(data.records.size());

  const std::vector<FoldSplit> folds = make_folds(data.records, config.seed);

  std::vector<int> selected;
  if (config.fold >= 0) {
    selected.push_back(config.fold);
  } else {
    for (int i = 0; i < 5; ++i) selected.push_back(i);
  }

  const bool swap_applicable = data.group.prompt_ids.size() >= 2;
  if (config.augment.swap_count > 0 && !swap_applicable) {
    log.notes.push_back("prompt swap not applicable: group " + config.group +
                        " has a single prompt; training proceeds without it");
  }

  Rng root(config.seed);
  for (int fold_index : selected) {
    const FoldSplit& split = folds[static_cast<std::size_t>(fold_index)];
    const std::vector<EssayRecord> train =
        detail::records_for_ids(data.records, split.train_ids);
    const std::vector<EssayRecord> dev =
        detail::records_for_ids(data.records, split.dev_ids);
    const std::vector<EssayRecord> test =
        detail::records_for_ids(data.records, split.test_ids);

    Rng fold_rng = root.fork(static_cast<std::uint64_t>(fold_index));
    Rng init_rng = fold_rng.fork(0);

    const Vocabulary vocab = detail::build_vocab(train, data.prompt_texts);
    ModelParams params(vocab.size(), static_cast<int>(config.encoder.embed_dim),
                       config.k_max);
    params.init(init_rng);

    const double score_mean = mean_normalized_label(train, data.scale);

    bool has_lowest = false;
    std::set<int> grades;
    for (const EssayRecord& r : train) {
      if (r.raw_score == data.scale.min_score) has_lowest = true;
      grades.insert(r.grade_level);
    }
    if (config.augment.distort_count > 0 && !has_lowest) {
      log.notes.push_back("fold " + std::to_string(fold_index) +
                          ": response distortion found no lowest-score "
                          "training essays; batches stay undistorted");
    }
    const bool gm_usable = grades.size() >= 2;
    if (config.augment.gm_enabled && !gm_usable) {
      log.notes.push_back("fold " + std::to_string(fold_index) +
                          ": grade match not applicable: single grade "
                          "level in training split; loss reduces to mse");
    }

    FoldResult fr;
    fr.fold_index = fold_index;

    AdamOptimizer opt;
    double best_qwk = -std::numeric_limits<double>::infinity();
    bool have_best = false;
    std::vector<Matrix> best_values;
    bool noted_degenerate_dev = false;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      Rng shuffle_rng = fold_rng.fork(100 + static_cast<std::uint64_t>(epoch));
      Rng augment_rng = fold_rng.fork(200 + static_cast<std::uint64_t>(epoch));
      std::vector<std::size_t> order(train.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      shuffle_rng.shuffle(order);

      const bool gm_active = config.augment.gm_enabled && gm_usable &&
                             epoch < config.gm_cutoff();

      double epoch_loss = 0.0;
      int batches = 0;
      for (std::size_t lo = 0; lo < order.size();
           lo += static_cast<std::size_t>(config.batch_size)) {
        const std::size_t hi =
            std::min(order.size(),
                     lo + static_cast<std::size_t>(config.batch_size));
        std::vector<AugmentedSample> batch;
        for (std::size_t i = lo; i < hi; ++i) {
          batch.push_back(make_normal_sample(train[order[i]], data.scale));
        }
        if (config.augment.swap_count > 0 && swap_applicable) {
          batch = prompt_swap(std::move(batch), config.augment.swap_count,
                              data.group, score_mean, augment_rng);
        }
        if (config.augment.distort_count > 0) {
          batch = response_distort(std::move(batch),
                                   config.augment.distort_count, augment_rng);
        }
        // Pairing partners appended past this point feed the contrastive
        // pair sums only; the squared-error term stays over the training
        // batch proper.
        const std::size_t mse_count = batch.size();
        int gm_k = 0;
        if (gm_active) {
          GradeMatchBatch enriched = grade_match_pairs(
              std::move(batch), train, data.scale, augment_rng);
          batch = std::move(enriched.batch);
          gm_k = enriched.added;
        }

        std::map<int, PromptCache> prompts;
        for (int pid : data.group.prompt_ids) {
          prompts.emplace(pid, encode_prompt(data.prompt_texts.at(pid),
                                             params, vocab, config.encoder));
        }

        const std::size_t b = batch.size();
        std::vector<SampleCache> caches(b);
        std::vector<double> preds(b), labels(b);
        for (std::size_t i = 0; i < b; ++i) {
          preds[i] = forward_sample(batch[i].text,
                                    prompts.at(batch[i].prompt_id_used),
                                    params, vocab, config.encoder,
                                    &caches[i]);
          labels[i] = batch[i].label;
        }
        const double mse = mse_loss(
            std::vector<double>(preds.begin(),
                                preds.begin() + static_cast<std::ptrdiff_t>(
                                                    mse_count)),
            std::vector<double>(labels.begin(),
                                labels.begin() + static_cast<std::ptrdiff_t>(
                                                     mse_count)));
        double loss = mse;

        // Contrastive term over non-swapped, non-distorted batch items.
        std::vector<std::size_t> gm_rows;
        Matrix dZ;
        if (gm_active && gm_k > 0) {
          for (std::size_t i = 0; i < b; ++i) {
            if (batch[i].provenance == Provenance::normal) {
              gm_rows.push_back(i);
            }
          }
          Matrix Z(gm_rows.size(), caches[gm_rows[0]].z1.size());
          std::vector<int> scores, grade_levels;
          for (std::size_t r = 0; r < gm_rows.size(); ++r) {
            const SampleCache& c = caches[gm_rows[r]];
            for (std::size_t col = 0; col < c.z1.size(); ++col) {
              Z(r, col) = c.z1[col];
            }
            scores.push_back(batch[gm_rows[r]].raw_score);
            grade_levels.push_back(batch[gm_rows[r]].grade_level);
          }
          const GradeMatchTerms terms =
              grade_match_terms(Z, scores, grade_levels);
          loss = mse - (terms.c_s - terms.c_d) / static_cast<double>(gm_k);
          dZ = grade_match_backward(Z, scores, grade_levels, gm_k);
          const double scale_factor = config.gm_scale();
          for (std::size_t i = 0; i < dZ.data().size(); ++i) {
            dZ[i] *= scale_factor;
          }
        }

        params.zero_grads();
        for (std::size_t i = 0; i < b; ++i) {
          const double d_out =
              i < mse_count
                  ? 2.0 * (preds[i] - labels[i]) /
                        static_cast<double>(mse_count)
                  : 0.0;
          std::span<const double> extra;
          const auto row_it =
              std::find(gm_rows.begin(), gm_rows.end(), i);
          if (row_it != gm_rows.end()) {
            extra = dZ.row(static_cast<std::size_t>(
                row_it - gm_rows.begin()));
          }
          backward_sample(caches[i], prompts.at(batch[i].prompt_id_used),
                          params, d_out, extra);
        }

        std::vector<ParamTensor*> embed_group = {&params.embedding};
        std::vector<ParamTensor*> attn_group;
        for (ParamTensor* p : params.all()) {
          if (p != &params.embedding) attn_group.push_back(p);
        }
        opt.step(embed_group, config.encoder_lr);
        opt.step(attn_group, config.attention_lr);

        epoch_loss += loss;
        ++batches;
      }

      const ModelScorer scorer(params, vocab, config.encoder,
                               data.prompt_texts);
      const detail::DevMetrics dm =
          detail::dev_metrics(scorer, dev, data.scale);
      if (dm.degenerate && !noted_degenerate_dev) {
        log.notes.push_back("fold " + std::to_string(fold_index) +
                            ": degenerate dev qwk at epoch " +
                            std::to_string(epoch));
        noted_degenerate_dev = true;
      }
      fr.epochs.push_back({epoch, epoch_loss / std::max(1, batches), dm.mse,
                           dm.qwk});
      if (!std::isnan(dm.qwk) && dm.qwk > best_qwk) {
        best_qwk = dm.qwk;
        fr.best_epoch = epoch;
        have_best = true;
        best_values.clear();
        for (ParamTensor* p : params.all()) best_values.push_back(p->value);
      }
    }

    if (!have_best) {
      fr.best_epoch = config.epochs - 1;
      log.notes.push_back("fold " + std::to_string(fold_index) +
                          ": no usable dev qwk; keeping final epoch");
    } else {
      const std::vector<ParamTensor*> all = params.all();
      for (std::size_t i = 0; i < all.size(); ++i) {
        all[i]->value = best_values[i];
      }
    }

    const ModelScorer scorer(params, vocab, config.encoder,
                             data.prompt_texts);
    Rng eval_rng = fold_rng.fork(999);
    detail::evaluate_fold(scorer, data, test, eval_rng, fr, log.notes);

    Checkpoint ck(static_cast<int>(config.encoder.embed_dim), config.k_max,
                  static_cast<int>(config.encoder.window_len), config.seed,
                  vocab);
    ck.params = params;
    const std::string ck_path =
        config.out_dir + "/fold" + std::to_string(fold_index) + ".ckpt";
    save_checkpoint(ck_path, ck);
    out.checkpoint_paths.push_back(ck_path);

    log.folds.push_back(std::move(fr));
  }

  log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  out.runlog_path = config.out_dir + "/train.runlog";
  save_runlog(log, out.runlog_path);
  return out;
}

struct EvalOutput {
  FoldResult fold;
  std::vector<std::string> notes;
  std::string table;
};

/// Scores one fold's test split with a saved checkpoint. The fold split is
/// rebuilt from the seed stored in the checkpoint so it matches training.
inline EvalOutput cmd_eval(const std::string& checkpoint_path,
                           const ExperimentConfig& config) {
  if (config.fold < 0 || config.fold > 4) {
    throw ConfigError("eval needs an explicit fold 0..4");
  }
  Checkpoint ck = load_checkpoint(checkpoint_path);
  ck.require_dims(static_cast<int>(config.encoder.embed_dim), config.k_max,
                  static_cast<int>(config.encoder.window_len));
  const GroupData data = load_group_data(config);

  const std::vector<FoldSplit> folds = make_folds(data.records, ck.seed);
  const std::vector<EssayRecord> test = detail::records_for_ids(
      data.records, folds[static_cast<std::size_t>(config.fold)].test_ids);
  if (test.empty()) {
    throw ConfigError("fold " + std::to_string(config.fold) +
                      " has no test records for group " + config.group);
  }

  EvalOutput out;
  out.fold.fold_index = config.fold;
  const ModelScorer scorer(ck.params, ck.vocab, ck.encoder_config(),
                           data.prompt_texts);
  Rng eval_rng = Rng(config.seed).fork(999);
  detail::evaluate_fold(scorer, data, test, eval_rng, out.fold, out.notes);

  std::string table;
  table += "fold " + std::to_string(config.fold) + "\n";
  for (const auto& [pid, value] : out.fold.test_qwk_by_prompt) {
    table += "test_qwk prompt=" + std::to_string(pid) +
             " value=" + detail::real_str(value) + "\n";
  }
  table += "test_qwk_mean=" + detail::real_str(out.fold.test_qwk_mean) + "\n";
  if (out.fold.swap_applicable && out.fold.swap_total > 0) {
    table += "swap_detect total=" + std::to_string(out.fold.swap_total) +
             " detected=" + std::to_string(out.fold.swap_detected) +
             " rate=" + detail::real_str(out.fold.swap_rate()) + "\n";
  }
  for (const DistortRow& row : out.fold.distort) {
    table += "distort_detect rate_param=" + detail::real_str(row.rate_param) +
             " total=" + std::to_string(row.total) +
             " detected=" + std::to_string(row.detected) +
             " rate=" + detail::real_str(row.rate()) + "\n";
  }
  for (const std::string& note : out.notes) table += "note: " + note + "\n";
  out.table = table;
  return out;
}

}  // namespace raes
